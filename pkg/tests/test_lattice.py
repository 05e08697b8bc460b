import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingghost.lattice import (
    BETA_C,
    FREE,
    WIRED,
    BoundaryCondition,
    Rect,
    RectFrame,
    build_domain_graph,
    build_graph,
    external_coupling,
    graph_from_text,
    graph_hash,
    graph_to_text,
    quotient_by_boundary,
    row_of_frames,
    sites_from_rows,
)


def test_critical_coupling_value():
    assert BETA_C == pytest.approx(math.log(1 + math.sqrt(2)) / 2, abs=1e-15)
    assert math.sinh(2 * BETA_C) == pytest.approx(1.0, abs=1e-14)


def test_external_coupling_scaling():
    assert external_coupling(1.0, 0.3) == pytest.approx(0.3)
    assert external_coupling(0.5, 1.0) == pytest.approx(0.5 ** (15 / 8))


def test_two_site_graph_layout():
    g = build_graph([(0, 0), (1, 0)], 1.0, 0.2)
    assert g.n_sites == 2 and g.ghost == 2
    assert g.n_internal == 1 and g.n_external == 2
    assert g.couplings[0] == pytest.approx(BETA_C)
    assert np.allclose(g.couplings[1:], 0.2)
    assert g.edge_between(0, 1) == 0
    assert g.edge_between(g.ghost, 1) == g.external_edge(1)


def test_domain_graph_counts():
    g = build_domain_graph((0, 10, 0, 3), 0.5, 0.1)
    assert g.n_sites == 21 * 7
    assert g.n_internal == 20 * 7 + 21 * 6
    assert len(g.boundary) == 2 * 21 + 2 * 5


def test_invalid_arguments_rejected():
    with pytest.raises(ValueError):
        build_graph([(0, 0)], 0.0, 0.1)
    with pytest.raises(ValueError):
        build_graph([(0, 0)], 1.0, -1.0)
    with pytest.raises(ValueError):
        build_graph([], 1.0, 0.1)


def test_boundary_conditions_partition():
    g = build_graph(sites_from_rows(["###", "###", "###"]), 1.0, 0.1)
    free = FREE.partition(g)
    wired = WIRED.partition(g)
    assert len(free) == len(g.boundary) + 1
    assert len(wired) == 1
    custom = BoundaryCondition.custom([list(g.boundary[:3]), list(g.boundary[3:]) + [g.ghost]])
    assert len(custom.partition(g)) == 2
    with pytest.raises(ValueError):
        BoundaryCondition.custom([[int(g.boundary[0])]]).partition(g)


def test_quotient_keeps_edges():
    g = build_graph(sites_from_rows(["##", "##"]), 1.0, 0.1)
    q = quotient_by_boundary(g, WIRED)
    assert q.n_vertices == 1
    assert len(q.edges) == g.n_edges


def test_graph_text_round_trip():
    g = build_domain_graph((0, 2, 0, 1), 0.5, 0.7)
    g2 = graph_from_text(graph_to_text(g))
    assert graph_hash(g) == graph_hash(g2)
    assert np.array_equal(g.couplings, g2.couplings)
    bad = g.with_couplings(np.where(np.arange(g.n_edges) == 0, 0.5, g.couplings))
    assert graph_from_text(graph_to_text(bad)).coupling_deviation() > 0.05


def test_reference_frame_geometry():
    fr = RectFrame()
    assert (fr.T.x0, fr.T.x1, fr.T.y0, fr.T.y1) == (0, 10, 0, 3)
    assert fr.Q1.contains((1.0, 1.5)) and not fr.Q1.contains((2.0, 1.5))
    assert fr.Q8.contains((9.0, 1.5)) and not fr.Q8.contains((8.0, 1.5))
    assert fr.horizontal


@given(st.integers(0, 3), st.integers(-20, 20), st.integers(-20, 20))
@settings(max_examples=60, deadline=None)
def test_rotated_frames_keep_nesting(k, dx, dy):
    fr = RectFrame((dx, dy), k)
    for inner in (fr.R, fr.S, fr.Q1, fr.Q8):
        assert fr.T.contains_rect(inner)
    assert fr.S.contains_rect(fr.Q1) and fr.S.contains_rect(fr.Q8)
    assert sorted((fr.T.width, fr.T.height)) == [3, 10]
    assert fr.horizontal == (fr.T.width > fr.T.height)


def test_row_of_frames_spacing():
    frames = row_of_frames(3)
    for f, g in zip(frames, frames[1:]):
        assert f.T.linf_distance(g.T) == pytest.approx(2.0)


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=12, unique=True),
       st.sampled_from([1.0, 0.5, 0.25]), st.floats(0, 2))
@settings(max_examples=50, deadline=None)
def test_graph_invariants(sites, a, h):
    g = build_graph(sites, a, h)
    assert g.n_edges == g.n_internal + g.n_sites
    u, v = g.edges[: g.n_internal].T
    assert np.all(np.abs(g.sites[u] - g.sites[v]).sum(axis=1) == 1)
    assert np.all(g.edges[g.n_internal:, 1] == g.ghost)
    assert g.coupling_deviation() == 0.0
