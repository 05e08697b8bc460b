import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingghost.lattice import BETA_C, FREE, WIRED, build_graph, sites_from_rows
from isingghost.oracle import (
    Caps,
    CapacityError,
    ZeroMeasureError,
    current_trace_law,
    current_trace_law_factorial,
    current_trace_probability,
    cycle_basis,
    double_current_disconnection,
    ising_correlation,
    loop_law,
    masks_to_bool,
    rc_event_probability,
    rc_law,
    truncated_correlation_exact,
    verify_identity,
)

# Values frozen from a direct sum over all spin configurations.
SQUARE_MAG = 0.5765879182458357  # <s_0>, 2x2 block, a=1, h=0.3
SQUARE_COV = 0.16705933239426402  # <s_0; s_3>, same graph
PAIR_COV_H1 = 0.047495034956806514  # <s_0; s_1>, 1x2, a=1, h=1


def spin_sums(g):
    """Plain loop over spin configurations, independent of the oracle code."""
    n = g.n_sites
    Z, m, c = 0.0, np.zeros(n), np.zeros((n, n))
    for s in itertools.product((-1, 1), repeat=n):
        s = np.array(s + (1,))
        w = math.exp(sum(J * s[u] * s[v] for (u, v), J in zip(g.edges, g.couplings)))
        Z += w
        m += w * s[:n]
        c += w * np.outer(s[:n], s[:n])
    return m / Z, c / Z


def square(h, a=1.0):
    return build_graph(sites_from_rows(["##", "##"]), a, h)


def pair(h, a=1.0):
    return build_graph(sites_from_rows(["##"]), a, h)


def test_frozen_square_values():
    g = square(0.3)
    assert ising_correlation(g, [0]) == pytest.approx(SQUARE_MAG, abs=1e-13)
    assert truncated_correlation_exact(g, 0, 3) == pytest.approx(SQUARE_COV, abs=1e-13)
    m, c = spin_sums(g)
    assert m[0] == pytest.approx(SQUARE_MAG, abs=1e-13)


def test_pair_field_one_switching_value():
    g = pair(1.0)
    cov = truncated_correlation_exact(g, 0, 1)
    assert cov == pytest.approx(PAIR_COV_H1, abs=1e-13)
    rhs = ising_correlation(g, [0, 1]) * double_current_disconnection(g, 0, 1)
    assert rhs == pytest.approx(cov, abs=1e-13)


def test_pair_zero_field_es_both_sides():
    g = pair(0.0)
    assert ising_correlation(g, [0, 1]) == pytest.approx(math.tanh(BETA_C), abs=1e-14)
    p = rc_event_probability(g, FREE, lambda w: w[0])
    assert p == pytest.approx(math.tanh(BETA_C), abs=1e-14)
    assert verify_identity(g, "ES") < 1e-15


def test_single_edge_with_both_endpoints_as_sources_is_open():
    g = pair(0.0)
    assert current_trace_probability(g, (0, 1), lambda w: w[0]) == pytest.approx(1.0, abs=1e-15)


def test_zero_field_isolates_ghost():
    g = square(0.0)
    assert double_current_disconnection(g, 0, 3) == pytest.approx(1.0, abs=1e-15)


def test_disconnected_sources_are_zero_measure():
    g = build_graph([(0, 0), (2, 0)], 1.0, 0.0)
    with pytest.raises(ZeroMeasureError):
        double_current_disconnection(g, 0, 1)


def test_bad_sources_rejected():
    g = square(0.2)
    with pytest.raises(ValueError):
        current_trace_law(g, (0,))
    with pytest.raises(ValueError):
        current_trace_law(g, (0, 0))


def test_capacity_errors():
    g = build_graph(sites_from_rows(["#####", "#####", "#####", "#####"]), 1.0, 0.1)
    with pytest.raises(CapacityError):
        ising_correlation(g, [0])
    with pytest.raises(CapacityError):
        rc_law(square(0.1), caps=Caps(edges=4))


def test_tree_has_trivial_ueg():
    g = build_graph(sites_from_rows(["###"]), 1.0, 0.0)
    masks, probs = loop_law(g)
    assert probs[masks == 0].sum() == pytest.approx(1.0, abs=1e-15)
    assert verify_identity(g, "UEG") < 1e-15


def test_triangle_trace_law_matches_factorial_brute_force():
    # 1x2 with the ghost is a triangle: sum over n_e <= 40 with even degrees
    g = pair(0.8)
    J = np.asarray(g.couplings)
    n = np.arange(41)
    logw = n[:, None] * np.log(J)[None, :] - np.array([math.lgamma(k + 1) for k in n])[:, None]
    law = np.zeros(8)
    for n0, n1, n2 in itertools.product(n, repeat=3):
        deg = [(n0 + n1) % 2, (n0 + n2) % 2, (n1 + n2) % 2]
        if any(deg):
            continue
        mask = (n0 > 0) | ((n1 > 0) << 1) | ((n2 > 0) << 2)
        law[mask] += math.exp(logw[n0, 0] + logw[n1, 1] + logw[n2, 2])
    law /= law.sum()
    assert np.max(np.abs(current_trace_law(g) - law)) < 1e-12
    assert np.max(np.abs(current_trace_law_factorial(g) - law)) < 1e-12


def test_cycle_basis_dimension():
    g = square(0.2)
    # 4 internal + 4 external edges on 5 vertices, one component
    assert len(cycle_basis(g)) == 8 - 5 + 1


def test_laws_are_normalised():
    g = build_graph(sites_from_rows(["##", "###"]), 0.5, 0.7)
    for law in (rc_law(g), rc_law(g, WIRED), current_trace_law(g), current_trace_law(g, (0, 4))):
        assert law.sum() == pytest.approx(1.0, abs=1e-12)
        assert law.min() >= 0


def test_wired_dominates_free_for_increasing_events():
    g = build_graph(sites_from_rows(["##", "##"]), 1.0, 0.1)
    free, wired = rc_law(g), rc_law(g, WIRED)
    m = g.n_edges
    ws = masks_to_bool(np.arange(1 << m), m)
    events = [ws[:, 0], ws[:, 0] & ws[:, 3], ws[:, : g.n_internal].sum(axis=1) >= 2,
              ws[:, g.n_internal:].any(axis=1)]
    for ev in events:
        assert wired[ev].sum() >= free[ev].sum() - 1e-12


def test_partition_probabilities_sum_to_one():
    g = square(0.4)
    k = masks_to_bool(np.arange(1 << g.n_edges), g.n_edges).sum(axis=1)
    law = rc_law(g)
    total = sum(law[k == j].sum() for j in range(g.n_edges + 1))
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("which", ["ES", "SWITCHING", "UEG", "SECH", "GHS-MONOTONE", "FINITE-ENERGY"])
def test_identities_on_square(which):
    tol = 1e-12 if which in ("GHS-MONOTONE", "FINITE-ENERGY") else 1e-10
    assert verify_identity(square(0.4), which) <= tol


def test_unknown_identity_rejected():
    with pytest.raises(ValueError):
        verify_identity(square(0.1), "NOPE")


connected_shapes = st.sampled_from([["##"], ["###"], ["##", "#."], ["##", "##"], ["###", "#.."], ["#.", "##", ".#"]])


@given(connected_shapes, st.sampled_from([1.0, 0.5, 0.25]), st.floats(0.0, 1.5))
@settings(max_examples=25, deadline=None)
def test_spin_oracle_matches_direct_sum(rows, a, h):
    g = build_graph(sites_from_rows(rows), a, h)
    m, c = spin_sums(g)
    for x in range(g.n_sites):
        assert ising_correlation(g, [x]) == pytest.approx(m[x], abs=1e-12)
        for y in range(x + 1, g.n_sites):
            assert ising_correlation(g, [x, y]) == pytest.approx(c[x, y], abs=1e-12)


@given(connected_shapes, st.sampled_from([1.0, 0.5]), st.floats(0.0, 1.0))
@settings(max_examples=20, deadline=None)
def test_identities_hold_on_random_small_graphs(rows, a, h):
    g = build_graph(sites_from_rows(rows), a, h)
    for which in ("ES", "SWITCHING", "UEG", "SECH"):
        assert verify_identity(g, which) <= 1e-10
    assert np.max(np.abs(current_trace_law(g) - current_trace_law_factorial(g))) <= 1e-12
