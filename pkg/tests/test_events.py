from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingghost.events import (
    bfs_labels,
    config_from_text,
    config_to_text,
    coupled_loop_events,
    disjoint_crossed_rectangles,
    dual_circuit_reference,
    event_E,
    event_E_all,
    event_H,
    has_crossing,
    has_dual_circuit,
    label_clusters,
    verify_rectangles,
)
from isingghost.lattice import WIRED, Rect, RectFrame, build_domain_graph, row_of_frames
from isingghost.samplers import RngStream, fk_chain

FIXTURES = Path(__file__).parent / "fixtures"
FRAME = RectFrame()


def frame_graph(a, h=0.1):
    return build_domain_graph((0, 10, 0, 3), a, h)


def load(name, g):
    return config_from_text((FIXTURES / name).read_text(), g)


@pytest.fixture
def h_fixture():
    g = frame_graph(0.5)
    return g, load("h_frame.edges", g)


def test_all_closed_gives_singletons():
    g = build_domain_graph((0, 3, 0, 3), 1.0, 0.1)
    lab = label_clusters(np.zeros(g.n_edges, bool), g)
    assert lab.n_clusters == g.n_vertices


def test_all_open_internal_is_one_cluster():
    g = build_domain_graph((0, 3, 0, 3), 1.0, 0.1)
    omega = np.zeros(g.n_edges, bool)
    omega[: g.n_internal] = True
    lab = label_clusters(omega, g, internal_only=True)
    assert lab.n_clusters == 1
    assert lab.labels[g.ghost] == -1


@given(st.integers(0, 2**31 - 1), st.floats(0.1, 0.9), st.booleans(), st.booleans())
@settings(max_examples=80, deadline=None)
def test_labels_match_bfs(seed, p, internal, region):
    g = build_domain_graph((0, 3, 0, 3), 1.0, 0.2)
    omega = np.random.default_rng(seed).random(g.n_edges) < p
    reg = Rect(0, 2, 1, 3) if region else None
    assert np.array_equal(label_clusters(omega, g, internal, reg).labels,
                          bfs_labels(omega, g, internal, reg))


def test_crossing_trivial_cases():
    g = frame_graph(1.0)
    assert has_crossing(np.ones(g.n_edges, bool), g, FRAME.S, "LR")
    assert not has_crossing(np.zeros(g.n_edges, bool), g, FRAME.S, "LR")


def test_staircase_crossing_and_cut():
    g = frame_graph(1.0)
    omega = load("staircase.edges", g)
    assert has_crossing(omega, g, FRAME.S, "long")
    middle = g.edge_between(g.vertex_at((5, 2)), g.vertex_at((6, 2)))
    omega[middle] = False
    assert not has_crossing(omega, g, FRAME.S, "long")


def test_dual_circuit_trivial_cases():
    g = frame_graph(0.5)
    assert has_dual_circuit(np.zeros(g.n_edges, bool), g, FRAME)
    assert not has_dual_circuit(np.ones(g.n_edges, bool), g, FRAME)


def test_single_radial_path():
    g = frame_graph(1.0)
    omega = np.zeros(g.n_edges, bool)
    e = g.edge_between(g.vertex_at((5, 2)), g.vertex_at((5, 3)))
    omega[e] = True
    assert not has_dual_circuit(omega, g, FRAME)
    assert not dual_circuit_reference(omega, g, FRAME)
    omega[e] = False
    assert has_dual_circuit(omega, g, FRAME)
    assert dual_circuit_reference(omega, g, FRAME)


@pytest.mark.parametrize("a", [1.0, 0.5])
def test_duality_agrees_with_dual_search(a):
    g = frame_graph(a)
    rng = np.random.default_rng(int(a * 8))
    hits = 0
    for p in np.linspace(0.02, 0.6, 2000):
        omega = rng.random(g.n_edges) < p
        want = dual_circuit_reference(omega, g, FRAME)
        assert has_dual_circuit(omega, g, FRAME) == want
        hits += want
    assert 50 < hits < 1950


@pytest.mark.parametrize("k", [1, 2, 3])
def test_duality_on_rotated_frames(k):
    fr = RectFrame((20.0, 20.0), k)
    g = build_domain_graph(fr.T, 0.5, 0.1)
    rng = np.random.default_rng(k)
    for p in np.linspace(0.02, 0.5, 300):
        omega = rng.random(g.n_edges) < p
        assert has_dual_circuit(omega, g, fr) == dual_circuit_reference(omega, g, fr)


def test_h_fixture_satisfies_h(h_fixture):
    g, omega = h_fixture
    rep = event_H(omega, g, FRAME)
    assert rep.E1 and rep.E2 and rep.H
    assert rep.N == 21 and rep.N1 == 4 and rep.N8 == 4
    assert rep.N >= rep.N1 + rep.N8


def test_h_fails_without_external_edges(h_fixture):
    g, omega = h_fixture
    omega = omega.copy()
    omega[g.n_internal:] = False
    assert not event_H(omega, g, FRAME).H


def test_third_external_edge_breaks_h(h_fixture):
    g, omega = h_fixture
    omega = omega.copy()
    omega[g.external_edge(g.vertex_at((5.0, 1.5)))] = True
    rep = event_H(omega, g, FRAME)
    assert rep.E2 and not rep.H


def test_e_on_h_fixture(h_fixture):
    g, omega = h_fixture
    assert event_E(omega, g, FRAME)
    assert event_E_all(omega, g, [FRAME])[0]


def test_e_needs_ghost_on_both_sides(h_fixture):
    g, omega = h_fixture
    no_ext = omega.copy()
    no_ext[g.n_internal:] = False
    assert not event_E(no_ext, g, FRAME)
    one_side = no_ext.copy()
    one_side[g.external_edge(g.vertex_at((1.0, 1.5)))] = True
    one_side[g.external_edge(g.vertex_at((0.5, 1.5)))] = True
    one_side[g.edge_between(g.vertex_at((0.5, 1.5)), g.vertex_at((1.0, 1.5)))] = True
    assert not event_E(one_side, g, FRAME)
    assert not event_E_all(one_side, g, [FRAME])[0]


def test_fixture_text_round_trip(h_fixture):
    g, omega = h_fixture
    assert np.array_equal(config_from_text(config_to_text(omega, g), g), omega)
    with pytest.raises(ValueError):
        config_from_text("1 2 3\n", g)


def test_h_implies_e1_and_e2_on_samples():
    g = frame_graph(0.5, h=2.0)
    it = fk_chain(g, WIRED, RngStream(3), cluster_moves=True)
    for _ in range(300):
        omega = next(it)
        rep = event_H(omega, g, FRAME)
        if rep.H:
            assert rep.E1 and rep.E2
        if not rep.E2:
            assert rep.N == rep.N1 == rep.N8 == 0


@given(st.integers(0, 2**31 - 1), st.floats(0.2, 0.9))
@settings(max_examples=60, deadline=None)
def test_event_e_all_matches_single(seed, p):
    frames = row_of_frames(3)
    g = build_domain_graph((-1, 35, -1, 4), 1.0, 0.1)
    trace = np.random.default_rng(seed).random(g.n_edges) < p
    assert list(event_E_all(trace, g, frames)) == [event_E(trace, g, f) for f in frames]


def _planted(n, a, seed):
    """Configuration with H planted in every frame of a row plus random noise."""
    frames = row_of_frames(n)
    g = build_domain_graph((-1, 12 * (n - 1) + 11, -1, 4), a, 0.1)
    rng = np.random.default_rng(seed)
    omega = np.zeros(g.n_edges, bool)
    inside = np.zeros(g.n_vertices, bool)
    for fr in frames:
        inside[fr.S.vertices_in(g)] = True
    u, v = g.edges[: g.n_internal].T
    noise = rng.random(g.n_internal) < 0.5
    omega[: g.n_internal] = noise & inside[u] & inside[v]
    for fr in frames:
        x0 = fr.S.x0
        for k in range(int(round(8 / a))):
            p, q = (x0 + k * a, 1.0), (x0 + (k + 1) * a, 1.0)
            omega[g.edge_between(g.vertex_at(p), g.vertex_at(q))] = True
        for x in (x0, x0 + 8):
            col = [g.vertex_at((x, 1 + j * a)) for j in range(int(round(1 / a)) + 1)]
            for p, q in zip(col, col[1:]):
                omega[g.edge_between(p, q)] = True
        omega[g.external_edge(g.vertex_at((x0, 1.0)))] = True
        omega[g.external_edge(g.vertex_at((x0 + 8, 1.0)))] = True
    return g, frames, omega


@pytest.mark.parametrize("a", [1.0, 0.5])
def test_coupled_harness_h_and_coin_give_e(a):
    seen = 0
    for seed in range(40):
        g, frames, omega = _planted(3, a, seed)
        out = coupled_loop_events(omega, g, frames, RngStream(seed))
        assert out["h"] == [0, 1, 2]
        assert all(out["cycle_is_loop"])
        F, T = out["loops"], out["trace"]
        assert not np.any(F & ~T)
        for i, coin in zip(out["h"], out["coins"]):
            if coin:
                seen += 1
                assert event_E(F, g, frames[i])
                assert event_E(T, g, frames[i])
    assert seen > 20


def test_rectangles_on_straight_path():
    path = [(x, 0) for x in range(-50, 51)]
    rects = disjoint_crossed_rectangles(path, 3, 100)
    assert len(rects) >= 100 // 18
    assert verify_rectangles(path, 3, 100, rects) == []


def test_short_path_may_return_nothing():
    path = [(x, 0) for x in range(0, 5)]
    rects = disjoint_crossed_rectangles(path, 1, 20)
    assert verify_rectangles(path, 1, 20, rects) == []


def test_path_outside_box_rejected():
    with pytest.raises(ValueError):
        disjoint_crossed_rectangles([(x, 0) for x in range(30)], 3, 30)
    with pytest.raises(ValueError):
        disjoint_crossed_rectangles([(0, 0), (2, 0)], 1, 30)


def random_path(rng, L, N):
    steps = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    target = rng.uniform(6 * L, 60 * L)
    drift = steps[rng.integers(4)] + steps[rng.integers(4)]
    start = rng.integers(-N // 3, N // 3 + 1, size=2)
    P = [start]
    while np.hypot(*(P[-1] - start)) < target:
        if rng.random() < 0.45:
            k = int(np.argmax(np.abs(drift))) * 2 + (0 if drift[np.argmax(np.abs(drift))] > 0 else 1)
            nxt = P[-1] + steps[k if k < 4 else 0]
        else:
            nxt = P[-1] + steps[rng.integers(4)]
        if np.abs(nxt).max() > N - 2 * L:
            continue
        P.append(nxt)
        if len(P) > 40000:
            break
    return np.array(P)


@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
@settings(max_examples=150, deadline=None)
def test_rectangles_property(seed, L):
    rng = np.random.default_rng(seed)
    N = 80 * L
    path = random_path(rng, L, N)
    rects = disjoint_crossed_rectangles(path, L, N)
    assert verify_rectangles(path, L, N, rects) == []


def test_verifier_catches_bad_rectangles():
    path = [(x, 0) for x in range(-30, 31)]
    good = disjoint_crossed_rectangles(path, 2, 60)
    assert verify_rectangles(path, 2, 60, good) == []
    assert any("closer than 2L" in p for p in verify_rectangles(path, 2, 60, good + [good[0]]))
    assert any("not crossed" in p for p in verify_rectangles(path, 2, 60, [Rect(0, 2, 5, 9)]))
    assert any("count" in p for p in verify_rectangles(path, 2, 60, good[:1]))
    assert any("boundary" in p for p in verify_rectangles(path, 2, 60, [Rect(57, 59, -2, 2)]))
