"""
Exact laws of the spin, random-cluster, loop O(1) and random-current
representations on small ghost graphs, by complete enumeration.

Edge configurations are encoded as integer bit masks (bit ``e`` set when
edge ``e`` is open). Dense laws are numpy vectors indexed by mask. Every
routine refuses graphs above its enumeration cap instead of truncating.

The open-edge trace of a random current is computed from parities only: the
sum of ``J**n / n!`` over odd ``n >= 1`` is ``sinh J`` and over even
``n >= 2`` is ``cosh J - 1``, so the weight of a trace ``tau`` with sources
``A`` is the sum over parity vectors ``p ⊆ tau`` with ``∂p = A`` of
``prod_{p} sinh J_e * prod_{tau \\ p} (cosh J_e - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import _kernels as K
from .lattice import FREE, WIRED, BoundaryCondition, GhostGraph, quotient_by_boundary

__all__ = [
    "Caps",
    "CapacityError",
    "ZeroMeasureError",
    "IDENTITIES",
    "ising_correlation",
    "truncated_correlation_exact",
    "spin_moments",
    "rc_law",
    "rc_event_probability",
    "cycle_basis",
    "loop_law",
    "loop_event_probability",
    "current_trace_law",
    "current_trace_law_factorial",
    "current_trace_probability",
    "double_current_disconnection",
    "ueg_mixture_law",
    "sech_augmented_law",
    "verify_identity",
    "masks_to_bool",
    "CORPUS_SHAPES",
    "corpus",
]


class CapacityError(RuntimeError):
    """Graph too large for exact enumeration."""


class ZeroMeasureError(ValueError):
    """The requested current measure has no configuration of positive weight."""


@dataclass(frozen=True)
class Caps:
    spins: int = 16
    edges: int = 24
    cycles: int = 20


DEFAULT_CAPS = Caps()

IDENTITIES = ("ES", "SWITCHING", "UEG", "SECH", "GHS-MONOTONE", "FINITE-ENERGY")


def _caps(caps):
    return DEFAULT_CAPS if caps is None else caps


def _check_edges(g: GhostGraph, caps):
    cap = _caps(caps).edges
    if g.n_edges > cap:
        raise CapacityError(f"{g!r} has {g.n_edges} edges, above the enumeration cap {cap}")


def _check_spins(g: GhostGraph, caps):
    cap = _caps(caps).spins
    if g.n_sites > cap:
        raise CapacityError(f"{g!r} has {g.n_sites} sites, above the enumeration cap {cap}")


def masks_to_bool(masks, m: int) -> np.ndarray:
    """Expand integer masks into boolean edge vectors (last axis = edges)."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[..., None] >> np.arange(m)) & 1).astype(bool)


def _bool_to_mask(omega) -> int:
    return int(np.dot(np.asarray(omega, dtype=np.int64), 1 << np.arange(len(omega), dtype=np.int64)))


def _edge_arrays(g):
    return np.ascontiguousarray(g.edges[:, 0]), np.ascontiguousarray(g.edges[:, 1])


def _kron_weights(w0, w1) -> np.ndarray:
    """Dense product weights: factor ``w1[e]`` if bit ``e`` set, else ``w0[e]``."""
    w = np.ones(1)
    for a, b in zip(w0, w1):
        w = np.concatenate([w * a, w * b])
    return w


def _split(arr, e):
    """View of ``arr`` as (rest-high, bit e, rest-low)."""
    return arr.reshape(-1, 2, 1 << e)


def _vertex_parity(g) -> np.ndarray:
    """Odd-degree vertex bit mask of every edge subset."""
    par = np.zeros(1 << g.n_edges, dtype=np.int64)
    for e, (u, v) in enumerate(g.edges):
        view = _split(par, e)
        view[:, 1, :] ^= (1 << int(u)) | (1 << int(v))
    return par


def _event_vector(event, m, support=None) -> np.ndarray:
    """Evaluate an event on every mask (or accept a precomputed vector)."""
    if isinstance(event, np.ndarray) and event.dtype == bool and event.shape == (1 << m,):
        return event
    out = np.zeros(1 << m, dtype=bool)
    masks = range(1 << m) if support is None else support
    for mask in masks:
        out[mask] = bool(event(masks_to_bool(mask, m)))
    return out


# ---------------------------------------------------------------------------
# spins


def _spin_states(n):
    states = np.arange(1 << n, dtype=np.int64)
    return (((states[:, None] >> np.arange(n)) & 1) * 2 - 1).astype(np.int8)


def _spin_law(g: GhostGraph, caps=None):
    _check_spins(g, caps)
    s = _spin_states(g.n_sites).astype(float)
    full = np.concatenate([s, np.ones((len(s), 1))], axis=1)
    u, v = _edge_arrays(g)
    energy = (full[:, u] * full[:, v]) @ g.couplings
    w = np.exp(energy - energy.max())
    return s, w / w.sum()


def ising_correlation(g: GhostGraph, A: Iterable[int], caps=None) -> float:
    """``<prod_{x in A} sigma_x>`` under the free-boundary Ising measure.

    The ghost (index ``g.ghost``) may appear in ``A``; its spin is ``+1``.
    """
    A = [int(x) for x in A if int(x) != g.ghost]
    s, p = _spin_law(g, caps)
    if not A:
        return 1.0
    return float(np.prod(s[:, A], axis=1) @ p)


def spin_moments(g: GhostGraph, caps=None):
    """Magnetisations and pair correlation matrix of the sites."""
    s, p = _spin_law(g, caps)
    m = p @ s
    corr = (s * p[:, None]).T @ s
    return m, corr


def truncated_correlation_exact(g: GhostGraph, x: int, y: int, caps=None) -> float:
    """Covariance ``<s_x s_y> - <s_x><s_y>``."""
    s, p = _spin_law(g, caps)
    sx = np.ones(len(s)) if x == g.ghost else s[:, x]
    sy = np.ones(len(s)) if y == g.ghost else s[:, y]
    return float((sx * sy) @ p - (sx @ p) * (sy @ p))


# ---------------------------------------------------------------------------
# random-cluster model


def _cluster_counts(n_vertices, edges) -> np.ndarray:
    labels = K.all_labels(n_vertices, np.ascontiguousarray(edges[:, 0]),
                          np.ascontiguousarray(edges[:, 1]))
    return (labels == np.arange(n_vertices, dtype=np.int8)).sum(axis=1)


def _labels(g):
    u, v = _edge_arrays(g)
    return K.all_labels(g.n_vertices, u, v)


def _rc_weights(g: GhostGraph, xi: BoundaryCondition, caps=None) -> np.ndarray:
    _check_edges(g, caps)
    q = quotient_by_boundary(g, xi)
    kappa = _cluster_counts(q.n_vertices, q.edges)
    p = -np.expm1(-2.0 * g.couplings)
    return _kron_weights(1.0 - p, p) * np.exp2(kappa)


def rc_law(g: GhostGraph, xi: BoundaryCondition = FREE, caps=None) -> np.ndarray:
    """Dense random-cluster law ``phi^xi`` (cluster weight 2) on all edges."""
    w = _rc_weights(g, xi, caps)
    return w / w.sum()


def rc_event_probability(g: GhostGraph, xi: BoundaryCondition, event, caps=None) -> float:
    """Probability of ``event`` under ``phi^xi``.

    ``event`` is a predicate on boolean edge vectors or a boolean vector
    indexed by mask.
    """
    law = rc_law(g, xi, caps)
    ev = _event_vector(event, g.n_edges, np.flatnonzero(law))
    return float(law[ev].sum())


# ---------------------------------------------------------------------------
# loop O(1)


def _spanning_forest(n_vertices, edges, allowed):
    """BFS forest over ``allowed`` edges; returns (tree mask, parent edge, order)."""
    adj = [[] for _ in range(n_vertices)]
    for e, (u, v) in enumerate(edges):
        if allowed[e]:
            adj[u].append((v, e))
            adj[v].append((u, e))
    seen = [False] * n_vertices
    parent = [-1] * n_vertices
    order = []
    tree = np.zeros(len(edges), dtype=bool)
    for root in range(n_vertices):
        if seen[root]:
            continue
        seen[root] = True
        queue = [root]
        order.append(root)
        while queue:
            nxt = []
            for v in queue:
                for w, e in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        parent[w] = e
                        tree[e] = True
                        order.append(w)
                        nxt.append(w)
            queue = nxt
    return tree, parent, order


def _tree_path_mask(edges, parent, depth, u, v) -> int:
    mask = 0
    while u != v:
        if depth[u] < depth[v]:
            u, v = v, u
        e = parent[u]
        mask ^= 1 << e
        a, b = edges[e]
        u = int(b) if int(a) == u else int(a)
    return mask


def cycle_basis(g: GhostGraph, omega=None) -> list[int]:
    """Fundamental cycles (as masks) of a BFS spanning forest of ``omega``.

    ``omega`` defaults to all edges.
    """
    m = g.n_edges
    allowed = np.ones(m, dtype=bool) if omega is None else np.asarray(omega, dtype=bool)
    tree, parent, order = _spanning_forest(g.n_vertices, g.edges, allowed)
    depth = [0] * g.n_vertices
    for v in order:
        if parent[v] >= 0:
            a, b = g.edges[parent[v]]
            depth[v] = depth[int(a) if int(b) == v else int(b)] + 1
    basis = []
    for e in range(m):
        if allowed[e] and not tree[e]:
            u, v = (int(c) for c in g.edges[e])
            basis.append((1 << e) ^ _tree_path_mask(g.edges, parent, depth, u, v))
    return basis


def _span(basis) -> np.ndarray:
    """All XOR combinations of the basis masks (Gray-code order)."""
    out = np.zeros(1 << len(basis), dtype=np.int64)
    cur = 0
    for i in range(1, 1 << len(basis)):
        bit = (i & -i).bit_length() - 1
        cur ^= basis[bit]
        out[i] = cur
    return out


def _mask_weights(masks, factors) -> np.ndarray:
    """``prod_{e in mask} factors[e]`` for each mask."""
    bits = masks_to_bool(masks, len(factors))
    return np.prod(np.where(bits, factors, 1.0), axis=1)


def loop_law(g: GhostGraph, caps=None):
    """Even subgraphs (masks) and their loop O(1) probabilities.

    Enumerates the cycle space through a fundamental-cycle basis; weights are
    ``prod_{e in F} tanh J_e``.
    """
    basis = cycle_basis(g)
    cap = _caps(caps).cycles
    if len(basis) > cap:
        raise CapacityError(f"{g!r} has cycle space dimension {len(basis)}, above the cap {cap}")
    masks = _span(basis)
    w = _mask_weights(masks, np.tanh(g.couplings))
    return masks, w / w.sum()


def loop_event_probability(g: GhostGraph, event, caps=None) -> float:
    masks, probs = loop_law(g, caps)
    if isinstance(event, np.ndarray) and event.dtype == bool:
        return float(probs[event[masks]].sum())
    hits = np.array([bool(event(masks_to_bool(mk, g.n_edges))) for mk in masks])
    return float(probs[hits].sum())


def _dense(g, masks, probs) -> np.ndarray:
    out = np.zeros(1 << g.n_edges)
    np.add.at(out, masks, probs)
    return out


# ---------------------------------------------------------------------------
# random currents


def _source_mask(g, A) -> int:
    A = [int(v) for v in A]
    if len(A) % 2:
        raise ValueError(f"source set {A} has odd size")
    if len(set(A)) != len(A):
        raise ValueError(f"source set {A} has repeated vertices")
    for v in A:
        if not 0 <= v < g.n_vertices:
            raise ValueError(f"source {v} is not a vertex")
    mask = 0
    for v in A:
        mask |= 1 << v
    return mask


def _particular_parity(g, A) -> int:
    """An edge mask whose odd-degree vertices are exactly ``A``."""
    allowed = np.ones(g.n_edges, dtype=bool)
    tree, parent, order = _spanning_forest(g.n_vertices, g.edges, allowed)
    odd = [False] * g.n_vertices
    for v in A:
        odd[int(v)] = True
    mask = 0
    for v in reversed(order):
        e = parent[v]
        if e < 0:
            if odd[v]:
                raise ZeroMeasureError(f"sources {sorted(A)} cannot be paired inside the graph")
            continue
        if odd[v]:
            mask ^= 1 << e
            a, b = g.edges[e]
            w = int(a) if int(b) == v else int(b)
            odd[v] = False
            odd[w] = not odd[w]
    return mask


def _zeta_weighted(arr, c) -> np.ndarray:
    """``W[tau] = sum_{p ⊆ tau} arr[p] prod_{tau \\ p} c_e``."""
    arr = arr.copy()
    for e, ce in enumerate(c):
        view = _split(arr, e)
        view[:, 1, :] += ce * view[:, 0, :]
    return arr


def current_trace_law(g: GhostGraph, A=(), caps=None) -> np.ndarray:
    """Dense law of the open-edge trace of the current with sources ``A``."""
    _check_edges(g, caps)
    _source_mask(g, A)
    p0 = _particular_parity(g, A)
    basis = cycle_basis(g)
    cap = _caps(caps).cycles
    if len(basis) > cap:
        raise CapacityError(f"{g!r} has cycle space dimension {len(basis)}, above the cap {cap}")
    parities = _span(basis) ^ p0
    weights = _mask_weights(parities, np.sinh(g.couplings))
    W = _zeta_weighted(_dense(g, parities, weights), np.cosh(g.couplings) - 1.0)
    Z = W.sum()
    if not Z > 0:
        raise ZeroMeasureError(f"no current with sources {sorted(A)} has positive weight")
    return W / Z


def _factorial_sums(J, n_max):
    even = np.zeros_like(J)
    odd = np.zeros_like(J)
    for k, j in enumerate(J):
        term = 1.0
        for n in range(1, n_max + 1):
            term = term * j / n
            if n % 2:
                odd[k] += term
            else:
                even[k] += term
    return even, odd


def current_trace_law_factorial(g: GhostGraph, A=(), n_max: int = 40, caps=None) -> np.ndarray:
    """Trace law from truncated factorial sums and a vertex-parity recursion.

    Independent of :func:`current_trace_law`: the per-edge weights are the
    explicit series ``sum_{n <= n_max} J**n / n!`` split by parity, and the
    source constraint is enforced by tracking the parity of every vertex.
    """
    _check_edges(g, caps)
    target = _source_mask(g, A)
    if g.n_vertices > 20:
        raise CapacityError(f"{g!r} has too many vertices for the parity recursion")
    even, odd = _factorial_sums(np.asarray(g.couplings, dtype=float), n_max)
    u, v = _edge_arrays(g)
    W = K.trace_weights_dp(g.n_vertices, u, v, even, odd, target)
    Z = W.sum()
    if not Z > 0:
        raise ZeroMeasureError(f"no current with sources {sorted(A)} has positive weight")
    return W / Z


def current_trace_probability(g: GhostGraph, A, event, caps=None) -> float:
    """Probability that the open-edge trace of ``P^A`` lies in ``event``."""
    law = current_trace_law(g, A, caps)
    ev = _event_vector(event, g.n_edges, np.flatnonzero(law))
    return float(law[ev].sum())


def _or_convolve(p1, p2, m) -> np.ndarray:
    """Law of the union of two independent random edge sets."""
    z1, z2 = p1.copy(), p2.copy()
    for e in range(m):
        _split(z1, e)[:, 1, :] += _split(z1, e)[:, 0, :]
        _split(z2, e)[:, 1, :] += _split(z2, e)[:, 0, :]
    f = z1 * z2
    for e in range(m):
        _split(f, e)[:, 1, :] -= _split(f, e)[:, 0, :]
    return f


def double_current_disconnection(g: GhostGraph, x: int, y: int, caps=None, _cache=None) -> float:
    """``P^{xy,∅}(x not connected to the ghost in n + m)``."""
    if x == y:
        raise ValueError("sources must be distinct")
    cache = {} if _cache is None else _cache
    p_xy = current_trace_law(g, (x, y), caps)
    if "empty" not in cache:
        cache["empty"] = current_trace_law(g, (), caps)
    if "labels" not in cache:
        cache["labels"] = _labels(g)
    union = _or_convolve(p_xy, cache["empty"], g.n_edges)
    labels = cache["labels"]
    apart = labels[:, x] != labels[:, g.ghost]
    return float(union[apart].sum())


# ---------------------------------------------------------------------------
# couplings between representations


def ueg_mixture_law(g: GhostGraph, caps=None) -> np.ndarray:
    """Law of a uniform even subgraph of ``omega ~ phi^0`` (dense, by mask).

    Each even ``F ⊆ omega`` receives ``2**-(|omega| - |V| + kappa(omega))``.
    """
    phi = rc_law(g, FREE, caps)
    labels = _labels(g)
    kappa = (labels == np.arange(g.n_vertices, dtype=np.int8)).sum(axis=1)
    size = np.array([bin(k).count("1") for k in range(1 << g.n_edges)])
    arr = phi * np.exp2(-(size - g.n_vertices + kappa).astype(float))
    for e in range(g.n_edges):
        _split(arr, e)[:, 0, :] += _split(arr, e)[:, 1, :]
    return np.where(_vertex_parity(g) == 0, arr, 0.0)


def sech_augmented_law(g: GhostGraph, loops: np.ndarray) -> np.ndarray:
    """Add every absent edge independently with probability ``1 - sech J_e``."""
    q = 1.0 - 1.0 / np.cosh(g.couplings)
    arr = loops.copy()
    for e, qe in enumerate(q):
        view = _split(arr, e)
        view[:, 1, :] += qe * view[:, 0, :]
        view[:, 0, :] *= 1.0 - qe
    return arr


def _pairs(g):
    n = g.n_sites
    return [(x, y) for x in range(n) for y in range(x + 1, n)]


def _es_deviation(g, caps):
    mag, corr = spin_moments(g, caps)
    phi = rc_law(g, FREE, caps)
    labels = _labels(g)
    worst = 0.0
    for x in range(g.n_sites):
        for y in range(x + 1, g.n_vertices):
            lhs = mag[x] if y == g.ghost else corr[x, y]
            rhs = phi[labels[:, x] == labels[:, y]].sum()
            worst = max(worst, abs(lhs - rhs))
    return worst


def _switching_deviation(g, caps):
    mag, corr = spin_moments(g, caps)
    cache = {}
    worst = 0.0
    for x, y in _pairs(g):
        try:
            dis = double_current_disconnection(g, x, y, caps, _cache=cache)
        except ZeroMeasureError:
            continue
        lhs = corr[x, y] - mag[x] * mag[y]
        worst = max(worst, abs(lhs - corr[x, y] * dis))
    return worst


def _tv(p, q):
    return 0.5 * float(np.abs(p - q).sum())


def _ueg_deviation(g, caps):
    masks, probs = loop_law(g, caps)
    return _tv(ueg_mixture_law(g, caps), _dense(g, masks, probs))


def _sech_deviation(g, caps):
    masks, probs = loop_law(g, caps)
    return _tv(sech_augmented_law(g, _dense(g, masks, probs)), current_trace_law(g, (), caps))


def _ghs_deviation(g, caps, h_grid=None):
    if h_grid is None:
        h_grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 10)
    prev = None
    worst = 0.0
    iu = np.triu_indices(g.n_sites, 1)
    for h in h_grid:
        mag, corr = spin_moments(g.with_field(float(h)), caps)
        cov = (corr - np.outer(mag, mag))[iu]
        if prev is not None and cov.size:
            worst = max(worst, float(np.max(cov - prev, initial=0.0)))
        prev = cov
    return worst


def _finite_energy_deviation(g, caps, conditions=(FREE, WIRED)):
    worst = 0.0
    for xi in conditions:
        w = _rc_weights(g, xi, caps)
        for v in range(g.n_sites):
            e = g.external_edge(v)
            p = -math.expm1(-2.0 * g.couplings[e])
            view = _split(w, e)
            closed, opened = view[:, 0, :], view[:, 1, :]
            tot = closed + opened
            cond = np.divide(opened, tot, out=np.zeros_like(tot), where=tot > 0)
            cond = cond[tot > 0]
            viol = np.maximum(np.maximum(p / 2 - cond, cond - p), 0.0)
            worst = max(worst, float(viol.max(initial=0.0)))
    return worst


def verify_identity(g: GhostGraph, which: str, caps=None) -> float:
    """Largest violation of one of the identities linking the representations.

    ``which`` is one of ``IDENTITIES``:

    ``ES``
        ``|<s_x s_y> - phi^0(x <-> y)|`` over all vertex pairs (ghost included).
    ``SWITCHING``
        ``|<s_x; s_y> - <s_x s_y> P^{xy,∅}(x not <-> ghost)|`` over site pairs.
    ``UEG``
        total variation between the uniform-even-subgraph mixture of
        ``phi^0`` and the loop O(1) law.
    ``SECH``
        total variation between the sech-augmented loop law and the
        sourceless current trace.
    ``GHS-MONOTONE``
        largest increase of any pair covariance along ``h = 0, 0.05, ..., 1``.
    ``FINITE-ENERGY``
        largest excursion of ``P(external edge open | rest)`` outside
        ``[p/2, p]``, ``p = 1 - exp(-2 J)``, for free and wired conditions.
    """
    fn = {
        "ES": _es_deviation,
        "SWITCHING": _switching_deviation,
        "UEG": _ueg_deviation,
        "SECH": _sech_deviation,
        "GHS-MONOTONE": _ghs_deviation,
        "FINITE-ENERGY": _finite_energy_deviation,
    }.get(which)
    if fn is None:
        raise ValueError(f"unknown identity {which!r}; expected one of {IDENTITIES}")
    return fn(g, caps)


# ---------------------------------------------------------------------------
# verification corpus

#: Site pictures (``#`` = site, top row first) of the default corpus shapes.
CORPUS_SHAPES = {
    "1x2": ["##"],
    "1x3": ["###"],
    "2x2": ["##", "##"],
    "2x3": ["###", "###"],
    "L": ["##", "###", "###"],
}


def corpus(shapes=None, a_values=(1.0, 0.5), h_values=(0.0, 0.1, 0.7)):
    """Yield ``(name, graph)`` for every shape, spacing and field."""
    from .lattice import build_graph, sites_from_rows

    shapes = CORPUS_SHAPES if shapes is None else shapes
    for name, rows in shapes.items():
        sites = sites_from_rows(rows)
        for a in a_values:
            for h in h_values:
                yield f"{name}/a={a:g}/h={h:g}", build_graph(sites, a, h)
