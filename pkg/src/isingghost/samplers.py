"""
Markov chain samplers for the spin, random-cluster, loop O(1) and
sourceless-current representations.

The random-cluster sampler is the Edwards-Sokal composite chain: a heat-bath
sweep of the spins followed by independent bonds between agreeing spins
(the ghost spin is ``+1``). Optionally a cluster resampling of the spins
given the bonds (Swendsen-Wang) is inserted after each bond draw; both moves
leave the joint spin/bond measure invariant, the cluster move only speeds up
mixing near criticality. Wired boundary conditions are realised by pinning
the boundary spins to ``+1``.

The loop O(1) sample is the uniform even subgraph of a free random-cluster
sample; the sourceless current trace adds every absent edge independently
with probability ``1 - sech J_e``.

All randomness comes from :class:`RngStream` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from . import _kernels as K
from .lattice import FREE, WIRED, BoundaryCondition, GhostGraph

__all__ = [
    "RngStream",
    "ChainState",
    "default_burn_in",
    "init_chain",
    "spin_heatbath_sweep",
    "heatbath_plus_probability",
    "bonds_given_spins",
    "fk_chain",
    "sample_fk",
    "fk_bond_masks",
    "uniform_even_subgraph",
    "fundamental_cycles",
    "sech_augment",
    "current_trace_chain",
    "sample_current_trace",
    "current_trace_masks",
    "estimate_truncated_correlation",
    "write_bond_stream",
    "read_bond_stream",
]


class RngStream:
    """Seeded, splittable random stream.

    ``RngStream(seed, index)`` always produces the same sequence; streams
    with different indices (or children obtained from :meth:`split`) are
    statistically independent.
    """

    def __init__(self, seed: int, index=0):
        self.seed = int(seed)
        self.key = tuple(index) if isinstance(index, tuple) else (int(index),)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    @property
    def index(self):
        return self.key if len(self.key) > 1 else self.key[0]

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.key + (int(i),))

    def split(self, n: int) -> list["RngStream"]:
        return [self.child(i) for i in range(n)]

    def random(self, size=None):
        return self.generator.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, index={self.index!r})"


def _as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected an RngStream or integer seed, got {type(rng).__name__}")


# ---------------------------------------------------------------------------
# per-graph kernel arrays


@dataclass(frozen=True)
class _Arrays:
    ptr: np.ndarray
    nbr: np.ndarray
    nbr_J: np.ndarray
    ext_J: np.ndarray
    eu: np.ndarray
    ev: np.ndarray
    p_open: np.ndarray
    q_sech: np.ndarray
    adj_ptr: np.ndarray
    adj_v: np.ndarray
    adj_e: np.ndarray


def _csr(n, src, dst, eid):
    order = np.lexsort((eid, src))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=ptr[1:])
    return ptr, np.ascontiguousarray(dst[order]), np.ascontiguousarray(eid[order])


def _arrays(g: GhostGraph) -> _Arrays:
    cached = g.__dict__.get("_sampler_arrays")
    if cached is not None:
        return cached
    n, m, k = g.n_sites, g.n_edges, g.n_internal
    eu = np.ascontiguousarray(g.edges[:, 0], dtype=np.int64)
    ev = np.ascontiguousarray(g.edges[:, 1], dtype=np.int64)
    J = np.asarray(g.couplings, dtype=float)
    ids = np.arange(k, dtype=np.int64)
    ptr, nbr, eid = _csr(n, np.concatenate([eu[:k], ev[:k]]), np.concatenate([ev[:k], eu[:k]]),
                         np.concatenate([ids, ids]))
    all_ids = np.arange(m, dtype=np.int64)
    adj_ptr, adj_v, adj_e = _csr(n + 1, np.concatenate([eu, ev]), np.concatenate([ev, eu]),
                                 np.concatenate([all_ids, all_ids]))
    arr = _Arrays(ptr, nbr, np.ascontiguousarray(J[eid]), np.ascontiguousarray(J[k:]), eu, ev,
                  -np.expm1(-2.0 * J), 1.0 - 1.0 / np.cosh(J), adj_ptr, adj_v, adj_e)
    g.__dict__["_sampler_arrays"] = arr
    return arr


def _pinned(g: GhostGraph, xi: BoundaryCondition) -> np.ndarray:
    pinned = np.zeros(g.n_sites, dtype=np.bool_)
    if xi.kind == "wired":
        pinned[g.boundary] = True
    elif xi.kind != "free":
        raise ValueError("only FREE and WIRED boundary conditions can be sampled")
    return pinned


def default_burn_in(g: GhostGraph) -> int:
    """Ten sweeps per site along the longer side of the graph."""
    ext = g.sites.max(axis=0) - g.sites.min(axis=0) + 1
    return int(10 * ext.max())


# ---------------------------------------------------------------------------
# spins


@dataclass
class ChainState:
    """Spin configuration of a chain with its bookkeeping."""

    spins: np.ndarray
    sweeps: int = 0
    flips: int = 0
    updates: int = 0

    @property
    def flip_rate(self) -> float:
        return self.flips / self.updates if self.updates else 0.0


def init_chain(g: GhostGraph, rng, xi: BoundaryCondition = FREE, start: str = "random") -> ChainState:
    """Initial state: independent fair spins (``"random"``) or all ``+1``."""
    rng = _as_stream(rng)
    if start == "random":
        spins = np.where(rng.random(g.n_sites) < 0.5, 1, -1).astype(np.int8)
    elif start == "plus":
        spins = np.ones(g.n_sites, dtype=np.int8)
    else:
        raise ValueError(f"unknown start {start!r}")
    spins[_pinned(g, xi)] = 1
    return ChainState(spins)


def spin_heatbath_sweep(state: ChainState, g: GhostGraph, rng, xi: BoundaryCondition = FREE) -> ChainState:
    """One sweep of heat-bath updates in vertex order.

    Site ``x`` becomes ``+1`` with probability
    ``1 / (1 + exp(-2 (sum_y J_xy s_y + J_xg)))``; pinned (wired boundary)
    sites stay ``+1``.
    """
    rng = _as_stream(rng)
    arr = _arrays(g)
    pinned = _pinned(g, xi)
    spins = state.spins.astype(np.int8, copy=True)
    spins[pinned] = 1
    flips = K.heatbath_sweep(spins, arr.ptr, arr.nbr, arr.nbr_J, arr.ext_J, pinned,
                             rng.random(g.n_sites))
    return ChainState(spins, state.sweeps + 1, state.flips + int(flips),
                      state.updates + int(g.n_sites - pinned.sum()))


def heatbath_plus_probability(spins, g: GhostGraph, x: int) -> float:
    """Probability that a heat-bath update of site ``x`` sets it to ``+1``."""
    a = _arrays(g)
    f = a.ext_J[x] + float(np.dot(a.nbr_J[a.ptr[x]:a.ptr[x + 1]],
                                  np.asarray(spins)[a.nbr[a.ptr[x]:a.ptr[x + 1]]]))
    return 1.0 / (1.0 + math.exp(-2.0 * f))


def bonds_given_spins(spins, g: GhostGraph, rng) -> np.ndarray:
    """Open each edge with agreeing endpoints with probability ``1 - exp(-2 J_e)``."""
    rng = _as_stream(rng)
    arr = _arrays(g)
    out = np.empty(g.n_edges, dtype=np.bool_)
    K.bonds_from_spins(np.asarray(spins, dtype=np.int8), arr.eu, arr.ev, arr.p_open, g.ghost,
                       rng.random(g.n_edges), out)
    return out


class _Chain:
    """In-place composite chain used by the iterators and experiments."""

    def __init__(self, g, xi, rng, cluster_moves=False, start="random"):
        self.g = g
        self.rng = _as_stream(rng)
        self.arr = _arrays(g)
        self.pinned = _pinned(g, xi)
        self.cluster_moves = cluster_moves
        self.spins = init_chain(g, self.rng, xi, start).spins
        self.bonds = np.zeros(g.n_edges, dtype=np.bool_)
        self.sweeps = 0

    def step(self):
        a, g, r = self.arr, self.g, self.rng
        K.heatbath_sweep(self.spins, a.ptr, a.nbr, a.nbr_J, a.ext_J, self.pinned, r.random(g.n_sites))
        K.bonds_from_spins(self.spins, a.eu, a.ev, a.p_open, g.ghost, r.random(g.n_edges), self.bonds)
        if self.cluster_moves:
            K.cluster_spins(self.spins, a.eu, a.ev, self.bonds, g.ghost, self.pinned,
                            r.random(g.n_vertices))
        self.sweeps += 1
        return self.bonds

    def run(self, n):
        for _ in range(n):
            self.step()


def fk_chain(g: GhostGraph, xi: BoundaryCondition, rng, burn_in: int | None = None, thin: int = 1,
             cluster_moves: bool = False) -> Iterator[np.ndarray]:
    """Endless iterator of random-cluster configurations (boolean edge vectors).

    The yielded array is reused between iterations; copy it to keep it.
    """
    chain = _Chain(g, xi, rng, cluster_moves)
    chain.run(default_burn_in(g) if burn_in is None else burn_in)
    while True:
        chain.run(thin - 1)
        yield chain.step()


def sample_fk(g: GhostGraph, xi: BoundaryCondition, sweeps: int, rng,
              cluster_moves: bool = False) -> np.ndarray:
    """Bond configuration after ``sweeps`` composite sweeps from a random start."""
    if sweeps < default_burn_in(g):
        raise ValueError(f"{sweeps} sweeps is below the burn-in {default_burn_in(g)} for {g!r}")
    chain = _Chain(g, xi, rng, cluster_moves)
    chain.run(sweeps - 1)
    return chain.step().copy()


_BLOCK = 1 << 14


def _small_chain_masks(g, xi, n, rng, burn_in, mode):
    if g.n_edges > 62:
        raise ValueError("mask recording needs at most 62 edges")
    rng = _as_stream(rng)
    a = _arrays(g)
    pinned = _pinned(g, xi)
    spins = init_chain(g, rng, xi).spins
    burn = default_burn_in(g) if burn_in is None else burn_in
    outs_a, outs_b = [], []
    total = burn + n
    done = 0
    while done < total:
        steps = min(_BLOCK, total - done)
        u_spin = rng.random((steps, g.n_sites))
        u_bond = rng.random((steps, g.n_edges))
        if mode:
            u_ueg = rng.random((steps, g.n_edges))
            u_sech = rng.random((steps, g.n_edges))
        else:
            u_ueg = u_sech = np.empty((steps, 0))
        ra, rb = K.composite_block(spins, a.ptr, a.nbr, a.nbr_J, a.ext_J, pinned, a.eu, a.ev,
                                   a.p_open, a.q_sech, a.adj_ptr, a.adj_v, a.adj_e,
                                   u_spin, u_bond, u_ueg, u_sech, mode)
        keep = max(0, burn - done)
        outs_a.append(ra[keep:])
        outs_b.append(rb[keep:])
        done += steps
    return np.concatenate(outs_a), np.concatenate(outs_b)


def fk_bond_masks(g: GhostGraph, xi: BoundaryCondition, n: int, rng, burn_in: int | None = None) -> np.ndarray:
    """``n`` consecutive bond configurations of a small graph, as bit masks."""
    return _small_chain_masks(g, xi, n, rng, burn_in, 0)[0]


# ---------------------------------------------------------------------------
# uniform even subgraphs and current traces


def _forest_preferring(g, omega, prefer):
    """Spanning forest of ``omega`` containing the acyclic edge set ``prefer``."""
    parent = list(range(g.n_vertices))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    tree = np.zeros(g.n_edges, dtype=bool)
    order = [int(e) for e in prefer] + [e for e in range(g.n_edges) if e not in set(prefer)]
    for rank, e in enumerate(order):
        if not omega[e]:
            if rank < len(prefer):
                raise ValueError(f"preferred edge {e} is not open")
            continue
        u, v = (int(c) for c in g.edges[e])
        ru, rv = find(u), find(v)
        if ru == rv:
            if rank < len(prefer):
                raise ValueError("preferred edges contain a cycle")
            continue
        parent[max(ru, rv)] = min(ru, rv)
        tree[e] = True
    return tree


def fundamental_cycles(omega, g: GhostGraph, prefer=None):
    """Spanning forest of ``omega`` and the fundamental cycle of each other open edge.

    Returns ``(forest, cycles)`` with ``forest`` a boolean edge vector and
    ``cycles`` a dict mapping each open non-forest edge to the boolean edge
    vector of its cycle. With ``prefer`` the forest is grown from those
    edges first; otherwise it is the breadth-first forest used by
    :func:`uniform_even_subgraph`.
    """
    omega = np.asarray(omega, dtype=bool)
    if prefer is None:
        from .oracle import _spanning_forest
        tree = _spanning_forest(g.n_vertices, g.edges, omega)[0]
    else:
        tree = _forest_preferring(g, omega, list(prefer))
    adj = [[] for _ in range(g.n_vertices)]
    for e in np.flatnonzero(tree):
        u, v = (int(c) for c in g.edges[e])
        adj[u].append((v, e))
        adj[v].append((u, e))
    cycles = {}
    for e in np.flatnonzero(omega & ~tree):
        u, v = (int(c) for c in g.edges[e])
        # path u -> v inside the forest
        prev = {u: None}
        stack = [u]
        while stack:
            w = stack.pop()
            if w == v:
                break
            for x, f in adj[w]:
                if x not in prev:
                    prev[x] = (w, f)
                    stack.append(x)
        cyc = np.zeros(g.n_edges, dtype=bool)
        cyc[e] = True
        w = v
        while prev[w] is not None:
            w, f = prev[w]
            cyc[f] = True
        cycles[int(e)] = cyc
    return tree, cycles


def uniform_even_subgraph(omega, g: GhostGraph, rng, prefer=None) -> np.ndarray:
    """Uniformly random even subgraph of the open edges of ``omega``.

    Symmetric difference of the fundamental cycles of a spanning forest of
    ``omega``, each kept on an independent fair coin. Coin ``b_e`` is
    ``u[e] < 1/2`` for a single uniform vector ``u`` drawn from ``rng``.
    """
    rng = _as_stream(rng)
    omega = np.asarray(omega, dtype=np.bool_)
    u = rng.random(g.n_edges)
    if prefer is not None:
        _, cycles = fundamental_cycles(omega, g, prefer)
        out = np.zeros(g.n_edges, dtype=bool)
        for e, cyc in cycles.items():
            if u[e] < 0.5:
                out ^= cyc
        return out
    a = _arrays(g)
    out = np.empty(g.n_edges, dtype=np.bool_)
    K.uniform_even(g.n_vertices, a.adj_ptr, a.adj_v, a.adj_e, a.eu, a.ev, omega, u, out)
    return out


def sech_augment(F, g: GhostGraph, rng) -> np.ndarray:
    """Add each edge outside ``F`` independently with probability ``1 - sech J_e``."""
    rng = _as_stream(rng)
    return np.asarray(F, dtype=bool) | (rng.random(g.n_edges) < _arrays(g).q_sech)


def current_trace_chain(g: GhostGraph, rng, burn_in: int | None = None, thin: int = 1,
                        cluster_moves: bool = False) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Endless iterator of ``(loops, trace)`` pairs with ``loops ⊆ trace``."""
    rng = _as_stream(rng)
    chain = _Chain(g, FREE, rng.child(0), cluster_moves)
    chain.run(default_burn_in(g) if burn_in is None else burn_in)
    aux = rng.child(1)
    while True:
        chain.run(thin - 1)
        F = uniform_even_subgraph(chain.step(), g, aux)
        yield F, sech_augment(F, g, aux)


def sample_current_trace(g: GhostGraph, sweeps: int, rng, cluster_moves: bool = False,
                         return_loops: bool = False):
    """Open-edge trace distributed as the sourceless random current (after mixing)."""
    rng = _as_stream(rng)
    omega = sample_fk(g, FREE, sweeps, rng.child(0), cluster_moves)
    F = uniform_even_subgraph(omega, g, rng.child(1))
    trace = sech_augment(F, g, rng.child(1))
    return (F, trace) if return_loops else trace


def current_trace_masks(g: GhostGraph, n: int, rng, burn_in: int | None = None):
    """``n`` consecutive ``(loops, trace)`` samples of a small graph, as bit masks."""
    return _small_chain_masks(g, FREE, n, rng, burn_in, 1)


# ---------------------------------------------------------------------------
# correlations


def estimate_truncated_correlation(g: GhostGraph, x: int, y: int, chains: int, sweeps: int, rng,
                                   burn_in: int | None = None, batches: int = 10):
    """Monte Carlo covariance ``<s_x s_y> - <s_x><s_y>`` with a batch-means error.

    Runs ``chains`` independent heat-bath chains of ``sweeps`` recorded sweeps
    each; every chain is cut into ``batches`` batches and the standard error
    is the spread of the per-batch covariances.

    Returns
    -------
    (estimate, standard_error)
    """
    if chains < 2:
        raise ValueError("need at least two chains")
    if sweeps <= 0 or batches <= 0 or sweeps < batches:
        raise ValueError("sweep budget must be positive and at least the batch count")
    rng = _as_stream(rng)
    a = _arrays(g)
    burn = default_burn_in(g) if burn_in is None else burn_in
    pinned = np.zeros(g.n_sites, dtype=np.bool_)
    xs = np.array([x], dtype=np.int64)
    ys = np.array([y], dtype=np.int64)
    batch_cov, all_x, all_y = [], [], []
    for s in rng.split(chains):
        spins = init_chain(g, s).spins
        done = 0
        rec_x, rec_y = [], []
        while done < burn + sweeps:
            steps = min(_BLOCK, burn + sweeps - done)
            sx, sy = K.spin_pair_block(spins, a.ptr, a.nbr, a.nbr_J, a.ext_J, pinned,
                                       s.random((steps, g.n_sites)), xs, ys)
            keep = max(0, burn - done)
            rec_x.append(sx[keep:, 0])
            rec_y.append(sy[keep:, 0])
            done += steps
        cx = np.concatenate(rec_x).astype(float)
        cy = np.concatenate(rec_y).astype(float)
        all_x.append(cx)
        all_y.append(cy)
        for bx, by in zip(np.array_split(cx, batches), np.array_split(cy, batches)):
            batch_cov.append(np.mean(bx * by) - bx.mean() * by.mean())
    cx = np.concatenate(all_x)
    cy = np.concatenate(all_y)
    est = float(np.mean(cx * cy) - cx.mean() * cy.mean())
    se = float(np.std(batch_cov, ddof=1) / math.sqrt(len(batch_cov)))
    return est, se


# ---------------------------------------------------------------------------
# bond dumps

_MAGIC = b"ISINGGHOST-BONDS v1\n"


def write_bond_stream(path, configs, *, graph_hash: str, seed: int, sweep_indices) -> None:
    """Bit-packed bond configurations with a self-describing JSON header.

    Layout: magic line, one JSON header line, then per record an unsigned
    64-bit little-endian sweep index followed by ``ceil(m / 8)`` packed bytes.
    """
    import json

    configs = np.asarray(configs, dtype=bool)
    if configs.ndim != 2:
        raise ValueError("configs must be a 2-d boolean array")
    sweep_indices = np.asarray(sweep_indices, dtype="<u8")
    if len(sweep_indices) != len(configs):
        raise ValueError("one sweep index per configuration")
    header = {"graph_hash": graph_hash, "seed": int(seed), "n_edges": int(configs.shape[1]),
              "n_records": int(len(configs)), "bit_order": "little"}
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        packed = np.packbits(configs, axis=1, bitorder="little")
        for idx, row in zip(sweep_indices, packed):
            fh.write(idx.tobytes())
            fh.write(row.tobytes())


def read_bond_stream(path):
    """Inverse of :func:`write_bond_stream`; returns ``(header, sweep_indices, configs)``."""
    import json

    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path} is not a bond stream")
        header = json.loads(fh.readline())
        body = fh.read()
    m = header["n_edges"]
    nbytes = (m + 7) // 8
    rec = np.frombuffer(body, dtype=np.uint8).reshape(header["n_records"], 8 + nbytes)
    idx = rec[:, :8].copy().view("<u8").ravel()
    configs = np.unpackbits(rec[:, 8:], axis=1, bitorder="little", count=m).astype(bool)
    return header, idx, configs
