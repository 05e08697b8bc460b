"""Compiled inner loops. All randomness enters as pre-drawn uniform arrays."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, v):
    while parent[v] != v:
        parent[v] = parent[parent[v]]
        v = parent[v]
    return v


@njit(cache=True)
def _union(parent, u, v):
    ru = _find(parent, u)
    rv = _find(parent, v)
    if ru < rv:
        parent[rv] = ru
    elif rv < ru:
        parent[ru] = rv


@njit(cache=True)
def uf_labels(nv, eu, ev, open_, vmask):
    """Smallest-index representative of each vertex's open cluster.

    Only edges with both endpoints in ``vmask`` count; vertices outside
    ``vmask`` get label -1.
    """
    parent = np.arange(nv)
    for e in range(eu.size):
        if open_[e] and vmask[eu[e]] and vmask[ev[e]]:
            _union(parent, eu[e], ev[e])
    out = np.empty(nv, dtype=np.int64)
    for v in range(nv):
        out[v] = _find(parent, v) if vmask[v] else -1
    return out


@njit(cache=True)
def all_labels(nv, eu, ev):
    """Cluster labels for every edge subset, indexed by bit mask."""
    m = eu.size
    out = np.empty((1 << m, nv), dtype=np.int8)
    parent = np.empty(nv, dtype=np.int64)
    for mask in range(1 << m):
        for v in range(nv):
            parent[v] = v
        for e in range(m):
            if (mask >> e) & 1:
                _union(parent, eu[e], ev[e])
        for v in range(nv):
            out[mask, v] = _find(parent, v)
    return out


@njit(cache=True)
def trace_weights_dp(nv, eu, ev, w_even, w_odd, target):
    """Unnormalised trace weights from per-edge even/odd current sums.

    For every open-edge set ``tau`` (bit mask) returns the total weight of
    currents whose support is exactly ``tau`` and whose source set is the
    vertex bit mask ``target``. Edges are processed from the highest bit down
    so that consecutive masks share the longest possible prefix.
    """
    m = eu.size
    S = 1 << nv
    dist = np.zeros((m + 1, S))
    dist[0, 0] = 1.0
    out = np.empty(1 << m)
    for mask in range(1 << m):
        if mask == 0:
            start = 0
        else:
            diff = mask ^ (mask - 1)
            b = 0
            while diff > 1:
                diff >>= 1
                b += 1
            start = m - 1 - b
        for d in range(start, m):
            e = m - 1 - d
            if (mask >> e) & 1:
                vm = (1 << eu[e]) | (1 << ev[e])
                for s in range(S):
                    dist[d + 1, s] = w_even[e] * dist[d, s] + w_odd[e] * dist[d, s ^ vm]
            else:
                for s in range(S):
                    dist[d + 1, s] = dist[d, s]
        out[mask] = dist[m, target]
    return out


# ---------------------------------------------------------------------------
# Markov chain pieces


@njit(cache=True)
def heatbath_sweep(spins, ptr, nbr, nbr_J, ext_J, pinned, u):
    """One in-order sweep of single-site heat-bath updates; returns flip count."""
    flips = 0
    for v in range(spins.size):
        if pinned[v]:
            continue
        f = ext_J[v]
        for k in range(ptr[v], ptr[v + 1]):
            f += nbr_J[k] * spins[nbr[k]]
        s = 1 if u[v] * (1.0 + math.exp(-2.0 * f)) < 1.0 else -1
        if s != spins[v]:
            spins[v] = s
            flips += 1
    return flips


@njit(cache=True)
def bonds_from_spins(spins, eu, ev, p_open, ghost, u, out):
    """Open each edge between agreeing spins with probability ``p_open``."""
    for e in range(eu.size):
        a = eu[e]
        b = ev[e]
        sa = 1 if a == ghost else spins[a]
        sb = 1 if b == ghost else spins[b]
        out[e] = sa == sb and u[e] < p_open[e]


@njit(cache=True)
def cluster_spins(spins, eu, ev, open_, ghost, pinned, u):
    """Resample spins cluster by cluster given the bonds.

    Clusters holding the ghost or a pinned site keep ``+1``; every other
    cluster gets an independent fair sign read off ``u`` at its root.
    """
    nv = ghost + 1
    parent = np.arange(nv)
    for e in range(eu.size):
        if open_[e]:
            _union(parent, eu[e], ev[e])
    for v in range(ghost):
        if pinned[v]:
            _union(parent, v, ghost)
    g_root = _find(parent, ghost)
    for v in range(ghost):
        r = _find(parent, v)
        if r == g_root:
            spins[v] = 1
        else:
            spins[v] = 1 if u[r] < 0.5 else -1


@njit(cache=True)
def uniform_even(nv, ptr, adj_v, adj_e, eu, ev, open_, u, out):
    """Uniform even subgraph of the open edges.

    Builds a breadth-first spanning forest (roots are the lowest-index
    vertices of each component), keeps each open non-forest edge when
    ``u[e] < 1/2`` and completes with the unique forest edges that make every
    degree even. This equals the symmetric difference of the kept edges'
    fundamental cycles.
    """
    m = eu.size
    in_tree = np.zeros(m, dtype=np.bool_)
    parent_edge = np.full(nv, -1, dtype=np.int64)
    seen = np.zeros(nv, dtype=np.bool_)
    order = np.empty(nv, dtype=np.int64)
    head = 0
    tail = 0
    for root in range(nv):
        if seen[root]:
            continue
        seen[root] = True
        order[tail] = root
        tail += 1
        while head < tail:
            v = order[head]
            head += 1
            for k in range(ptr[v], ptr[v + 1]):
                e = adj_e[k]
                w = adj_v[k]
                if open_[e] and not seen[w]:
                    seen[w] = True
                    in_tree[e] = True
                    parent_edge[w] = e
                    order[tail] = w
                    tail += 1
    parity = np.zeros(nv, dtype=np.bool_)
    for e in range(m):
        out[e] = False
        if open_[e] and not in_tree[e] and u[e] < 0.5:
            out[e] = True
            parity[eu[e]] = not parity[eu[e]]
            parity[ev[e]] = not parity[ev[e]]
    for idx in range(nv - 1, -1, -1):
        v = order[idx]
        e = parent_edge[v]
        if e >= 0 and parity[v]:
            out[e] = True
            w = eu[e] if ev[e] == v else ev[e]
            parity[v] = False
            parity[w] = not parity[w]


@njit(cache=True)
def bool_to_mask(open_):
    mask = 0
    for e in range(open_.size):
        if open_[e]:
            mask |= 1 << e
    return mask


@njit(cache=True)
def composite_block(spins, ptr, nbr, nbr_J, ext_J, pinned, eu, ev, p_open, q_sech,
                    adj_ptr, adj_v, adj_e, u_spin, u_bond, u_ueg, u_sech, mode):
    """Run ``len(u_spin)`` composite sweeps on a small graph.

    ``mode`` 0 records the bond configuration, mode 1 the even subgraph and
    the sech-augmented trace. Configurations are returned as bit masks.
    """
    steps = u_spin.shape[0]
    ghost = spins.size
    m = eu.size
    bonds = np.zeros(m, dtype=np.bool_)
    even = np.zeros(m, dtype=np.bool_)
    out_a = np.empty(steps, dtype=np.int64)
    out_b = np.empty(steps, dtype=np.int64)
    for t in range(steps):
        heatbath_sweep(spins, ptr, nbr, nbr_J, ext_J, pinned, u_spin[t])
        bonds_from_spins(spins, eu, ev, p_open, ghost, u_bond[t], bonds)
        if mode == 0:
            out_a[t] = bool_to_mask(bonds)
            out_b[t] = 0
        else:
            uniform_even(ghost + 1, adj_ptr, adj_v, adj_e, eu, ev, bonds, u_ueg[t], even)
            out_a[t] = bool_to_mask(even)
            trace = 0
            for e in range(m):
                if even[e] or u_sech[t, e] < q_sech[e]:
                    trace |= 1 << e
            out_b[t] = trace
    return out_a, out_b


@njit(cache=True)
def spin_pair_block(spins, ptr, nbr, nbr_J, ext_J, pinned, u_spin, xs, ys):
    """Heat-bath sweeps recording ``s_x``, ``s_y`` for each listed pair."""
    steps = u_spin.shape[0]
    P = xs.size
    sx = np.empty((steps, P), dtype=np.int8)
    sy = np.empty((steps, P), dtype=np.int8)
    for t in range(steps):
        heatbath_sweep(spins, ptr, nbr, nbr_J, ext_J, pinned, u_spin[t])
        for k in range(P):
            sx[t, k] = spins[xs[k]]
            sy[t, k] = spins[ys[k]]
    return sx, sy
