"""
Connectivity events on bond configurations.

Rectangles are taken in physical coordinates and intersected with the
lattice of the graph. A vertex lies on a side of a rectangle when it sits in
the extreme column (or row) of the rectangle's lattice points on that side,
which is within one lattice step of the side.

Besides the detectors, this module holds independent reference
implementations used to cross-check them (:func:`bfs_labels`,
:func:`dual_circuit_reference`, :func:`verify_rectangles`) and the coupled
harness :func:`coupled_loop_events` that builds a uniform even subgraph
from a forest grown through the loops of the frames where ``H`` holds.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lattice import GhostGraph, Rect, RectFrame
from .samplers import RngStream, _arrays, _as_stream, fundamental_cycles, sech_augment

__all__ = [
    "ClusterLabeling",
    "EventReport",
    "label_clusters",
    "bfs_labels",
    "has_crossing",
    "has_dual_circuit",
    "dual_circuit_reference",
    "crossing_cluster",
    "event_H",
    "event_E",
    "event_E_all",
    "coupled_loop_events",
    "disjoint_crossed_rectangles",
    "verify_rectangles",
    "config_to_text",
    "config_from_text",
]


@dataclass(frozen=True)
class ClusterLabeling:
    """Cluster id per vertex (``-1`` outside the restriction).

    Ids are the smallest vertex index of the cluster.
    """

    labels: np.ndarray

    def connected(self, u: int, v: int) -> bool:
        lu = self.labels[u]
        return bool(lu >= 0 and lu == self.labels[v])

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.labels[self.labels >= 0]).size)


@dataclass(frozen=True)
class EventReport:
    """Outcome of the frame events on one configuration.

    ``E`` is ``None`` when only the random-cluster events were evaluated.
    """

    E1: bool
    E2: bool
    H: bool
    N: int = 0
    N1: int = 0
    N8: int = 0
    E: bool | None = None


def _mask(g: GhostGraph, internal_only: bool, region) -> np.ndarray:
    if region is None:
        mask = np.ones(g.n_vertices, dtype=np.bool_)
    elif isinstance(region, Rect):
        mask = np.zeros(g.n_vertices, dtype=np.bool_)
        mask[region.vertices_in(g)] = True
    else:
        mask = np.zeros(g.n_vertices, dtype=np.bool_)
        mask[: g.n_sites] = np.asarray(region, dtype=bool)[: g.n_sites]
    mask[g.ghost] = not internal_only and region is None
    return mask


def _labels(omega, g, vmask) -> np.ndarray:
    a = _arrays(g)
    return K.uf_labels(g.n_vertices, a.eu, a.ev, np.asarray(omega, dtype=np.bool_), vmask)


def label_clusters(omega, g: GhostGraph, internal_only: bool = False, region=None) -> ClusterLabeling:
    """Open clusters of ``omega``, optionally restricted.

    ``region`` is a :class:`Rect` or a boolean mask over sites; only edges
    with both endpoints in the region count, and the ghost is excluded. With
    ``internal_only`` the ghost and its edges are ignored.
    """
    return ClusterLabeling(_labels(omega, g, _mask(g, internal_only, region)))


def bfs_labels(omega, g: GhostGraph, internal_only: bool = False, region=None) -> np.ndarray:
    """Breadth-first reference for :func:`label_clusters`."""
    mask = _mask(g, internal_only, region)
    adj = [[] for _ in range(g.n_vertices)]
    for e in np.flatnonzero(omega):
        u, v = (int(c) for c in g.edges[e])
        if mask[u] and mask[v]:
            adj[u].append(v)
            adj[v].append(u)
    out = np.full(g.n_vertices, -1, dtype=np.int64)
    for root in range(g.n_vertices):
        if not mask[root] or out[root] >= 0:
            continue
        out[root] = root
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if out[w] < 0:
                    out[w] = root
                    queue.append(w)
    return out


# ---------------------------------------------------------------------------
# crossings


def _resolve_axis(rect: Rect, axis: str) -> str:
    if axis == "long":
        return "LR" if rect.width >= rect.height else "TB"
    if axis == "short":
        return "TB" if rect.width >= rect.height else "LR"
    if axis not in ("LR", "TB"):
        raise ValueError(f"unknown axis {axis!r}")
    return axis


def _sides(g: GhostGraph, rect: Rect, axis: str):
    verts = rect.vertices_in(g)
    if verts.size == 0:
        raise ValueError(f"{rect} contains no lattice point")
    col = 0 if _resolve_axis(rect, axis) == "LR" else 1
    c = g.sites[verts, col]
    return verts, verts[c == c.min()], verts[c == c.max()]


def _crossing_labels(omega, g, rect, axis):
    verts, lo, hi = _sides(g, rect, axis)
    mask = np.zeros(g.n_vertices, dtype=np.bool_)
    mask[verts] = True
    labels = _labels(omega, g, mask)
    return labels, np.intersect1d(labels[lo], labels[hi])


def has_crossing(omega, g: GhostGraph, rect: Rect, axis: str = "long") -> bool:
    """Whether open internal edges inside ``rect`` join its two opposite sides.

    ``axis`` is ``"LR"`` (left to right), ``"TB"`` (top to bottom), or
    ``"long"``/``"short"`` relative to the rectangle's shape.
    """
    return _crossing_labels(omega, g, rect, axis)[1].size > 0


def _ring(g: GhostGraph, rect: Rect) -> tuple[np.ndarray, np.ndarray]:
    verts = rect.vertices_in(g)
    s = g.sites[verts]
    on = ((s[:, 0] == s[:, 0].min()) | (s[:, 0] == s[:, 0].max())
          | (s[:, 1] == s[:, 1].min()) | (s[:, 1] == s[:, 1].max()))
    return verts, verts[on]


def has_dual_circuit(omega, g: GhostGraph, frame: RectFrame) -> bool:
    """Whether a closed dual circuit in ``T \\ S`` surrounds ``S``.

    Decided by planar duality: such a circuit exists iff no open internal
    path inside ``T`` joins ``S`` to the outer ring of ``T``.
    """
    t_verts, ring = _ring(g, frame.T)
    mask = np.zeros(g.n_vertices, dtype=np.bool_)
    mask[t_verts] = True
    labels = _labels(omega, g, mask)
    s_verts = frame.S.vertices_in(g)
    return np.intersect1d(labels[s_verts], labels[ring]).size == 0


def dual_circuit_reference(omega, g: GhostGraph, frame: RectFrame) -> bool:
    """Explicit search for a closed dual circuit around ``S`` inside ``T``.

    Dual vertices are the lattice faces of ``T`` not contained in ``S``; two
    faces are adjacent when they share a closed primal edge. Each dual step
    also records the parity of its crossings with a vertical ray going up
    from the top of ``S``; a circuit surrounding ``S`` exists iff some face
    reaches its own copy with odd parity.
    """
    omega = np.asarray(omega, dtype=bool)
    idx = {tuple(g.sites[v]): int(v) for v in frame.T.vertices_in(g)}
    s_pts = {tuple(g.sites[v]) for v in frame.S.vertices_in(g)}
    faces = [
        (i, j) for (i, j) in idx
        if (i + 1, j) in idx and (i, j + 1) in idx and (i + 1, j + 1) in idx
        and not {(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)} <= s_pts
    ]
    fid = {f: k for k, f in enumerate(faces)}
    cols = sorted({p[0] for p in s_pts})
    rx = cols[len(cols) // 2]
    ry = max(p[1] for p in s_pts if p[0] == rx)

    parent = list(range(2 * len(faces)))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def join(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    def closed(p, q):
        return not omega[g.edge_between(idx[p], idx[q])]

    n = len(faces)
    for (i, j), k in fid.items():
        right = fid.get((i + 1, j))
        if right is not None and closed((i + 1, j), (i + 1, j + 1)):
            flip = int(i + 1 == rx and j >= ry)
            join(k, right + n * flip)
            join(k + n, right + n * (1 - flip))
        up = fid.get((i, j + 1))
        if up is not None and closed((i, j + 1), (i + 1, j + 1)):
            join(k, up)
            join(k + n, up + n)
    return any(find(k) == find(k + n) for k in range(n))


# ---------------------------------------------------------------------------
# frame events


def _perp(frame: RectFrame) -> str:
    return "TB" if frame.horizontal else "LR"


def crossing_cluster(omega, g: GhostGraph, frame: RectFrame):
    """Vertices of the internal cluster of the long crossing of ``S``.

    Returns ``None`` when ``S`` has no long crossing. The cluster is taken
    with all internal edges inside ``T`` (clipped to the graph).

    Raises
    ------
    AssertionError
        If two distinct clusters cross ``S`` while ``Q1`` and ``Q8`` are
        crossed; planarity forbids it.
    """
    s_labels, crossing = _crossing_labels(omega, g, frame.S, "long")
    if crossing.size == 0:
        return None
    if crossing.size > 1:
        raise AssertionError(f"{crossing.size} distinct long crossing clusters of S")
    t_mask = np.zeros(g.n_vertices, dtype=np.bool_)
    t_mask[frame.T.vertices_in(g)] = True
    t_labels = _labels(omega, g, t_mask)
    seed = int(np.flatnonzero(s_labels == crossing[0])[0])
    return np.flatnonzero(t_labels == t_labels[seed])


def event_H(omega, g: GhostGraph, frame: RectFrame, need_circuit: bool = True) -> EventReport:
    """Evaluate ``E1``, ``E2``, ``H`` and the cluster counts on ``omega``.

    ``H`` requires the dual circuit, the crossings of ``E2`` and exactly two
    open external edges on the crossing cluster, one at a vertex of ``Q1``
    and one at a vertex of ``Q8``. With ``need_circuit=False`` the circuit is
    not evaluated (``E1`` is reported false) and ``H`` ignores it; this is
    used for the moment counts on ``S`` alone.
    """
    omega = np.asarray(omega, dtype=bool)
    e1 = has_dual_circuit(omega, g, frame) if need_circuit else False
    e2 = (has_crossing(omega, g, frame.Q1, _perp(frame))
          and has_crossing(omega, g, frame.Q8, _perp(frame))
          and has_crossing(omega, g, frame.S, "long"))
    if not e2:
        return EventReport(e1, False, False)
    cluster = crossing_cluster(omega, g, frame)
    in_q1 = frame.Q1.contains(g.coords[cluster])
    in_q8 = frame.Q8.contains(g.coords[cluster])
    ext_open = omega[g.n_internal + cluster]
    h = ((e1 or not need_circuit) and ext_open.sum() == 2
         and (ext_open & in_q1).sum() == 1 and (ext_open & in_q8).sum() == 1)
    return EventReport(e1, True, bool(h), int(cluster.size), int(in_q1.sum()), int(in_q8.sum()))


def _outer_parts(g: GhostGraph, frame: RectFrame):
    t = frame.T.vertices_in(g)
    outside = t[~frame.R.contains(g.coords[t])]
    mid = frame.long_coordinate(frame.R.center)
    low = frame.long_coordinate(g.coords[outside]) < mid
    return outside[low], outside[~low]


def event_E(trace, g: GhostGraph, frame: RectFrame) -> bool:
    """Whether a long crossing of ``R`` reaches the ghost on both sides.

    The cluster of a long crossing of ``R`` (with all internal edges inside
    ``T``) must contain a vertex with an open external edge in each of the
    two components of ``T \\ R``.
    """
    trace = np.asarray(trace, dtype=bool)
    r_labels, crossing = _crossing_labels(trace, g, frame.R, "long")
    if crossing.size == 0:
        return False
    t_mask = np.zeros(g.n_vertices, dtype=np.bool_)
    t_mask[frame.T.vertices_in(g)] = True
    t_labels = _labels(trace, g, t_mask)
    left, right = _outer_parts(g, frame)
    left = left[trace[g.n_internal + left]]
    right = right[trace[g.n_internal + right]]
    if left.size == 0 or right.size == 0:
        return False
    for lab in crossing:
        seed = int(np.flatnonzero(r_labels == lab)[0])
        c = t_labels[seed]
        if np.any(t_labels[left] == c) and np.any(t_labels[right] == c):
            return True
    return False


def event_E_all(trace, g: GhostGraph, frames) -> np.ndarray:
    """:func:`event_E` for each of several frames whose ``T`` are pairwise disjoint.

    One labelling pass serves all frames, since clusters restricted to a
    union of non-touching rectangles are the clusters restricted to each.
    """
    trace = np.asarray(trace, dtype=bool)
    r_mask = np.zeros(g.n_vertices, dtype=np.bool_)
    t_mask = np.zeros(g.n_vertices, dtype=np.bool_)
    for fr in frames:
        r_mask[fr.R.vertices_in(g)] = True
        t_mask[fr.T.vertices_in(g)] = True
    r_labels = _labels(trace, g, r_mask)
    t_labels = _labels(trace, g, t_mask)
    out = np.zeros(len(frames), dtype=bool)
    for k, fr in enumerate(frames):
        _, lo, hi = _sides(g, fr.R, "long")
        crossing = np.intersect1d(r_labels[lo], r_labels[hi])
        if crossing.size == 0:
            continue
        left, right = _outer_parts(g, fr)
        left = t_labels[left[trace[g.n_internal + left]]]
        right = t_labels[right[trace[g.n_internal + right]]]
        if left.size == 0 or right.size == 0:
            continue
        ends = np.intersect1d(left, right)
        if ends.size == 0:
            continue
        seeds = [int(np.flatnonzero(r_labels == lab)[0]) for lab in crossing]
        out[k] = np.intersect1d(t_labels[seeds], ends).size > 0
    return out


def _loop_through(omega, g, frame, cluster):
    """Edges of the loop ghost -> v (in Q8) -> ... -> u (in Q1) -> ghost."""
    ext_open = omega[g.n_internal + cluster]
    u = int(cluster[ext_open & frame.Q1.contains(g.coords[cluster])][0])
    v = int(cluster[ext_open & frame.Q8.contains(g.coords[cluster])][0])
    inside = set(cluster.tolist())
    prev = {v: None}
    queue = deque([v])
    while queue and u not in prev:
        w = queue.popleft()
        for x in np.flatnonzero(g.edges[: g.n_internal, 0] == w).tolist() + \
                np.flatnonzero(g.edges[: g.n_internal, 1] == w).tolist():
            if not omega[x]:
                continue
            y = int(g.edges[x, 0] + g.edges[x, 1] - w)
            if y in inside and y not in prev:
                prev[y] = (w, x)
                queue.append(y)
    path = []
    w = u
    while prev[w] is not None:
        w, x = prev[w]
        path.append(x)
    return g.external_edge(u), [g.external_edge(v)] + path


def coupled_loop_events(omega, g: GhostGraph, frames, rng):
    """Uniform even subgraph of ``omega`` coupled to the frames where ``H`` holds.

    For every frame with ``H`` the loop ``eta`` made of the two open external
    edges and a path of the crossing cluster between them is formed; the
    spanning forest is grown from ``eta`` minus its ``Q1`` external edge
    ``e``, so that the fundamental cycle of ``e`` is ``eta``. Each
    fundamental cycle is kept on a fair coin.

    Returns
    -------
    dict with ``loops`` (the even subgraph), ``trace`` (its sech
    augmentation), ``h`` (indices of frames with ``H``), ``coins`` (coin of
    ``e`` per such frame) and ``cycle_is_loop`` (whether the fundamental
    cycle of ``e`` equals ``eta``).
    """
    rng = _as_stream(rng)
    omega = np.asarray(omega, dtype=bool)
    prefer, keys, loops = [], [], []
    for i, fr in enumerate(frames):
        rep = event_H(omega, g, fr)
        if rep.H:
            e, rest = _loop_through(omega, g, fr, crossing_cluster(omega, g, fr))
            prefer.extend(rest)
            keys.append((i, e))
            eta = np.zeros(g.n_edges, dtype=bool)
            eta[[e] + rest] = True
            loops.append(eta)
    _, cycles = fundamental_cycles(omega, g, prefer)
    u = rng.random(g.n_edges)
    F = np.zeros(g.n_edges, dtype=bool)
    for e, cyc in cycles.items():
        if u[e] < 0.5:
            F ^= cyc
    return {
        "loops": F,
        "trace": sech_augment(F, g, rng),
        "h": [i for i, _ in keys],
        "coins": [bool(u[e] < 0.5) for _, e in keys],
        "cycle_is_loop": [bool(np.array_equal(cycles[e], eta)) for (_, e), eta in zip(keys, loops)],
    }


# ---------------------------------------------------------------------------
# rectangles crossed by a path


def disjoint_crossed_rectangles(path, L: int, N: int) -> list[Rect]:
    """Rectangles of size ``2L x L`` crossed by ``path`` in the easy direction.

    ``path`` is a nearest-neighbour sequence of integer points inside
    ``[-(N - 2L), N - 2L]^2``. Lines perpendicular to the dominant axis of
    ``y - x`` are placed every ``4L`` starting at ``x``; at the first point
    ``z`` where the path meets a line, the path is followed until it leaves
    the box ``z + [-L, L]^2`` and the half of that box on the exit side is
    returned. The rectangles are pairwise at sup-distance at least ``2L``,
    at distance at least ``L`` from the boundary of ``[-N, N]^2`` and there
    are at least ``floor(|x - y| / (6L))`` of them.

    Raises
    ------
    ValueError
        If ``path`` is not a nearest-neighbour path or leaves
        ``[-(N - 2L), N - 2L]^2``.
    """
    P = np.asarray(path, dtype=np.int64).reshape(-1, 2)
    if L < 1:
        raise ValueError("L must be a positive integer")
    if len(P) > 1 and np.any(np.abs(np.diff(P, axis=0)).sum(axis=1) != 1):
        raise ValueError("path must move by one lattice step at a time")
    if np.abs(P).max(initial=0) > N - 2 * L:
        raise ValueError(f"path leaves the box of radius N - 2L = {N - 2 * L}")
    x, y = P[0], P[-1]
    d = int(np.argmax(np.abs(y - x)))
    D = int(abs(y[d] - x[d]))
    s = 1 if y[d] >= x[d] else -1
    rects = []
    for j in range(D // (4 * L) + 1):
        c = x[d] + s * 4 * L * j
        k = int(np.flatnonzero(P[:, d] == c)[0])
        z = P[k]
        off = np.abs(P[k:] - z).max(axis=1)
        out = np.flatnonzero(off > L)
        if out.size == 0:
            continue
        w = P[k + out[0]] - z
        zx, zy = int(z[0]), int(z[1])
        if w[0] > L:
            rects.append(Rect(zx, zx + L, zy - L, zy + L))
        elif w[0] < -L:
            rects.append(Rect(zx - L, zx, zy - L, zy + L))
        elif w[1] > L:
            rects.append(Rect(zx - L, zx + L, zy, zy + L))
        else:
            rects.append(Rect(zx - L, zx + L, zy - L, zy))
    return rects


def _crosses_easy(P, r: Rect) -> bool:
    inside = r.contains(P.astype(float))
    if r.width < r.height:
        lo, hi = P[:, 0] == r.x0, P[:, 0] == r.x1
    else:
        lo, hi = P[:, 1] == r.y0, P[:, 1] == r.y1
    # a maximal run of consecutive points inside r touching both long sides
    run = np.cumsum(~inside)[inside]
    if run.size == 0:
        return False
    n = int(run.max()) + 1
    has_lo = np.bincount(run, weights=lo[inside], minlength=n) > 0
    has_hi = np.bincount(run, weights=hi[inside], minlength=n) > 0
    return bool(np.any(has_lo & has_hi))


def verify_rectangles(path, L: int, N: int, rects) -> list[str]:
    """List every violated clause for an output of :func:`disjoint_crossed_rectangles`."""
    P = np.asarray(path, dtype=np.int64).reshape(-1, 2)
    problems = []
    need = math.floor(float(np.hypot(*(P[-1] - P[0]))) / (6 * L))
    if len(rects) < need:
        problems.append(f"count {len(rects)} < {need}")
    for i, r in enumerate(rects):
        if sorted((r.width, r.height)) != [L, 2 * L]:
            problems.append(f"rectangle {i} has size {r.width}x{r.height}")
        if min(r.x0 + N, N - r.x1, r.y0 + N, N - r.y1) < L:
            problems.append(f"rectangle {i} is closer than L to the boundary")
        if not _crosses_easy(P, r):
            problems.append(f"rectangle {i} is not crossed in the easy direction")
        for j in range(i):
            if r.linf_distance(rects[j]) < 2 * L:
                problems.append(f"rectangles {j} and {i} are closer than 2L")
    return problems


# ---------------------------------------------------------------------------
# fixture files


def config_to_text(omega, g: GhostGraph) -> str:
    """Open edges as lines ``i j k l`` (internal, lattice indices) or ``i j g`` (external)."""
    lines = [f"# open edges, a={g.a!r}"]
    for e in np.flatnonzero(omega):
        u, v = (int(c) for c in g.edges[e])
        iu, ju = g.sites[u]
        if v == g.ghost:
            lines.append(f"{iu} {ju} g")
        else:
            iv, jv = g.sites[v]
            lines.append(f"{iu} {ju} {iv} {jv}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str, g: GhostGraph) -> np.ndarray:
    """Inverse of :func:`config_to_text` on the graph ``g``."""
    omega = np.zeros(g.n_edges, dtype=bool)
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        u = g.site_index(int(line[0]), int(line[1]))
        if len(line) == 3 and line[2] == "g":
            omega[g.external_edge(u)] = True
        elif len(line) == 4:
            omega[g.edge_between(u, g.site_index(int(line[2]), int(line[3])))] = True
        else:
            raise ValueError(f"bad fixture line {raw!r}")
    return omega
