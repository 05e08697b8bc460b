"""
Ghost-augmented subgraphs of the rescaled square lattice.

A :class:`GhostGraph` is a finite set of sites of ``a Z^2`` together with the
nearest-neighbour (internal) edges between them and one external edge from
every site to an extra *ghost* vertex. Internal edges carry the critical
coupling ``BETA_C``; external edges carry ``a**(15/8) * h``.

Sites are stored in integer lattice units (``coords = a * sites``). Vertices
are numbered row by row (``y`` outer, ``x`` inner) and the ghost is the last
vertex. Internal edges come first in the edge list, external edges follow in
vertex order, so the external edge of site ``v`` has index ``n_internal + v``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BETA_C",
    "FIELD_EXPONENT",
    "GhostGraph",
    "BoundaryCondition",
    "FREE",
    "WIRED",
    "Quotient",
    "Rect",
    "RectFrame",
    "build_graph",
    "build_domain_graph",
    "quotient_by_boundary",
    "external_coupling",
    "graph_to_text",
    "graph_from_text",
    "graph_hash",
    "row_of_frames",
    "sites_from_rows",
]

#: Critical inverse temperature of the square-lattice Ising model.
BETA_C = math.log(1.0 + math.sqrt(2.0)) / 2.0

#: Exponent of the lattice spacing in the external-edge coupling.
FIELD_EXPONENT = Fraction(15, 8)

_EPS = 1e-9


def external_coupling(a, h):
    """Coupling ``a**(15/8) * h`` carried by every external edge."""
    return float(a) ** float(FIELD_EXPONENT) * float(h)


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GhostGraph:
    """Finite subgraph of ``a Z^2`` plus a ghost vertex.

    Use :func:`build_domain_graph` or :func:`build_graph` rather than the
    constructor.
    """

    a: float
    h: float
    sites: np.ndarray
    edges: np.ndarray
    couplings: np.ndarray
    n_internal: int
    domain: tuple | None = None
    _index: dict = field(default=None, repr=False)

    # -- sizes -------------------------------------------------------------
    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def ghost(self) -> int:
        return len(self.sites)

    @property
    def n_vertices(self) -> int:
        return len(self.sites) + 1

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_external(self) -> int:
        return len(self.edges) - self.n_internal

    # -- derived data ------------------------------------------------------
    @cached_property
    def coords(self) -> np.ndarray:
        """Physical coordinates ``a * sites`` of the lattice vertices."""
        return _frozen(self.sites * float(self.a))

    @cached_property
    def is_internal(self) -> np.ndarray:
        mask = np.zeros(self.n_edges, dtype=bool)
        mask[: self.n_internal] = True
        return _frozen(mask)

    @cached_property
    def boundary(self) -> np.ndarray:
        """Sites having a lattice neighbour outside the site set."""
        out = []
        for v, (i, j) in enumerate(self.sites):
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if (int(i) + di, int(j) + dj) not in self._index:
                    out.append(v)
                    break
        return _frozen(np.array(out, dtype=np.int64))

    @property
    def boundary_with_ghost(self) -> np.ndarray:
        return np.append(self.boundary, self.ghost)

    def external_edge(self, v: int) -> int:
        """Index of the external edge at site ``v``."""
        return self.n_internal + int(v)

    def vertex_at(self, point) -> int:
        """Vertex index of the lattice site at physical position ``point``."""
        i = int(round(point[0] / self.a))
        j = int(round(point[1] / self.a))
        if abs(i * self.a - point[0]) > _EPS or abs(j * self.a - point[1]) > _EPS:
            raise KeyError(f"{point!r} is not a site of the lattice with spacing {self.a}")
        try:
            return self._index[(i, j)]
        except KeyError:
            raise KeyError(f"{point!r} is not in the graph") from None

    def site_index(self, i: int, j: int) -> int:
        """Vertex index of the site with integer lattice coordinates ``(i, j)``."""
        return self._index[(int(i), int(j))]

    def edge_between(self, u: int, v: int) -> int:
        """Index of the edge joining ``u`` and ``v`` (either may be the ghost)."""
        return self._edge_index[(min(u, v), max(u, v))]

    @cached_property
    def _edge_index(self) -> dict:
        return {(int(min(u, v)), int(max(u, v))): k for k, (u, v) in enumerate(self.edges)}

    @property
    def external_coupling(self) -> float:
        return external_coupling(self.a, self.h)

    # -- variants ----------------------------------------------------------
    def with_field(self, h: float) -> "GhostGraph":
        """Same sites and spacing, external couplings recomputed for ``h``."""
        return build_graph(self.sites, self.a, h, domain=self.domain)

    def with_couplings(self, couplings) -> "GhostGraph":
        """Copy with an explicit coupling vector (used for negative controls)."""
        couplings = np.asarray(couplings, dtype=float)
        if couplings.shape != (self.n_edges,):
            raise ValueError("coupling vector has the wrong length")
        return GhostGraph(self.a, self.h, self.sites, self.edges, _frozen(couplings.copy()),
                          self.n_internal, self.domain, self._index)

    def coupling_deviation(self) -> float:
        """Largest deviation of the couplings from ``BETA_C`` / ``a**(15/8) h``."""
        expected = np.full(self.n_edges, BETA_C)
        expected[self.n_internal:] = self.external_coupling
        if self.n_edges == 0:
            return 0.0
        return float(np.max(np.abs(self.couplings - expected)))

    def __repr__(self):
        return (f"GhostGraph(a={self.a}, h={self.h}, sites={self.n_sites}, "
                f"internal={self.n_internal}, external={self.n_external})")


def build_graph(sites, a: float, h: float, domain=None) -> GhostGraph:
    """Ghost graph on an arbitrary finite set of integer lattice sites.

    Parameters
    ----------
    sites : iterable of (int, int)
        Integer lattice coordinates; the physical position is ``a * site``.
    a : float
        Lattice spacing in ``(0, 1]``.
    h : float
        Field strength, ``h >= 0``.
    """
    a = float(a)
    h = float(h)
    if not (0.0 < a <= 1.0):
        raise ValueError(f"lattice spacing must lie in (0, 1], got {a}")
    if not (h >= 0.0 and math.isfinite(h)):
        raise ValueError(f"field must be finite and non-negative, got {h}")
    pts = sorted({(int(i), int(j)) for i, j in sites}, key=lambda p: (p[1], p[0]))
    if not pts:
        raise ValueError("the domain contains no lattice site")
    index = {p: k for k, p in enumerate(pts)}
    internal = []
    for k, (i, j) in enumerate(pts):
        for nb in ((i + 1, j), (i, j + 1)):
            other = index.get(nb)
            if other is not None:
                internal.append((k, other))
    internal.sort()
    n = len(pts)
    external = [(v, n) for v in range(n)]
    edges = np.array(internal + external, dtype=np.int64).reshape(-1, 2)
    couplings = np.empty(len(edges))
    couplings[: len(internal)] = BETA_C
    couplings[len(internal):] = external_coupling(a, h)
    return GhostGraph(a, h, _frozen(np.array(pts, dtype=np.int64).reshape(-1, 2)),
                      _frozen(edges), _frozen(couplings), len(internal),
                      None if domain is None else tuple(float(c) for c in domain), index)


def build_domain_graph(domain, a: float, h: float) -> GhostGraph:
    """Ghost graph on ``domain ∩ a Z^2``.

    Parameters
    ----------
    domain : (x0, x1, y0, y1) or Rect
        Closed axis-aligned rectangle in physical units.

    Examples
    --------
    >>> g = build_domain_graph((0, 1, 0, 1), a=1.0, h=0.0)
    >>> g.n_sites, g.n_internal, g.n_external
    (4, 4, 4)
    """
    if isinstance(domain, Rect):
        rect = domain
    else:
        x0, x1, y0, y1 = (float(c) for c in domain)
        if x1 < x0 or y1 < y0:
            raise ValueError(f"empty domain {domain!r}")
        rect = Rect(x0, x1, y0, y1)
    sites = rect.lattice_sites(a)
    if len(sites) == 0:
        raise ValueError(f"domain {domain!r} contains no point of the lattice with spacing {a}")
    return build_graph(sites, a, h, domain=(rect.x0, rect.x1, rect.y0, rect.y1))


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundaryCondition:
    """Partition of the boundary sites plus ghost.

    ``FREE`` and ``WIRED`` are resolved against a graph on demand; custom
    partitions list their blocks explicitly (vertex indices, ghost included).
    """

    kind: str
    blocks: tuple = ()

    @classmethod
    def custom(cls, blocks: Iterable[Iterable[int]]) -> "BoundaryCondition":
        return cls("custom", tuple(frozenset(int(v) for v in b) for b in blocks))

    def partition(self, g: GhostGraph) -> list[frozenset]:
        bnd = [int(v) for v in g.boundary_with_ghost]
        if self.kind == "free":
            return [frozenset([v]) for v in bnd]
        if self.kind == "wired":
            return [frozenset(bnd)]
        if self.kind != "custom":
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        seen = set()
        for b in self.blocks:
            if not b:
                raise ValueError("empty block in boundary partition")
            if seen & b:
                raise ValueError("boundary partition blocks overlap")
            seen |= b
        if seen != set(bnd):
            extra = sorted(seen - set(bnd))
            if extra:
                raise ValueError(f"partition references vertices {extra} outside the boundary")
            raise ValueError(f"partition misses boundary vertices {sorted(set(bnd) - seen)}")
        return list(self.blocks)


FREE = BoundaryCondition("free")
WIRED = BoundaryCondition("wired")


@dataclass(frozen=True)
class Quotient:
    """Graph obtained by identifying the vertices of each boundary block."""

    vertex_map: np.ndarray
    n_vertices: int
    edges: np.ndarray


def quotient_by_boundary(g: GhostGraph, xi: BoundaryCondition) -> Quotient:
    """Identify the boundary vertices of ``g`` according to ``xi``.

    The edge list keeps its order and multiplicity; edges inside a block
    become self-loops.
    """
    vmap = np.arange(g.n_vertices, dtype=np.int64)
    for block in xi.partition(g):
        rep = min(block)
        for v in block:
            vmap[v] = rep
    reps, new = np.unique(vmap, return_inverse=True)
    return Quotient(_frozen(new.astype(np.int64)), len(reps), _frozen(new[g.edges].astype(np.int64)))


# ---------------------------------------------------------------------------
# rectangles and frames

_SIDES = ("left", "bottom", "right", "top")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]`` with optional open sides.

    ``open_sides`` holds any of ``"left"``, ``"right"``, ``"bottom"``,
    ``"top"``; points on an open side are excluded.
    """

    x0: float
    x1: float
    y0: float
    y1: float
    open_sides: frozenset = frozenset()

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def center(self):
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        o = self.open_sides
        left = x > self.x0 + _EPS if "left" in o else x >= self.x0 - _EPS
        right = x < self.x1 - _EPS if "right" in o else x <= self.x1 + _EPS
        bottom = y > self.y0 + _EPS if "bottom" in o else y >= self.y0 - _EPS
        top = y < self.y1 - _EPS if "top" in o else y <= self.y1 + _EPS
        return left & right & bottom & top

    def contains_rect(self, other: "Rect") -> bool:
        return (other.x0 >= self.x0 - _EPS and other.x1 <= self.x1 + _EPS
                and other.y0 >= self.y0 - _EPS and other.y1 <= self.y1 + _EPS)

    def lattice_sites(self, a: float) -> list[tuple[int, int]]:
        """Integer coordinates of ``self ∩ a Z^2``."""
        i0 = math.ceil(self.x0 / a - _EPS)
        i1 = math.floor(self.x1 / a + _EPS)
        j0 = math.ceil(self.y0 / a - _EPS)
        j1 = math.floor(self.y1 / a + _EPS)
        if i1 < i0 or j1 < j0:
            return []
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
        pts = np.stack([ii.ravel(), jj.ravel()], axis=1)
        keep = self.contains(pts * a)
        return [tuple(p) for p in pts[keep].tolist()]

    def vertices_in(self, g: GhostGraph) -> np.ndarray:
        """Indices of the sites of ``g`` lying in the rectangle."""
        return np.flatnonzero(self.contains(g.coords))

    def linf_distance(self, other: "Rect") -> float:
        dx = max(other.x0 - self.x1, self.x0 - other.x1, 0.0)
        dy = max(other.y0 - self.y1, self.y0 - other.y1, 0.0)
        return max(dx, dy)

    def transformed(self, quarter_turns: int, offset) -> "Rect":
        """Rotate by ``quarter_turns * 90°`` about the origin, then translate."""
        k = quarter_turns % 4
        x0, x1, y0, y1 = self.x0, self.x1, self.y0, self.y1
        sides = set(self.open_sides)
        for _ in range(k):
            # (x, y) -> (-y, x)
            x0, x1, y0, y1 = -y1, -y0, x0, x1
            sides = {_SIDES[(_SIDES.index(s) + 1) % 4] for s in sides}
        dx, dy = offset
        return Rect(x0 + dx, x1 + dx, y0 + dy, y1 + dy, frozenset(sides))


_REFERENCE = {
    "T": Rect(0.0, 10.0, 0.0, 3.0),
    "R": Rect(2.0, 8.0, 0.0, 3.0),
    "S": Rect(1.0, 9.0, 1.0, 2.0),
    "Q1": Rect(1.0, 2.0, 1.0, 2.0, frozenset({"right"})),
    "Q8": Rect(8.0, 9.0, 1.0, 2.0, frozenset({"left"})),
}


@dataclass(frozen=True)
class RectFrame:
    """Placed copy of the reference rectangles ``T, R, S, Q1, Q8``.

    The reference frame has ``T = [0,10]x[0,3]``, ``R = [2,8]x[0,3]``,
    ``S = [1,9]x[1,2]``, ``Q1 = [1,2)x[1,2]`` and ``Q8 = (8,9]x[1,2]``. A
    frame rotates them by ``quarter_turns`` right angles about the origin and
    then translates by ``offset``.
    """

    offset: tuple = (0.0, 0.0)
    quarter_turns: int = 0

    def rect(self, name: str) -> Rect:
        return _REFERENCE[name].transformed(self.quarter_turns, self.offset)

    @property
    def T(self):
        return self.rect("T")

    @property
    def R(self):
        return self.rect("R")

    @property
    def S(self):
        return self.rect("S")

    @property
    def Q1(self):
        return self.rect("Q1")

    @property
    def Q8(self):
        return self.rect("Q8")

    @property
    def horizontal(self) -> bool:
        """Whether the long axis of ``R`` and ``S`` is the x axis."""
        return self.quarter_turns % 2 == 0

    def long_coordinate(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts[..., 0] if self.horizontal else pts[..., 1]

    def check_inside(self, g: GhostGraph) -> None:
        if g.domain is None:
            return
        x0, x1, y0, y1 = g.domain
        if not Rect(x0, x1, y0, y1).contains_rect(self.T):
            raise ValueError(f"frame {self} does not fit in the domain {g.domain}")


def row_of_frames(n: int, spacing: float = 12.0, origin=(0.0, 0.0)) -> list[RectFrame]:
    """``n`` horizontal frames whose ``R`` rectangles are ``spacing - 6`` apart."""
    return [RectFrame((origin[0] + k * spacing, origin[1]), 0) for k in range(n)]


# ---------------------------------------------------------------------------
# plain-text serialization


def graph_to_text(g: GhostGraph) -> str:
    """Plain-text adjacency format used for golden files and hashing."""
    dom = "none" if g.domain is None else " ".join(repr(float(c)) for c in g.domain)
    lines = [
        "# ghostgraph v1",
        f"a {float(g.a)!r}",
        f"h {float(g.h)!r}",
        f"domain {dom}",
        f"sites {g.n_sites}",
    ]
    lines += [f"{int(i)} {int(j)}" for i, j in g.sites]
    lines.append(f"edges {g.n_edges}")
    for k, ((u, v), J) in enumerate(zip(g.edges, g.couplings)):
        kind = "internal" if k < g.n_internal else "external"
        lines.append(f"{int(u)} {int(v)} {float(J)!r} {kind}")
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> GhostGraph:
    """Inverse of :func:`graph_to_text`."""
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    it = iter(rows)

    def field_(name):
        key, _, rest = next(it).partition(" ")
        if key != name:
            raise ValueError(f"expected {name!r}, got {key!r}")
        return rest.strip()

    a = float(field_("a"))
    h = float(field_("h"))
    dom = field_("domain")
    domain = None if dom == "none" else tuple(float(c) for c in dom.split())
    n = int(field_("sites"))
    sites = [tuple(int(c) for c in next(it).split()) for _ in range(n)]
    g = build_graph(sites, a, h, domain=domain)
    m = int(field_("edges"))
    couplings = np.empty(m)
    for k in range(m):
        u, v, J, kind = next(it).split()
        if (int(u), int(v)) != tuple(int(c) for c in g.edges[k]):
            raise ValueError(f"edge {k} does not match the canonical ordering")
        if (kind == "internal") != (k < g.n_internal):
            raise ValueError(f"edge {k} has the wrong internal/external flag")
        couplings[k] = float(J)
    if m != g.n_edges:
        raise ValueError("edge count mismatch")
    if not np.array_equal(couplings, g.couplings):
        g = g.with_couplings(couplings)
    return g


def graph_hash(g: GhostGraph) -> str:
    """Short SHA-256 digest of the plain-text serialization."""
    return hashlib.sha256(graph_to_text(g).encode()).hexdigest()[:16]


def sites_from_rows(rows: Sequence[str]) -> list[tuple[int, int]]:
    """Parse an ASCII picture (``#`` marks a site, first row on top)."""
    out = []
    for r, row in enumerate(reversed(list(rows))):
        for c, ch in enumerate(row):
            if ch == "#":
                out.append((c, r))
    return out
