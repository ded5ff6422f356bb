"""Finite metric measure spaces realized as weighted graphs.

A space is a connected graph with positive edge lengths (inducing the
shortest-path metric), positive edge conductances (inducing the energy form)
and positive vertex weights (the measure). The catalog covers paths, grids
and two fractal graph families.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path


class InvalidSpecError(ValueError):
    """Raised for malformed catalog specs."""


@dataclass(frozen=True)
class Ball:
    """Open metric ball: members = {y : d(center, y) < radius}.

    Unrestricted balls contain their center; balls restricted to a subset
    that excludes the center do not.
    """

    center: int
    radius: float
    members: np.ndarray


class Space:
    """Immutable weighted graph with lazily cached shortest-path metric."""

    def __init__(self, n, edges, measure, coords=None, name=""):
        edges = [(int(u), int(v), float(l), float(w)) for (u, v, l, w) in edges]
        if n <= 0:
            raise InvalidSpecError("space needs at least one vertex")
        for u, v, l, w in edges:
            if not (0 <= u < n and 0 <= v < n and u != v):
                raise InvalidSpecError(f"bad edge ({u},{v})")
            if l <= 0 or w <= 0:
                raise InvalidSpecError("edge lengths and conductances must be positive")
        measure = np.asarray(measure, dtype=float)
        if measure.shape != (n,) or np.any(measure <= 0):
            raise InvalidSpecError("measure must be a positive vector of length n")
        self.n = n
        self.edges = edges
        self.measure = measure
        self.measure.setflags(write=False)
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.name = name
        self.edge_u = np.array([e[0] for e in edges], dtype=int)
        self.edge_v = np.array([e[1] for e in edges], dtype=int)
        self.edge_len = np.array([e[2] for e in edges], dtype=float)
        self.edge_w = np.array([e[3] for e in edges], dtype=float)
        if n > 1:
            ncomp, _ = connected_components(self.length_csr, directed=False)
            if ncomp != 1:
                raise InvalidSpecError("graph must be connected")

    # -- derived structure ------------------------------------------------

    @cached_property
    def length_csr(self) -> sp.csr_matrix:
        m = sp.coo_matrix(
            (np.r_[self.edge_len, self.edge_len],
             (np.r_[self.edge_u, self.edge_v], np.r_[self.edge_v, self.edge_u])),
            shape=(self.n, self.n),
        )
        return m.tocsr()

    @cached_property
    def conductance_csr(self) -> sp.csr_matrix:
        m = sp.coo_matrix(
            (np.r_[self.edge_w, self.edge_w],
             (np.r_[self.edge_u, self.edge_v], np.r_[self.edge_v, self.edge_u])),
            shape=(self.n, self.n),
        )
        return m.tocsr()

    @cached_property
    def distance(self) -> np.ndarray:
        """Dense all-pairs shortest-path matrix in length units."""
        if self.n == 1:
            return np.zeros((1, 1))
        d = shortest_path(self.length_csr, method="D", directed=False)
        d = np.minimum(d, d.T)  # symmetrize roundoff
        d.setflags(write=False)
        return d

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        nbr = [[] for _ in range(self.n)]
        for u, v, _, _ in self.edges:
            nbr[u].append(v)
            nbr[v].append(u)
        return [np.array(sorted(a), dtype=int) for a in nbr]

    @cached_property
    def h_min(self) -> float:
        return float(self.edge_len.min()) if self.edges else 1.0

    @cached_property
    def diameter(self) -> float:
        return float(self.distance.max())

    @cached_property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    # -- queries -----------------------------------------------------------

    def ball(self, x: int, r: float, within=None) -> np.ndarray:
        """Vertex set of the open ball B(x, r), optionally intersected with a subset."""
        if r <= 0:
            raise ValueError("radius must be positive")
        mask = self.distance[x] < r
        if within is not None:
            sel = np.zeros(self.n, dtype=bool)
            sel[np.asarray(within, dtype=int)] = True
            mask &= sel
        return np.flatnonzero(mask)

    def mass(self, vertices) -> float:
        return float(self.measure[np.asarray(vertices, dtype=int)].sum())

    def subspace(self, vertices, name="") -> tuple["Space", np.ndarray]:
        """Induced sub-Space on a vertex subset with the intrinsic metric.

        Returns the sub-space together with the array mapping its indices back
        to parent indices.
        """
        verts = np.asarray(sorted(set(int(v) for v in vertices)), dtype=int)
        pos = {int(v): i for i, v in enumerate(verts)}
        keep = set(pos)
        sub_edges = [
            (pos[u], pos[v], l, w)
            for (u, v, l, w) in self.edges
            if u in keep and v in keep
        ]
        coords = None if self.coords is None else self.coords[verts]
        sub = Space(len(verts), sub_edges, self.measure[verts], coords=coords,
                    name=name or f"{self.name}|sub")
        return sub, verts

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "vertices": self.n,
            "edges": [[u, v, l, w] for (u, v, l, w) in self.edges],
            "measure": self.measure.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Space":
        return cls(doc["vertices"], doc["edges"], doc["measure"])


# -- catalog ----------------------------------------------------------------

def _uniform(space_n, edges, h, w, m, coords, name):
    edges = [(u, v, h, w) for (u, v) in edges]
    return Space(space_n, edges, np.full(space_n, m), coords=coords, name=name)


def _build_path(n, h, w, m):
    if n <= 0:
        raise InvalidSpecError("path size must be positive")
    edges = [(i, i + 1) for i in range(n)]
    coords = [(float(i), 0.0) for i in range(n + 1)]
    return _uniform(n + 1, edges, h, w, m, coords, f"path({n})")


def _build_grid(nx, ny, h, w, m):
    if nx <= 0 or ny <= 0:
        raise InvalidSpecError("grid sizes must be positive")
    def idx(x, y):
        return y * nx + x
    edges = []
    for y in range(ny):
        for x in range(nx):
            if x + 1 < nx:
                edges.append((idx(x, y), idx(x + 1, y)))
            if y + 1 < ny:
                edges.append((idx(x, y), idx(x, y + 1)))
    coords = [(float(x), float(y)) for y in range(ny) for x in range(nx)]
    return _uniform(nx * ny, edges, h, w, m, coords, f"grid({nx},{ny})")


def _build_gasket(level, h, w, m):
    """Graph approximation of the triangular fractal at a given subdivision level.

    Vertices live on the triangular lattice; a level-k cell of side s sits at
    lattice corner (a, b) and is split into three half-size corner cells.
    Cells are visited depth-first, which fixes the vertex order.
    """
    if level < 0:
        raise InvalidSpecError("gasket level must be >= 0")
    index: dict[tuple[int, int], int] = {}
    edges = []
    edge_seen = set()

    def vid(a, b):
        key = (a, b)
        if key not in index:
            index[key] = len(index)
        return index[key]

    def add_edge(p, q):
        key = (min(p, q), max(p, q))
        if key not in edge_seen:
            edge_seen.add(key)
            edges.append(key)

    def cell(a, b, s):
        if s == 1:
            p0, p1, p2 = vid(a, b), vid(a + 1, b), vid(a, b + 1)
            add_edge(p0, p1)
            add_edge(p1, p2)
            add_edge(p0, p2)
            return
        t = s // 2
        cell(a, b, t)
        cell(a + t, b, t)
        cell(a, b + t, t)

    cell(0, 0, 2 ** level)
    coords = np.zeros((len(index), 2))
    for (a, b), i in index.items():
        coords[i] = (a + b / 2.0, b * np.sqrt(3.0) / 2.0)
    return _uniform(len(index), edges, h, w, m, coords, f"sierpinski_gasket({level})")


def _build_carpet(level, h, w, m):
    """Cell-adjacency graph of the square fractal: 3x3 subdivision, center removed."""
    if level < 0:
        raise InvalidSpecError("carpet level must be >= 0")
    index: dict[tuple[int, int], int] = {}

    def cell(a, b, s):
        if s == 1:
            index[(a, b)] = len(index)
            return
        t = s // 3
        for db in range(3):
            for da in range(3):
                if da == 1 and db == 1:
                    continue
                cell(a + da * t, b + db * t, t)

    cell(0, 0, 3 ** level)
    edges = []
    for (a, b), i in index.items():
        for (da, db) in ((1, 0), (0, 1)):
            j = index.get((a + da, b + db))
            if j is not None:
                edges.append((min(i, j), max(i, j)))
    edges.sort()
    coords = np.zeros((len(index), 2))
    for (a, b), i in index.items():
        coords[i] = (float(a), float(b))
    return _uniform(len(index), edges, h, w, m, coords, f"sierpinski_carpet({level})")


def build_space(spec: dict) -> Space:
    """Build a catalog space from a spec dict.

    Spec keys: ``type`` in {path, grid, sierpinski_gasket, sierpinski_carpet},
    the family's size parameters, and optional uniform overrides
    ``edge_length``, ``conductance``, ``measure`` (defaults 1, 1, 1).
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidSpecError("space spec must be a dict with a 'type' key")
    kind = spec["type"]
    h = float(spec.get("edge_length", 1.0))
    w = float(spec.get("conductance", 1.0))
    m = float(spec.get("measure", 1.0))
    if h <= 0 or w <= 0 or m <= 0:
        raise InvalidSpecError("edge_length, conductance, measure must be positive")
    if kind == "path":
        return _build_path(int(spec["n"]), h, w, m)
    if kind == "grid":
        return _build_grid(int(spec["nx"]), int(spec["ny"]), h, w, m)
    if kind == "sierpinski_gasket":
        return _build_gasket(int(spec["level"]), h, w, m)
    if kind == "sierpinski_carpet":
        return _build_carpet(int(spec["level"]), h, w, m)
    raise InvalidSpecError(f"unknown space type {kind!r}")


# -- ball / doubling / nets ---------------------------------------------------

def ball_and_measure(space: Space, x: int, r: float, within=None) -> tuple[Ball, float]:
    """Open ball around x and its measure, optionally restricted to a subset."""
    members = space.ball(x, r, within=within)
    if within is None and x not in members:
        raise AssertionError("unrestricted ball must contain its center")
    return Ball(x, float(r), members), space.mass(members)


def doubling_constant(space: Space, subset, radii) -> tuple[float, float]:
    """Largest ratio m(B(x,2r) ∩ S)/m(B(x,r) ∩ S) over x in S and r in the grid.

    Returns (D0, alpha) with alpha = log2(D0); the inner ball always contains
    its center, so the ratio is finite.
    """
    subset = np.asarray(subset, dtype=int)
    if subset.size == 0:
        raise ValueError("subset must be nonempty")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    msub = np.zeros(space.n)
    msub[subset] = space.measure[subset]
    d = space.distance[subset]
    best = 1.0
    for r in radii:
        inner = (d < r) @ msub
        outer = (d < 2 * r) @ msub
        best = max(best, float(np.max(outer / inner)))
    return best, float(np.log2(best))


def rnet(space: Space, subset, r: float, order=None) -> np.ndarray:
    """Greedy maximal r-separated subset, scanned in the given vertex order."""
    subset = np.asarray(subset, dtype=int)
    if subset.size == 0:
        raise ValueError("subset must be nonempty")
    if order is None:
        order = np.sort(subset)
    chosen: list[int] = []
    d = space.distance
    for v in order:
        if all(d[v, c] >= r for c in chosen):
            chosen.append(int(v))
    return np.array(chosen, dtype=int)


# -- space-time scale function ------------------------------------------------

@dataclass(frozen=True)
class ScaleFunction:
    """Power scale function t = psi(r) = c * r**beta with beta > 1.

    ``phi`` is the transform sup_{r>0} (s/r - 1/psi(r)) governing off-diagonal
    kernel decay; the closed form is cross-checked against the numeric sup on
    construction.
    """

    c: float = 1.0
    beta: float = 2.0
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.c <= 0 or self.beta <= 1:
            raise ValueError("need c > 0 and beta > 1")
        for s in (0.5, 1.0, 3.0):
            closed = self.phi(s)
            numeric = phi_numeric_sup(self, s)
            if abs(closed - numeric) > 1e-9 * max(abs(closed), 1e-300):
                raise AssertionError(
                    f"phi closed form {closed} disagrees with numeric sup {numeric} at s={s}"
                )

    def psi(self, r):
        return self.c * np.asarray(r, dtype=float) ** self.beta

    def psi_inv(self, t):
        return (np.asarray(t, dtype=float) / self.c) ** (1.0 / self.beta)

    def phi(self, s) -> float:
        s = float(s)
        if s < 0:
            raise ValueError("phi is defined for s >= 0")
        if s == 0.0:
            return 0.0
        b = self.beta
        return (b - 1.0) * (s / b) ** (b / (b - 1.0)) * self.c ** (1.0 / (b - 1.0))


def phi_numeric_sup(psi: ScaleFunction, s: float, grid_points: int = 400) -> float:
    """Numeric sup over r of s/r - 1/psi(r): log-grid scan plus ternary refinement."""
    s = float(s)
    if s == 0.0:
        return 0.0
    rs = np.logspace(-6, 6, grid_points)
    vals = s / rs - 1.0 / psi.psi(rs)
    k = int(np.argmax(vals))
    lo = rs[max(k - 1, 0)]
    hi = rs[min(k + 1, grid_points - 1)]
    f = lambda r: s / r - 1.0 / psi.psi(r)
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    return float(f(0.5 * (lo + hi)))
