"""Domains inside a space: boundary decomposition, clearance, uniform curves.

The discrete boundary of a vertex set U is the set of outside vertices with an
edge into U; the exterior V is everything else. A curve is a vertex path inside
U scored by the smallest constant A for which both the diameter bound
diam(curve) <= A*d(x,y) and the clearance ("cigar") bound
delta_U(z) >= min(d(x,z), d(z,y))/A hold along it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .report import CheckReport
from .space import Space

PENALTY_LAMBDAS = (0.5, 1.0, 2.0, 4.0, 8.0)


class InvalidDomainError(ValueError):
    pass


@dataclass(frozen=True)
class DomainDecomposition:
    """Partition X = U ∪ ∂U ∪ V with clearance vector delta_U on U."""

    space: Space
    U: np.ndarray
    boundary: np.ndarray
    V: np.ndarray
    delta_full: np.ndarray  # distance to X∖U for every vertex (0 off U)

    @cached_property
    def in_U(self) -> np.ndarray:
        mask = np.zeros(self.space.n, dtype=bool)
        mask[self.U] = True
        return mask

    @cached_property
    def in_V(self) -> np.ndarray:
        mask = np.zeros(self.space.n, dtype=bool)
        mask[self.V] = True
        return mask

    @cached_property
    def closure_U(self) -> np.ndarray:
        return np.sort(np.r_[self.U, self.boundary])

    @cached_property
    def in_closure(self) -> np.ndarray:
        mask = np.zeros(self.space.n, dtype=bool)
        mask[self.closure_U] = True
        return mask

    @cached_property
    def delta_V_full(self) -> np.ndarray:
        """Distance to X∖V for every vertex (0 off V)."""
        return _multi_source_distance(self.space, np.flatnonzero(~self.in_V)) * self.in_V

    def delta_U(self, x: int) -> float:
        return float(self.delta_full[x])

    @cached_property
    def diam_U(self) -> float:
        d = self.space.distance[np.ix_(self.U, self.U)]
        return float(d.max())


def _multi_source_distance(space: Space, sources: np.ndarray) -> np.ndarray:
    d = dijkstra(space.length_csr, directed=False, indices=sources, min_only=True)
    return np.asarray(d)


def boundary_decomposition(space: Space, U) -> DomainDecomposition:
    """Decompose X around a proper, nonempty, induced-connected vertex set U."""
    U = np.asarray(sorted(set(int(v) for v in U)), dtype=int)
    if U.size == 0 or U.size == space.n:
        raise InvalidDomainError("U must be a proper nonempty subset")
    in_U = np.zeros(space.n, dtype=bool)
    in_U[U] = True
    sub_edges = [(u, v) for (u, v, _, _) in space.edges if in_U[u] and in_U[v]]
    if not _is_connected(U, sub_edges):
        raise InvalidDomainError("induced subgraph on U must be connected")
    boundary = sorted({
        (v if in_U[u] else u)
        for (u, v, _, _) in space.edges
        if in_U[u] != in_U[v]
    })
    boundary = np.array(boundary, dtype=int)
    in_b = np.zeros(space.n, dtype=bool)
    in_b[boundary] = True
    V = np.flatnonzero(~in_U & ~in_b)
    complement = np.flatnonzero(~in_U)
    delta = _multi_source_distance(space, complement)
    delta = np.where(in_U, delta, 0.0)
    return DomainDecomposition(space, U, boundary, V, delta)


def _is_connected(verts: np.ndarray, edges) -> bool:
    if verts.size == 1:
        return True
    pos = {int(v): i for i, v in enumerate(verts)}
    if not edges:
        return False
    rows = [pos[u] for u, v in edges] + [pos[v] for u, v in edges]
    cols = [pos[v] for u, v in edges] + [pos[u] for u, v in edges]
    g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                      shape=(verts.size, verts.size))
    ncomp, _ = connected_components(g, directed=False)
    return ncomp == 1


# -- domain catalog -----------------------------------------------------------

def build_domain(space: Space, spec: dict) -> DomainDecomposition:
    """Build a domain from a spec dict.

    Types: ``half_grid`` (upper half of a grid), ``remove_bottom_line``
    (drop the vertices with minimal y coordinate), ``slit`` (grid minus a
    horizontal half-row, the standard non-uniform control), ``explicit``
    (user-supplied vertex list).
    """
    kind = spec.get("type")
    if kind == "explicit":
        return boundary_decomposition(space, spec["vertices"])
    if space.coords is None:
        raise InvalidDomainError(f"domain type {kind!r} needs vertex coordinates")
    ys = space.coords[:, 1]
    if kind == "half_grid":
        ny = int(round(ys.max())) + 1
        cut = (ny + 1) // 2
        return boundary_decomposition(space, np.flatnonzero(ys >= cut))
    if kind == "remove_bottom_line":
        ymin = ys.min()
        return boundary_decomposition(space, np.flatnonzero(ys > ymin + 1e-9))
    if kind == "slit":
        xs = space.coords[:, 0]
        ny = int(round(ys.max())) + 1
        nx = int(round(xs.max())) + 1
        row = int(spec.get("row", ny // 2))
        tip = int(spec.get("tip", nx // 2))
        on_slit = (np.round(ys).astype(int) == row) & (np.round(xs).astype(int) <= tip)
        return boundary_decomposition(space, np.flatnonzero(~on_slit))
    raise InvalidDomainError(f"unknown domain type {kind!r}")


# -- uniform curves -----------------------------------------------------------

@dataclass
class Curve:
    """Vertex path inside U with its measured uniformity constant."""

    path: np.ndarray
    length: float
    diam: float
    measuredA: float
    meets_target: bool


def curve_constant(space: Space, dom: DomainDecomposition, path) -> tuple[float, float]:
    """(diam, measuredA) for a vertex path between its endpoints, recomputed
    from scratch: the diameter ratio and the worst clearance ratio."""
    path = np.asarray(path, dtype=int)
    x, y = int(path[0]), int(path[-1])
    if x == y and path.size == 1:
        return 0.0, 1.0
    d = space.distance
    diam = float(d[np.ix_(path, path)].max())
    dxy = float(d[x, y])
    a = diam / dxy
    delta = dom.delta_full[path]
    reach = np.minimum(d[x, path], d[y, path])
    a = max(a, float(np.max(reach / delta)))
    return diam, a


def find_uniform_curve(space: Space, dom: DomainDecomposition, x: int, y: int,
                       A_target: float) -> Curve:
    """Search for a curve in U from x to y with measured constant <= A_target.

    Strategy: the geodesic inside U first; if it fails, clearance-penalized
    shortest paths with edge cost len*(1 + lam/min(delta at endpoints)) over a
    fixed lambda grid. The best curve found is returned either way, flagged
    against the target.
    """
    if not (dom.in_U[x] and dom.in_U[y]):
        raise ValueError("curve endpoints must lie in U")
    if x == y:
        return Curve(np.array([x]), 0.0, 0.0, 1.0, True)

    sub, back = space.subspace(dom.U)
    pos = {int(v): i for i, v in enumerate(back)}
    sx, sy = pos[x], pos[y]

    best: Curve | None = None

    def consider(path_sub):
        nonlocal best
        path = back[np.asarray(path_sub, dtype=int)]
        diam, a = curve_constant(space, dom, path)
        length = float(np.sum(space.distance[path[:-1], path[1:]]))
        cur = Curve(path, length, diam, a, a <= A_target)
        if best is None or cur.measuredA < best.measuredA:
            best = cur

    consider(_shortest_vertex_path(sub.length_csr, sx, sy))
    if not best.meets_target:
        delta_sub = dom.delta_full[back]
        for lam in PENALTY_LAMBDAS:
            pen = _penalized_csr(sub, delta_sub, lam)
            consider(_shortest_vertex_path(pen, sx, sy))
            if best.meets_target:
                break
    return best


def _penalized_csr(sub: Space, delta: np.ndarray, lam: float) -> sp.csr_matrix:
    u, v = sub.edge_u, sub.edge_v
    factor = 1.0 + lam / np.minimum(delta[u], delta[v])
    w = sub.edge_len * factor
    m = sp.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])),
                      shape=(sub.n, sub.n))
    return m.tocsr()


def _shortest_vertex_path(csr: sp.csr_matrix, s: int, t: int) -> list[int]:
    _, pred = dijkstra(csr, directed=False, indices=s, return_predecessors=True)
    if pred[t] < 0 and s != t:
        raise ValueError("endpoints are disconnected")
    path = [t]
    while path[-1] != s:
        path.append(int(pred[path[-1]]))
    return path[::-1]


# -- corkscrew ----------------------------------------------------------------

def corkscrew_check(space: Space, dom: DomainDecomposition, A: float,
                    samples) -> CheckReport:
    """For each (center, r), look for y in U with B(y, r/(3A)) inside U ∩ B(center, r).

    Records found/not-found and the best achievable corkscrew radius
    min(delta_U(y), r - d(center, y)) over interior candidates.
    """
    report = CheckReport("corkscrew")
    half_diam = dom.diam_U / 2.0
    d = space.distance
    for center, r in samples:
        center, r = int(center), float(r)
        if not (r < half_diam):
            raise ValueError("corkscrew samples need r < diam(U)/2")
        required = r / (3.0 * A)
        cand = dom.U[d[center, dom.U] < r]
        if cand.size == 0:
            report.add("corkscrew", {"center": center, "r": r}, 0.0,
                       bound=required, passed=False, notes="no interior vertex in ball")
            continue
        radius = np.minimum(dom.delta_full[cand], r - d[center, cand])
        k = int(np.argmax(radius))
        best, y = float(radius[k]), int(cand[k])
        ok = best >= required and _ball_inside(space, dom, y, required, center, r)
        report.add("corkscrew", {"center": center, "r": r, "witness": y},
                   best, bound=required, passed=bool(ok))
    return report


def _ball_inside(space, dom, y, rho, center, r) -> bool:
    members = space.ball(y, rho) if rho > 0 else np.array([y])
    return bool(np.all(dom.in_U[members]) and np.all(space.distance[center, members] < r))
