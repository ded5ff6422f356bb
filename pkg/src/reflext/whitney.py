"""Clearance-proportional ball covers ("Whitney covers") and their combinatorics.

A cover at parameter eps packs disjoint balls B(x_i, r_i) with
r_i = eps/(1+eps) * delta(x_i) into a side set (the domain U or the exterior
V), built greedily in decreasing-clearance order. The 3-dilates of a maximal
packing cover the side set; at mesh scale the dilates are augmented by one
mesh unit so the overlap structure survives discretization. All quantitative
bounds are checked on pairs satisfying the original metric conditions only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domains import DomainDecomposition, find_uniform_curve
from .report import CheckReport
from .space import Space


class InvalidEpsilonError(ValueError):
    pass


class NoCentralBallError(RuntimeError):
    """No near ball has radius in the corkscrew-derived window."""


class ChainUnavailableError(RuntimeError):
    pass


@dataclass
class WhitneyCover:
    space: Space
    dom: DomainDecomposition
    side: str                 # "interior" | "exterior"
    epsilon: float
    centers: np.ndarray       # ball centers, build order
    radii: np.ndarray
    covered: np.ndarray       # the side set (U or V)
    delta: np.ndarray         # clearance at every vertex of the side set (full length)

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def K_eps(self) -> float:
        return 2.0 * (1.0 + self.epsilon)

    @cached_property
    def in_covered(self) -> np.ndarray:
        mask = np.zeros(self.space.n, dtype=bool)
        mask[self.covered] = True
        return mask

    @cached_property
    def members(self) -> list[np.ndarray]:
        d = self.space.distance
        return [self.covered[d[c, self.covered] < r]
                for c, r in zip(self.centers, self.radii)]

    @cached_property
    def member_owner(self) -> np.ndarray:
        """Vertex -> index of the (unique) ball containing it, -1 if none."""
        owner = np.full(self.space.n, -1, dtype=int)
        for i, mem in enumerate(self.members):
            owner[mem] = i
        return owner

    def dilate(self, i: int, lam: float) -> np.ndarray:
        """Open metric lam-dilate of ball i, intersected with the side set."""
        d = self.space.distance
        return self.covered[d[self.centers[i], self.covered] < lam * self.radii[i]]

    @cached_property
    def aug_dilate3(self) -> list[np.ndarray]:
        """3-dilates augmented by the closed mesh ball (covering/adjacency use)."""
        d = self.space.distance
        h = self.space.h_min * (1.0 + 1e-12)
        return [
            self.covered[(d[c, self.covered] < 3.0 * r) | (d[c, self.covered] <= h)]
            for c, r in zip(self.centers, self.radii)
        ]

    @cached_property
    def aug_cover_of(self) -> list[list[int]]:
        """Vertex -> indices of balls whose augmented 3-dilate contains it."""
        cov: list[list[int]] = [[] for _ in range(self.space.n)]
        for i, dil in enumerate(self.aug_dilate3):
            for v in dil:
                cov[v].append(i)
        return cov

    @cached_property
    def true_cover_of(self) -> list[list[int]]:
        """Vertex -> indices of balls whose open 3-dilate contains it.

        Nonempty on every covered vertex: greedy maximality forces covering by
        the open dilates already.
        """
        cov: list[list[int]] = [[] for _ in range(self.space.n)]
        for i in range(self.k):
            for v in self.dilate(i, 3.0):
                cov[v].append(i)
        return cov

    def to_json_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "side": self.side,
            "balls": [[int(c), float(r)] for c, r in zip(self.centers, self.radii)],
        }


def build_whitney(space: Space, dom: DomainDecomposition, side: str,
                  eps: float) -> WhitneyCover:
    """Greedy maximal packing of clearance-proportional balls over U or V.

    Candidates are scanned in decreasing clearance (ties by index); a ball is
    accepted iff its vertex set is disjoint from all accepted balls. Covering
    by augmented 3-dilates and the clearance-comparison bounds inside true
    3-dilates are validated after the build.
    """
    if not (0.0 < eps < 0.5):
        raise InvalidEpsilonError("eps must lie in (0, 1/2)")
    if side == "interior":
        covered, delta = dom.U, dom.delta_full
    elif side == "exterior":
        covered, delta = dom.V, dom.delta_V_full
    else:
        raise ValueError("side must be 'interior' or 'exterior'")
    if covered.size == 0:
        raise ValueError(f"{side} side is empty")

    scale = eps / (1.0 + eps)
    order = sorted(covered, key=lambda v: (-delta[v], v))
    d = space.distance
    taken = np.zeros(space.n, dtype=bool)
    centers, radii = [], []
    for v in order:
        r = scale * delta[v]
        mem = covered[d[v, covered] < r]
        if mem.size == 0:
            mem = np.array([v])
        if not taken[mem].any():
            taken[mem] = True
            centers.append(int(v))
            radii.append(float(r))

    cover = WhitneyCover(space, dom, side, float(eps),
                         np.array(centers, dtype=int), np.array(radii),
                         covered, delta)
    _validate_cover(cover)
    return cover


def _validate_cover(cover: WhitneyCover) -> None:
    seen = np.zeros(cover.space.n, dtype=bool)
    for dil in cover.aug_dilate3:
        seen[dil] = True
    if not seen[cover.covered].all():
        raise AssertionError("augmented 3-dilates fail to cover the side set")
    lo, hi = whitb_window(cover.epsilon)
    d = cover.space.distance
    for i in range(cover.k):
        c, r = cover.centers[i], cover.radii[i]
        dil = cover.covered[d[c, cover.covered] < 3.0 * r]
        dy = cover.delta[dil]
        if not (np.all(dy > lo * cover.delta[c]) and np.all(dy < hi * cover.delta[c])):
            raise AssertionError("clearance comparison fails inside a 3-dilate")


def whitb_window(eps: float) -> tuple[float, float]:
    """Clearance ratio window for points of a ball's 3-dilate."""
    return (1.0 - 2.0 * eps) / (1.0 + eps), (1.0 + 4.0 * eps) / (1.0 + eps)


def whitc_window(eps: float, lam: float) -> tuple[float, float]:
    """Radius ratio window for balls with intersecting lam-dilates."""
    lo = (1.0 - (lam - 1.0) * eps) / (1.0 + (lam + 1.0) * eps)
    return lo, 1.0 / lo


def distnei_upper(eps: float, lam: float) -> float:
    _, hi = whitc_window(eps, lam)
    return lam * (1.0 + hi)


# -- Whitney graph ------------------------------------------------------------

@dataclass
class WhitneyGraph:
    cover: WhitneyCover
    edges: list[tuple[int, int]]
    neighbors: list[np.ndarray]
    max_degree: int

    @cached_property
    def dist(self) -> np.ndarray:
        """All-pairs hop count (-1 where unreachable)."""
        k = self.cover.k
        dist = np.full((k, k), -1, dtype=int)
        for s in range(k):
            dist[s] = _bfs(self.neighbors, k, s)
        return dist

    def to_edge_list(self) -> list[list[int]]:
        return [[int(a), int(b)] for a, b in self.edges]


def _bfs(neighbors, k, s):
    dist = np.full(k, -1, dtype=int)
    dist[s] = 0
    frontier = [s]
    while frontier:
        nxt = []
        for u in frontier:
            for v in neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return dist


def whitney_graph(cover: WhitneyCover) -> WhitneyGraph:
    """Adjacency: metric dilates intersect (3x interior, 6x exterior) or the
    ball vertex sets contain graph-adjacent vertices (mesh augmentation)."""
    lam = 3.0 if cover.side == "interior" else 6.0
    pairs = set()
    incident: list[list[int]] = [[] for _ in range(cover.space.n)]
    for i in range(cover.k):
        for v in cover.dilate(i, lam):
            incident[v].append(i)
    for lst in incident:
        for a in range(len(lst)):
            for b in range(a + 1, len(lst)):
                pairs.add((lst[a], lst[b]))
    owner = cover.member_owner
    for u, v, _, _ in cover.space.edges:
        a, b = owner[u], owner[v]
        if a >= 0 and b >= 0 and a != b:
            pairs.add((min(a, b), max(a, b)))
    edges = sorted(pairs)
    nbr: list[list[int]] = [[] for _ in range(cover.k)]
    for a, b in edges:
        nbr[a].append(b)
        nbr[b].append(a)
    neighbors = [np.array(sorted(x), dtype=int) for x in nbr]
    max_deg = max((len(x) for x in nbr), default=0)
    return WhitneyGraph(cover, edges, neighbors, max_deg)


def fuzz_inequality(graph: WhitneyGraph, node_measure: np.ndarray,
                    f: np.ndarray, L: int) -> tuple[float, float, float]:
    """Bounded-degree smoothing bound on the cover graph.

    Returns (lhs, rhs, const) where lhs sums |f(x)-f(y)|^2 m(x) over ordered
    pairs at hop distance <= L, rhs does the same at distance <= 1, and
    const = L * C^L * M^(2(L+1)) with C the worst measure ratio across an edge
    and M the maximum degree.
    """
    D = graph.dist
    m = node_measure
    diff2 = (f[:, None] - f[None, :]) ** 2
    sel_L = (D >= 0) & (D <= L)
    sel_1 = (D >= 0) & (D <= 1)
    lhs = float(np.sum(diff2 * sel_L * m[:, None]))
    rhs = float(np.sum(diff2 * sel_1 * m[:, None]))
    C = 1.0
    for a, b in graph.edges:
        ratio = max(m[a] / m[b], m[b] / m[a])
        C = max(C, float(ratio))
    M = max(graph.max_degree, 1)
    const = L * C ** L * M ** (2 * (L + 1))
    return lhs, rhs, const


# -- near balls, central balls, chains ----------------------------------------

@dataclass
class NearBallSet:
    center: int
    radius: float
    indices: np.ndarray        # cover indices near the ball
    central: int               # cover index of a central ball
    window: tuple[float, float]
    inside_2B: bool            # union of true 3-dilates inside the doubled ball


def bndr0_window(eps: float, A: float, r: float) -> tuple[float, float]:
    """Admissible central-ball radius range for a ball of radius r."""
    return eps / (3.0 * A * (4.0 + eps)) * r, 2.0 * eps / (1.0 - 2.0 * eps) * r


def near_and_central(cover: WhitneyCover, center: int, r: float,
                     A: float) -> NearBallSet:
    """Near-ball index set for B(center, r) plus a central ball of comparable radius.

    The central ball is located through a corkscrew point; its radius is
    re-validated against the closed-form window.
    """
    if cover.side != "interior":
        raise ValueError("near-ball queries are defined for interior covers")
    if not (0 < cover.epsilon < 1.0 / 14.0):
        raise InvalidEpsilonError("central-ball logic requires eps < 1/14")
    dom = cover.dom
    if not dom.in_closure[center]:
        raise ValueError("ball center must lie in the closure of U")
    if not (dom.delta_full[center] <= r < dom.diam_U / 2.0):
        raise ValueError("need delta_U(center) <= r < diam(U)/2")

    space = cover.space
    d = space.distance
    ball_U = dom.U[d[center, dom.U] < r]
    in_ball = np.zeros(space.n, dtype=bool)
    in_ball[ball_U] = True
    idx = sorted(i for i in range(cover.k)
                 if in_ball[cover.aug_dilate3[i]].any())
    indices = np.array(idx, dtype=int)

    inside = True
    for i in indices:
        dil = cover.dilate(i, 3.0)
        if dil.size and np.any(d[center, dil] >= 2.0 * r):
            inside = False
            break

    lo, hi = bndr0_window(cover.epsilon, A, r)
    central = -1
    if ball_U.size:
        score = np.minimum(dom.delta_full[ball_U], r - d[center, ball_U])
        y = int(ball_U[int(np.argmax(score))])
        for i in cover.aug_cover_of[y]:
            if i in idx and lo <= cover.radii[i] <= hi:
                central = i
                break
    if central < 0:
        for i in idx:
            if lo <= cover.radii[i] <= hi:
                central = i
                break
    if central < 0:
        raise NoCentralBallError(
            f"no near ball with radius in [{lo:.4g}, {hi:.4g}] at r={r}")
    return NearBallSet(center, float(r), indices, central, (lo, hi), inside)


@dataclass
class ChainRecord:
    ball_center: int
    ball_radius: float
    indices: list[int]         # cover indices, first = central, last = target
    curve: np.ndarray
    length: int
    wu1_ok: bool
    wu2_ok: bool
    wu3_ok: bool


def chain_radius_coef(eps: float, A: float) -> float:
    """Radius bound coefficient for chain balls relative to the anchor ball."""
    return (A * (4.0 * eps + 1.0) + 1.0 - 2.0 * eps) * eps / (1.0 - 2.0 * eps) ** 2


def chain_constants(eps: float, A: float) -> tuple[float, float]:
    """(C0, C1): containment dilations for chain balls and target capture."""
    coef = chain_radius_coef(eps, A)
    C0 = A * (1.0 + 4.0 * eps) / (1.0 - 2.0 * eps) + 4.0 * coef
    wu5 = 2.0 + 3.0 * coef + A * (4.0 * eps + 1.0) / (1.0 - 2.0 * eps)
    wu6 = (1.0 - 2.0 * eps) * eps / (3.0 * A * (4.0 + eps) * (1.0 + 4.0 * eps))
    wu8 = eps ** 2 / (A ** 2 * (4.0 + eps) * (1.0 + 4.0 * eps))
    C1 = max(wu5 / min(wu6, wu8), A * (1.0 + 4.0 * eps) / eps + 3.0)
    return C0, C1


def chain(cover: WhitneyCover, dom: DomainDecomposition, near: NearBallSet,
          target: int, A: float) -> ChainRecord:
    """Chain of cover balls from the central ball to a target near ball.

    Walks a uniform curve between the two centers: repeatedly take the last
    curve vertex inside the current augmented 3-dilate, then the lowest-index
    unused ball covering the walk frontier.
    """
    b0 = near.central
    if target == b0:
        return ChainRecord(near.center, near.radius, [b0],
                           np.array([cover.centers[b0]]), 0, True, True, True)
    x0, xD = int(cover.centers[b0]), int(cover.centers[target])
    curve = find_uniform_curve(cover.space, dom, x0, xD, A)
    if not curve.meets_target:
        raise ChainUnavailableError(
            f"no curve with constant <= {A} between ball centers {x0}, {xD}")
    path = curve.path

    in_aug = {}

    def aug_mask(i):
        if i not in in_aug:
            mask = np.zeros(cover.space.n, dtype=bool)
            mask[cover.aug_dilate3[i]] = True
            in_aug[i] = mask
        return in_aug[i]

    links = [b0]
    used = {b0}
    cur = b0
    for _ in range(cover.k + 1):
        if cur == target or (aug_mask(cur) & aug_mask(target)).any():
            if cur != target:
                links.append(target)
            break
        inside = np.flatnonzero(aug_mask(cur)[path])
        s = int(inside[-1]) if inside.size else 0
        nxt = None
        for t in range(s, len(path)):
            cands = [i for i in cover.aug_cover_of[path[t]] if i not in used]
            if cands:
                nxt = min(cands)
                break
        if nxt is None:
            raise ChainUnavailableError("walk stalled: no unused covering ball")
        links.append(nxt)
        used.add(nxt)
        cur = nxt
    else:
        raise ChainUnavailableError("walk failed to terminate")

    wu1 = all((aug_mask(a) & aug_mask(b)).any()
              for a, b in zip(links[:-1], links[1:]))
    on_curve = np.zeros(cover.space.n, dtype=bool)
    on_curve[path] = True
    wu1 = wu1 and all(on_curve[cover.aug_dilate3[i]].any() for i in links)

    r = near.radius
    coef = chain_radius_coef(cover.epsilon, A)
    C0, C1 = chain_constants(cover.epsilon, A)
    d = cover.space.distance
    wu2 = True
    for i in links:
        mem = cover.members[i]
        wu2 = wu2 and cover.radii[i] <= coef * r + 1e-12
        wu2 = wu2 and bool(np.all(d[near.center, mem] < C0 * r))
    xl = cover.centers[links[-1]]
    tgt_mem = cover.members[target]
    wu3 = True
    for i in links:
        xj, rj = cover.centers[i], cover.radii[i]
        wu3 = wu3 and d[xj, xl] <= C1 * rj + 1e-12
        wu3 = wu3 and bool(np.all(d[xj, tgt_mem] < (2.0 * C1 + 1.0) * rj))
    return ChainRecord(near.center, near.radius, links, path,
                       len(links) - 1, bool(wu1), bool(wu2), bool(wu3))


# -- exactness report (packing/covering/ratio checks) --------------------------

def exactness_report(cover: WhitneyCover) -> CheckReport:
    """Disjointness, radius law, covering and the dilate ratio bounds, checked
    exhaustively; metric-pair bounds are restricted to true dilates."""
    rep = CheckReport(f"whitney-{cover.side}")
    space, eps = cover.space, cover.epsilon
    d = space.distance

    counts = np.zeros(space.n, dtype=int)
    for mem in cover.members:
        counts[mem] += 1
    rep.add("disjoint", {}, float(counts.max()), bound=1.0,
            passed=bool(counts.max() <= 1))

    scale = eps / (1.0 + eps)
    err = max(abs(r - scale * cover.delta[c])
              for c, r in zip(cover.centers, cover.radii))
    rep.add("radius_law", {"eps": eps}, err, bound=1e-12, passed=bool(err <= 1e-12))

    seen = np.zeros(space.n, dtype=bool)
    for dil in cover.aug_dilate3:
        seen[dil] = True
    n_unc = int(np.sum(~seen[cover.covered]))
    rep.add("covering", {}, float(n_unc), bound=0.0, passed=bool(n_unc == 0))

    lo, hi = whitb_window(eps)
    bad = 0
    for i in range(cover.k):
        c, r = cover.centers[i], cover.radii[i]
        dil = cover.covered[d[c, cover.covered] < 3.0 * r]
        dy = cover.delta[dil]
        if dil.size and not (np.all(dy > lo * cover.delta[c])
                             and np.all(dy < hi * cover.delta[c])):
            bad += 1
    rep.add("clearance_window", {"lo": lo, "hi": hi}, float(bad), bound=0.0,
            passed=bool(bad == 0))

    for lam in (3.0, 6.0):
        if (lam - 1.0) * eps >= 1.0:
            continue
        wlo, whi = whitc_window(eps, lam)
        dn = distnei_upper(eps, lam)
        bad_ratio = bad_dist = npairs = 0
        incident: list[list[int]] = [[] for _ in range(space.n)]
        for i in range(cover.k):
            for v in cover.dilate(i, lam):
                incident[v].append(i)
        pairs = set()
        for lst in incident:
            for a in range(len(lst)):
                for b in range(a + 1, len(lst)):
                    pairs.add((lst[a], lst[b]))
        for i, j in pairs:
            npairs += 1
            ri, rj = cover.radii[i], cover.radii[j]
            if not (wlo * rj <= ri <= whi * rj):
                bad_ratio += 1
            dij = d[cover.centers[i], cover.centers[j]]
            if not (max(ri, rj) <= dij <= dn * min(ri, rj)):
                bad_dist += 1
        rep.add(f"radius_comparison_lam{int(lam)}", {"pairs": npairs},
                float(bad_ratio), bound=0.0, passed=bool(bad_ratio == 0))
        rep.add(f"center_distance_lam{int(lam)}", {"pairs": npairs},
                float(bad_dist), bound=0.0, passed=bool(bad_dist == 0))

    counts = np.zeros(space.n, dtype=int)
    for i in range(cover.k):
        big = cover.covered[d[cover.centers[i], cover.covered]
                            < cover.radii[i] / eps]
        counts[big] += 1
    rep.add("overlap_bound", {}, float(counts.max()), passed=None,
            notes="empirical max of the 1/eps-dilate multiplicity")
    return rep
