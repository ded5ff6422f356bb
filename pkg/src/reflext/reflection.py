"""Reflection of small exterior cover balls to interior cover balls.

Each sufficiently small exterior ball is assigned an interior ball of
comparable radius at comparable distance by walking a uniform curve away from
the nearest boundary point until the clearance matches the exterior scale.
The construction is validated quantitatively: radius/distance windows for
every mapped pair, bounded multiplicity, ratio and chain bounds for images of
adjacent balls, and locality of the image under boundary-ball queries.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domains import DomainDecomposition, find_uniform_curve
from .report import CheckReport
from .space import Space
from .whitney import WhitneyCover, whitney_graph


@dataclass
class ReflectionWitness:
    z: int
    z1: int
    z2: int
    z3: int
    curve_ok: bool


@dataclass
class ReflectionMap:
    space: Space
    dom: DomainDecomposition
    coverR: WhitneyCover
    coverS: WhitneyCover
    A: float
    s_indices: np.ndarray          # exterior cover indices kept (the truncated set)
    mapping: dict[int, int]        # exterior index -> interior index
    witnesses: dict[int, ReflectionWitness]
    excluded: list[tuple[int, str]] = field(default_factory=list)

    @property
    def epsilon(self) -> float:
        return self.coverS.epsilon

    @cached_property
    def k_to_1(self) -> int:
        if not self.mapping:
            return 0
        counts: dict[int, int] = {}
        for r in self.mapping.values():
            counts[r] = counts.get(r, 0) + 1
        return max(counts.values())

    def to_json_dict(self) -> dict:
        return {
            "pairs": [[int(s), int(r)] for s, r in sorted(self.mapping.items())],
            "witnesses": {
                str(s): [int(w.z), int(w.z1), int(w.z2), int(w.z3)]
                for s, w in sorted(self.witnesses.items())
            },
            "excluded": [[int(s), reason] for s, reason in self.excluded],
        }


def prefa_windows(eps: float, A: float) -> tuple[float, float, float]:
    """(radius lower, radius upper, distance factor) for mapped pairs, as
    multiples of the exterior radius s."""
    return ((1.0 + eps) / (1.0 + 4.0 * eps),
            (1.0 + eps) / (1.0 - 2.0 * eps),
            (2.0 + 1.5 * A) * (1.0 + eps) / eps)


def rcomp_window(eps: float) -> tuple[float, float]:
    lo = (1.0 - 2.0 * eps) * (1.0 - 5.0 * eps) / ((1.0 + 4.0 * eps) * (1.0 + 7.0 * eps))
    return lo, 1.0 / lo


def srbnd_factor(eps: float) -> float:
    return eps / (1.0 - 5.0 * eps)


def locality_K0(eps: float, A: float) -> float:
    """Dilation factor locating images of exterior balls near a boundary ball."""
    return ((2.0 + 1.5 * A) * (1.0 + eps) / (1.0 - 5.0 * eps)
            + 6.0 * eps / (1.0 - 5.0 * eps) + 1.0)


def truncation_threshold(eps: float, A: float, diam_U: float) -> float:
    return eps / (6.0 * A * (1.0 + eps)) * diam_U


def build_reflection(space: Space, dom: DomainDecomposition,
                     coverR: WhitneyCover, coverS: WhitneyCover,
                     A: float) -> ReflectionMap:
    """Construct the exterior-to-interior ball map.

    For each kept exterior ball: z is the nearest boundary vertex to its
    center (the minimum is attained on the exterior boundary), z1 the nearest
    interior vertex to z, z2 an interior vertex far enough from z, and z3 the
    first vertex along a uniform curve z1 -> z2 whose clearance reaches the
    exterior scale (one-mesh-unit relaxation of the continuum equality). The
    image is the lowest-index interior ball whose augmented 3-dilate holds z3.
    Balls without an admissible z2 or z3 are excluded with a logged reason.
    """
    eps = coverS.epsilon
    if abs(coverR.epsilon - eps) > 1e-15:
        raise ValueError("interior and exterior covers must share eps")
    if not (0.0 < eps < 0.2):
        raise ValueError("reflection requires eps in (0, 1/5)")
    if coverR.side != "interior" or coverS.side != "exterior":
        raise ValueError("expected (interior, exterior) cover pair")

    if dom.V.size == 0:
        return ReflectionMap(space, dom, coverR, coverS, A,
                             np.array([], dtype=int), {}, {})

    d = space.distance
    diam_U = dom.diam_U
    thr = truncation_threshold(eps, A, diam_U)
    kept = [j for j in range(coverS.k) if coverS.radii[j] < thr]

    bdry_V = _exterior_boundary(space, dom)
    mapping: dict[int, int] = {}
    witnesses: dict[int, ReflectionWitness] = {}
    excluded: list[tuple[int, str]] = []
    s_kept = []
    for j in kept:
        y, s = int(coverS.centers[j]), float(coverS.radii[j])
        target = (1.0 + eps) / eps * s  # equals delta_V(y) by the radius law
        z = int(bdry_V[np.lexsort((bdry_V, d[y, bdry_V]))[0]])
        z1 = int(dom.U[np.lexsort((dom.U, d[z, dom.U]))[0]])
        need = 2.5 * A * s * (1.0 + eps) / eps
        far = dom.U[d[z, dom.U] >= need]
        if far.size == 0:
            excluded.append((j, "no admissible far anchor at this scale"))
            continue
        z2 = int(far[np.lexsort((far, d[z, far]))[0]])
        curve = find_uniform_curve(space, dom, z1, z2, A)
        hit = np.flatnonzero(dom.delta_full[curve.path] >= target * (1.0 - 1e-12))
        if hit.size == 0:
            excluded.append((j, "curve never reaches the target clearance"))
            continue
        z3 = int(curve.path[int(hit[0])])
        owners = coverR.true_cover_of[z3]
        if not owners:
            raise AssertionError(
                "open 3-dilates must cover the domain (maximal packing)")
        i = min(owners)
        mapping[j] = i
        witnesses[j] = ReflectionWitness(z, z1, z2, z3, curve.meets_target)
        s_kept.append(j)

    return ReflectionMap(space, dom, coverR, coverS, A,
                         np.array(s_kept, dtype=int), mapping, witnesses, excluded)


def _exterior_boundary(space: Space, dom: DomainDecomposition) -> np.ndarray:
    """Vertices outside V with an edge into V (a subset of the boundary of U)."""
    out = sorted({
        (v if dom.in_V[u] else u)
        for (u, v, _, _) in space.edges
        if dom.in_V[u] != dom.in_V[v]
    })
    return np.array(out, dtype=int)


def s_near(coverS: WhitneyCover, ball_vertices: np.ndarray) -> list[int]:
    """Exterior cover balls whose 6-dilates meet the given vertex set."""
    mask = np.zeros(coverS.space.n, dtype=bool)
    mask[ball_vertices] = True
    return [j for j in range(coverS.k) if mask[coverS.dilate(j, 6.0)].any()]


def validate_reflection(space: Space, dom: DomainDecomposition,
                        refl: ReflectionMap, coverS: WhitneyCover,
                        coverR: WhitneyCover, boundary_samples=None,
                        pair_sample: int = 400, seed: int = 0) -> CheckReport:
    """Quantitative validation of a built reflection map.

    Checks, in order: the radius/distance windows for every mapped pair, the
    empirical multiplicity, the ratio window plus interior chains for images
    of adjacent exterior balls, a sampled Lipschitz constant of the map with
    respect to the cover-graph metrics, the exterior radius bound inside
    boundary balls, and the locality of the image set under boundary balls.
    """
    eps, A = refl.epsilon, refl.A
    rep = CheckReport("reflection")
    d = space.distance
    lo, hi, dist_f = prefa_windows(eps, A)

    bad = 0
    for j, i in refl.mapping.items():
        s = coverS.radii[j]
        r = coverR.radii[i]
        dxy = d[coverR.centers[i], coverS.centers[j]]
        if not (lo * s < r < hi * s and dxy <= dist_f * s):
            bad += 1
    rep.add("pair_windows", {"mapped": len(refl.mapping)}, float(bad),
            bound=0.0, passed=bool(bad == 0))

    rep.add("k_to_1", {}, float(refl.k_to_1), passed=None,
            notes="empirical max preimage size")

    gS = whitney_graph(coverS)
    gR = whitney_graph(coverR)
    rlo, rhi = rcomp_window(eps)
    in_til = set(int(j) for j in refl.s_indices)
    bad_ratio = 0
    chain_lengths = []
    missing_chain = 0
    metric_pairs = _metric_pairs(coverS, 6.0)
    for a, b in gS.edges:
        if a not in in_til or b not in in_til:
            continue
        ia, ib = refl.mapping[a], refl.mapping[b]
        if (a, b) in metric_pairs:
            ra, rb = coverR.radii[ia], coverR.radii[ib]
            if not (rlo * rb <= ra <= rhi * rb):
                bad_ratio += 1
        if ia == ib:
            chain_lengths.append(1)
        else:
            hops = gR.dist[ia, ib]
            if hops < 0:
                missing_chain += 1
            else:
                chain_lengths.append(int(hops) + 1)
    n0 = max(chain_lengths) if chain_lengths else 0
    rep.add("adjacent_image_ratio", {"window": [rlo, rhi]}, float(bad_ratio),
            bound=0.0, passed=bool(bad_ratio == 0))
    rep.add("adjacent_image_chain", {"max_balls": n0}, float(missing_chain),
            bound=0.0, passed=bool(missing_chain == 0),
            notes="empirical chain bound over adjacent exterior pairs")

    rng = np.random.default_rng(seed)
    til = [int(j) for j in refl.s_indices]
    lip = 0.0
    if len(til) >= 2:
        for _ in range(pair_sample):
            a, b = rng.choice(til, size=2, replace=False)
            ds = gS.dist[a, b]
            if ds <= 0:
                continue
            dr = gR.dist[refl.mapping[a], refl.mapping[b]]
            if dr >= 0:
                lip = max(lip, dr / ds)
    rep.add("lipschitz", {"pairs": pair_sample}, lip, passed=None,
            notes="sampled D_R(Q.,Q.)/D_S(.,.) maximum")

    if boundary_samples is None:
        boundary_samples = _default_boundary_samples(space, dom)
    sfac = srbnd_factor(eps)
    K0 = locality_K0(eps, A)
    bad_s = bad_loc = 0
    for xi, r in boundary_samples:
        ball = space.ball(int(xi), float(r))
        for j in s_near(coverS, ball):
            if coverS.radii[j] >= sfac * r:
                bad_s += 1
            if j in refl.mapping:
                i = refl.mapping[j]
                dil = coverR.dilate(i, 3.0)
                big = space.ball(int(xi), K0 * float(r), within=dom.U)
                inter = np.intersect1d(dil, big, assume_unique=False)
                if inter.size == 0:
                    bad_loc += 1
    rep.add("exterior_radius_bound", {"factor": sfac}, float(bad_s),
            bound=0.0, passed=bool(bad_s == 0))
    rep.add("image_locality_K0", {"K0": K0}, float(bad_loc),
            bound=0.0, passed=bool(bad_loc == 0))
    return rep


def _metric_pairs(cover: WhitneyCover, lam: float) -> set[tuple[int, int]]:
    incident: list[list[int]] = [[] for _ in range(cover.space.n)]
    for i in range(cover.k):
        for v in cover.dilate(i, lam):
            incident[v].append(i)
    pairs: set[tuple[int, int]] = set()
    for lst in incident:
        for a in range(len(lst)):
            for b in range(a + 1, len(lst)):
                pairs.add((lst[a], lst[b]))
    return pairs


def _default_boundary_samples(space: Space, dom: DomainDecomposition,
                              n_centers: int = 5) -> list[tuple[int, float]]:
    step = max(1, dom.boundary.size // n_centers)
    centers = dom.boundary[::step][:n_centers]
    rmax = dom.diam_U / 3.0
    radii = [r for r in (2.0, 4.0, 8.0, 16.0) if r <= rmax] or [rmax / 2.0]
    return [(int(c), float(r)) for c in centers for r in radii]
