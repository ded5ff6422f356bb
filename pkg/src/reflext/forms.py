"""Discrete Dirichlet forms on a weighted graph.

Conventions: energy E(f) = sum_e w_e (f(u)-f(v))^2, vertex energy measure
gamma(x) = (1/2) sum_{y~x} w_xy (f(x)-f(y))^2, generator
(Lf)(x) = (1/m(x)) sum_y w_xy (f(x)-f(y)) and kernel
p_t(x,y) = (e^{-tL})_{xy}/m(y), so the semigroup is conservative and
m-symmetric. All solvers are dense or sparse-direct; the dense
eigendecomposition is cached per space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .report import CheckReport
from .space import Ball, ScaleFunction, Space


class InvalidFunctionError(ValueError):
    pass


# -- energy and energy measure --------------------------------------------------


def energy_and_measure(space: Space, f: np.ndarray,
                       restrict_to=None) -> tuple[float, np.ndarray]:
    """Dirichlet energy and its vertex-split energy measure.

    With ``restrict_to`` given, only edges with both endpoints inside the
    subset contribute (the restricted, Neumann-type form).
    """
    f = np.asarray(f, dtype=float)
    u, v, w = space.edge_u, space.edge_v, space.edge_w
    if restrict_to is not None:
        mask = np.zeros(space.n, dtype=bool)
        mask[np.asarray(restrict_to, dtype=int)] = True
        keep = mask[u] & mask[v]
        u, v, w = u[keep], v[keep], w[keep]
    if not (np.all(np.isfinite(f[u])) and np.all(np.isfinite(f[v]))):
        raise InvalidFunctionError("function must be finite on admissible edges")
    e2 = w * (f[u] - f[v]) ** 2
    gamma = np.zeros(space.n)
    np.add.at(gamma, u, 0.5 * e2)
    np.add.at(gamma, v, 0.5 * e2)
    return float(e2.sum()), gamma


def laplacian_csr(space: Space) -> sp.csr_matrix:
    """Conductance Laplacian K with K f = (degree terms) - (neighbor sums)."""
    W = space.conductance_csr
    deg = np.asarray(W.sum(axis=1)).ravel()
    return (sp.diags(deg) - W).tocsr()


# -- heat kernel -----------------------------------------------------------------


@dataclass
class HeatKernelMatrix:
    t: float
    values: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # columns, m-orthonormal

    def __getitem__(self, xy):
        return self.values[xy]


def spectral_decomposition(space: Space) -> tuple[np.ndarray, np.ndarray]:
    """m-orthonormal eigensystem of the generator, cached on the space."""
    cached = getattr(space, "_spectral_cache", None)
    if cached is not None:
        return cached
    K = laplacian_csr(space).toarray()
    root = np.sqrt(space.measure)
    A = K / root[:, None] / root[None, :]
    lam, V = sla.eigh(A)
    lam = np.maximum(lam, 0.0)
    phi = V / root[:, None]
    space._spectral_cache = (lam, phi)
    return lam, phi


def heat_kernel(space: Space, t: float,
                validate: bool = True) -> HeatKernelMatrix:
    if t <= 0:
        raise ValueError("time must be positive")
    lam, phi = spectral_decomposition(space)
    values = (phi * np.exp(-lam * t)) @ phi.T
    values = 0.5 * (values + values.T)
    if validate:
        if values.min() < -1e-12:
            raise AssertionError(f"kernel negativity {values.min()} below -1e-12")
        row = values @ space.measure
        if np.max(np.abs(row - 1.0)) > 1e-9:
            raise AssertionError("kernel mass is not conserved to 1e-9")
    return HeatKernelMatrix(float(t), values, lam, phi)


def kernel_entries(space: Space, t: float, pairs) -> np.ndarray:
    """p_t at selected (x, y) pairs via sparse matrix exponential columns.

    Avoids the dense eigensolve for large spaces; columns of e^{-tL} are
    computed for the distinct y's.
    """
    K = laplacian_csr(space)
    Lop = sp.diags(1.0 / space.measure) @ K
    ys = sorted({int(y) for _, y in pairs})
    cols = np.zeros((space.n, len(ys)))
    for j, y in enumerate(ys):
        cols[y, j] = 1.0
    ecols = spla.expm_multiply(-t * Lop.tocsc(), cols)
    at = {y: j for j, y in enumerate(ys)}
    return np.array([ecols[int(x), at[int(y)]] / space.measure[int(y)]
                     for x, y in pairs])


# -- Poincare constant -------------------------------------------------------------


def poincare_constant(space: Space, variance_ball: Ball, energy_ball,
                      psi: ScaleFunction) -> float:
    """Sharp constant sup_f Var(f; inner) / (psi(r) * E(f; outer)).

    Computed as the top generalized eigenvalue of the m-weighted centered
    covariance form against the induced-subgraph energy form. Returns +inf
    when the energy set is disconnected in the induced subgraph.
    """
    inner = np.asarray(variance_ball.members, dtype=int)
    outer = np.asarray(energy_ball.members if isinstance(energy_ball, Ball)
                       else energy_ball, dtype=int)
    outer = np.sort(outer)
    if not np.all(np.isin(inner, outer)):
        raise ValueError("variance set must sit inside the energy set")
    pos = {int(v): i for i, v in enumerate(outer)}
    keep = [(u, v, w) for (u, v, _, w) in space.edges
            if u in pos and v in pos]
    k = outer.size
    if k < 2:
        return 0.0
    L = np.zeros((k, k))
    for u, v, w in keep:
        a, b = pos[u], pos[v]
        L[a, a] += w
        L[b, b] += w
        L[a, b] -= w
        L[b, a] -= w
    if not _laplacian_connected(L):
        return float("inf")
    mloc = np.zeros(k)
    for v in inner:
        mloc[pos[int(v)]] = space.measure[int(v)]
    C = np.diag(mloc) - np.outer(mloc, mloc) / mloc.sum()
    Cg, Lg = C[1:, 1:], L[1:, 1:]
    top = sla.eigh(Cg, Lg, subset_by_index=[k - 2, k - 2], eigvals_only=True)[0]
    return float(top) / float(psi.psi(variance_ball.radius))


def _laplacian_connected(L: np.ndarray) -> bool:
    k = L.shape[0]
    adj = sp.csr_matrix((L != 0) & ~np.eye(k, dtype=bool))
    from scipy.sparse.csgraph import connected_components
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


# -- capacity -----------------------------------------------------------------------


def capacity_and_potential(space: Space, B1, shell) -> tuple[float, np.ndarray]:
    """Equilibrium potential: 1 on B1, 0 off the shell, harmonic in between.

    Returns the capacity E(u,u) and the full potential vector. The harmonic
    region may be empty (all boundary edges cut).
    """
    B1 = np.asarray(sorted(set(int(v) for v in B1)), dtype=int)
    if B1.size == 0:
        raise ValueError("B1 must be nonempty")
    in_shell = np.zeros(space.n, dtype=bool)
    in_shell[np.asarray(shell, dtype=int)] = True
    if not in_shell[B1].all():
        raise ValueError("B1 must sit inside the shell")
    u = np.zeros(space.n)
    u[B1] = 1.0
    in_b1 = np.zeros(space.n, dtype=bool)
    in_b1[B1] = True
    H = np.flatnonzero(in_shell & ~in_b1)
    if H.size:
        K = laplacian_csr(space)
        fixed = np.flatnonzero(~in_shell | in_b1)
        KHH = K[H][:, H]
        rhs = -K[H][:, fixed] @ u[fixed]
        u[H] = spla.spsolve(KHH.tocsc(), rhs)
        u = np.clip(u, 0.0, 1.0)
    cap, _ = energy_and_measure(space, u)
    return cap, u


# -- partition of unity ---------------------------------------------------------------


@dataclass
class PartitionOfUnity:
    psis: list[np.ndarray]     # one full vector per exterior cover ball, 0 off V
    c1: float                  # min of psi_B over its 3-dilate
    C1: float                  # max of E(psi_B) * Psi(s)/m(B)
    report: CheckReport


def partition_of_unity(space: Space, dom, cover, psi: ScaleFunction) -> PartitionOfUnity:
    """Capacitor-potential partition of unity subordinate to the exterior cover.

    Each raw bump is the potential of (3B ∩ V) against the complement of
    (6B ∩ V) inside the V-induced graph; normalization enforces the exact
    partition property on V.
    """
    if cover.side != "exterior":
        raise ValueError("partition of unity is built over the exterior cover")
    if not (0 < cover.epsilon < 1.0 / 6.0):
        raise ValueError("partition requires eps < 1/6")
    V = dom.V
    if V.size == 0:
        raise ValueError("exterior is empty")
    in_V = dom.in_V
    KV_edges = [(u, v, w) for (u, v, _, w) in space.edges if in_V[u] and in_V[v]]
    K = sp.lil_matrix((space.n, space.n))
    for u, v, w in KV_edges:
        K[u, u] += w
        K[v, v] += w
        K[u, v] -= w
        K[v, u] -= w
    K = K.tocsr()

    raws = []
    for i in range(cover.k):
        b3 = cover.dilate(i, 3.0)
        b6 = cover.dilate(i, 6.0)
        u = np.zeros(space.n)
        u[b3] = 1.0
        in_b6 = np.zeros(space.n, dtype=bool)
        in_b6[b6] = True
        in_b3 = np.zeros(space.n, dtype=bool)
        in_b3[b3] = True
        H = np.flatnonzero(in_V & in_b6 & ~in_b3)
        if H.size:
            fixed = np.flatnonzero(in_b3 | ~(in_V & in_b6))
            KHH = K[H][:, H]
            rhs = -(K[H][:, fixed] @ u[fixed])
            u[H] = spla.spsolve(KHH.tocsc(), rhs)
            u = np.clip(u, 0.0, 1.0)
        raws.append(u)

    total = np.sum(raws, axis=0)
    if np.any(total[V] <= 0):
        raise AssertionError("some exterior vertex is covered by no 3-dilate")
    psis = []
    for u in raws:
        p = np.zeros(space.n)
        p[V] = u[V] / total[V]
        psis.append(p)

    rep = CheckReport("partition")
    ssum = np.sum(psis, axis=0)
    err = float(np.max(np.abs(ssum[V] - 1.0)))
    rep.add("partition_sum", {}, err, bound=1e-12, passed=bool(err <= 1e-12))
    rng_ok = all(p.min() >= 0.0 and p.max() <= 1.0 + 1e-12 for p in psis)
    rep.add("range", {}, None, passed=bool(rng_ok))
    c1 = 1.0
    C1 = 0.0
    supp_ok = True
    for i, p in enumerate(psis):
        b3 = cover.dilate(i, 3.0)
        b6 = cover.dilate(i, 6.0)
        out6 = np.ones(space.n, dtype=bool)
        out6[b6] = False
        supp_ok = supp_ok and not np.any(p[out6] != 0.0)
        if b3.size:
            c1 = min(c1, float(p[b3].min()))
        en, _ = energy_and_measure(space, p)
        mb = space.mass(cover.members[i])
        C1 = max(C1, en * float(psi.psi(cover.radii[i])) / mb)
    rep.add("support_in_6B", {}, None, passed=bool(supp_ok))
    rep.add("lower_bound_c1", {}, c1, passed=None,
            notes="reported minimum over 3-dilates")
    rep.add("energy_bound_C1", {}, C1, passed=None,
            notes="reported max of E(psi)*Psi(s)/m(B)")
    return PartitionOfUnity(psis, c1, C1, rep)


# -- Besov-type functional ---------------------------------------------------------------


def besov_functional(space: Space, f: np.ndarray, r: float, psi: ScaleFunction,
                     restrict_outer=None) -> float:
    """Two-point energy proxy W(f, r): averaged squared increments over open
    r-balls, normalized by psi(r); the outer sum optionally restricted."""
    if r <= 0:
        raise ValueError("radius must be positive")
    f = np.asarray(f, dtype=float)
    m = space.measure
    mask = space.distance < r
    mB = mask @ m
    mf = m * f
    mf2 = m * f * f
    inner = f * f * mB - 2.0 * f * (mask @ mf) + mask @ mf2
    terms = m * inner / mB
    if restrict_outer is not None:
        sel = np.zeros(space.n, dtype=bool)
        sel[np.asarray(restrict_outer, dtype=int)] = True
        terms = terms[sel]
    return float(terms.sum() / psi.psi(r))


def phi_from_psi(psi: ScaleFunction, s: float) -> float:
    """Closed-form transform sup_r (s/r - 1/psi(r)); cross-checked at psi build."""
    return psi.phi(s)


# -- exit times ---------------------------------------------------------------------------


def mean_exit_time(space: Space, B) -> np.ndarray:
    """Expected exit time of the continuous-time walk from the vertex set B.

    Solves L u = 1 on B with u = 0 outside, i.e. K u = m on B for the
    conductance Laplacian K.
    """
    B = np.asarray(sorted(set(int(v) for v in B)), dtype=int)
    if B.size == space.n:
        raise ValueError("exit set must be a proper subset")
    if B.size == 0:
        return np.zeros(space.n)
    K = laplacian_csr(space)
    u = np.zeros(space.n)
    KBB = K[B][:, B]
    u[B] = spla.spsolve(KBB.tocsc(), space.measure[B])
    return u


# -- cutoff energy inequality ----------------------------------------------------------------


def css_check(space: Space, x: int, R: float, A1: float, psi: ScaleFunction,
              family, subset=None, A2: float = 4.0) -> tuple[float, CheckReport]:
    """Minimal constant making the cutoff energy inequality hold over a family.

    The cutoff is the capacitor potential of B(x,R) against the complement of
    B(x, A1*R) in the selected form (ambient, or the subset-restricted form
    with its intrinsic metric). For each f the constant is
    sum f^2 dGamma(phi) / (sum dGamma(f) + (1/psi(R)) sum f^2 dm), all sums
    over the dilated ball; 0/0 counts as 0.
    """
    work = space
    fam = [np.asarray(f, dtype=float) for f in family]
    xw = int(x)
    if subset is not None:
        work, back = space.subspace(subset)
        pos = {int(v): i for i, v in enumerate(back)}
        xw = pos[int(x)]
        fam = [f[back] for f in fam]
    if not (R < work.diameter / A2):
        raise ValueError("need R < diam/A2")
    rep = CheckReport("css")
    big = work.ball(xw, A1 * R)
    if big.size == work.n:
        rep.add("css", {"x": int(x), "R": R}, 0.0, passed=True,
                notes="degenerate: dilated ball is the whole space")
        return 0.0, rep
    B1 = work.ball(xw, R)
    _, phi = capacity_and_potential(work, B1, big)
    _, gphi = energy_and_measure(work, phi)
    sel = np.zeros(work.n, dtype=bool)
    sel[big] = True
    worst = 0.0
    for j, f in enumerate(fam):
        lhs = float(np.sum(f[sel] ** 2 * gphi[sel]))
        _, gf = energy_and_measure(work, f)
        eterm = float(gf[sel].sum())
        mterm = float(np.sum(f[sel] ** 2 * work.measure[sel])) / float(psi.psi(R))
        denom = eterm + mterm
        c = 0.0 if (lhs == 0.0 and denom == 0.0) else lhs / denom
        worst = max(worst, c)
        rep.add("css", {"x": int(x), "R": R, "f": j}, c, passed=None)
    rep.add("css_minimal_C1", {"x": int(x), "R": R}, worst, passed=None)
    return worst, rep
