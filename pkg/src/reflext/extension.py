"""Extension of functions from a domain closure to the whole graph.

The operator keeps f on the closure of U and, on the exterior, takes the
partition-of-unity combination of m-weighted averages of f over the
3-dilates of reflected interior balls. It is assembled once into a sparse
matrix, so extension is exactly linear as an operator and restriction to the
closure is bitwise the identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .domains import DomainDecomposition
from .forms import PartitionOfUnity, energy_and_measure
from .reflection import ReflectionMap
from .report import CheckReport
from .space import ScaleFunction, Space
from .whitney import WhitneyCover


class UncoveredExteriorError(RuntimeError):
    pass


@dataclass
class ExtensionOperator:
    space: Space
    dom: DomainDecomposition
    refl: ReflectionMap
    partition: PartitionOfUnity
    coverR: WhitneyCover
    matrix: sp.csr_matrix      # n x n; rows on V combine closure values

    @cached_property
    def averaging_sets(self) -> dict[int, np.ndarray]:
        """Exterior ball index -> vertex set averaged for its image ball."""
        out = {}
        for j, i in self.refl.mapping.items():
            out[j] = self.coverR.dilate(i, 3.0)
        return out


def build_extension(space: Space, dom: DomainDecomposition,
                    refl: ReflectionMap, partition: PartitionOfUnity,
                    coverR: WhitneyCover) -> ExtensionOperator:
    if dom.V.size and not refl.mapping:
        raise UncoveredExteriorError(
            "exterior is nonempty but no exterior ball was mapped")
    rows, cols, vals = [], [], []
    m = space.measure
    for j, i in refl.mapping.items():
        avg_set = coverR.dilate(i, 3.0)
        wts = m[avg_set] / m[avg_set].sum()
        psi_j = partition.psis[j]
        support = np.flatnonzero(psi_j)
        for v in support:
            rows.extend([int(v)] * avg_set.size)
            cols.extend(int(u) for u in avg_set)
            vals.extend(psi_j[v] * wts)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(space.n, space.n)).tocsr()
    return ExtensionOperator(space, dom, refl, partition, coverR, mat)


def extend(op: ExtensionOperator, f: np.ndarray) -> np.ndarray:
    """Extend f (defined on the closure of U) to the whole vertex set."""
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f[op.dom.closure_U])):
        raise ValueError("f must be finite on the closure of U")
    fsafe = np.where(op.dom.in_closure, f, 0.0)
    g = np.where(op.dom.in_closure, f, 0.0)
    ext = op.matrix @ fsafe
    g[op.dom.V] = ext[op.dom.V]
    return g


def extension_checks(space: Space, dom: DomainDecomposition,
                     op: ExtensionOperator, family, psi: ScaleFunction,
                     locations, K: float, K0: float | None = None,
                     c_cap: float = 0.2) -> CheckReport:
    """Four boundedness ratios of the extension over a function family.

    Per function and location (x, r): local energy-measure ratio, local mass
    ratio, global energy ratio, and (boundary centers only) the cross-form
    variance ratio. Location radii must stay below c_cap * diam(U).
    Conventions: 0/0 counts as 0, finite/0 is an unbounded-ratio failure;
    quantities below float noise (1e-12 of the function's natural energy
    scale) count as zero.
    """
    rep = CheckReport("extension")
    if K0 is None:
        from .reflection import locality_K0
        K0 = locality_K0(op.refl.epsilon, op.refl.A)
    m = space.measure
    d = space.distance
    in_U = dom.in_U
    in_bdry = np.zeros(space.n, dtype=bool)
    in_bdry[dom.boundary] = True
    diam_U = dom.diam_U
    if any(r >= c_cap * diam_U for _, r in locations):
        raise ValueError(f"location radii must stay below {c_cap} * diam(U)")
    psi_diam = float(psi.psi(diam_U))
    maxima = {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0}
    unbounded = 0
    for fid, f in enumerate(family):
        f = np.asarray(f, dtype=float)
        g = extend(op, f)
        e_g, gamma_g = energy_and_measure(space, g)
        e_f, gamma_f = energy_and_measure(space, f, restrict_to=dom.closure_U)
        mass_U = float(np.sum(m[dom.U] * f[dom.U] ** 2))
        denom3 = e_f + mass_U / psi_diam
        floor = 1e-12 * (denom3 + 1e-300)
        r3 = _ratio(e_g, denom3, floor)
        maxima[3] = max(maxima[3], r3 if np.isfinite(r3) else maxima[3])
        if not np.isfinite(r3):
            unbounded += 1
        rep.add("global_energy", {"f": fid}, r3, passed=bool(np.isfinite(r3)))
        for (x, r) in locations:
            x, r = int(x), float(r)
            small = d[x] < r
            big_U = in_U & (d[x] < K * r)
            num1 = float(gamma_g[small].sum())
            den1 = float(gamma_f[big_U].sum())
            r1 = _ratio(num1, den1, floor)
            num2 = float(np.sum(m[small] * g[small] ** 2))
            den2 = float(np.sum(m[big_U] * f[big_U] ** 2))
            r2 = _ratio(num2, den2, floor)
            for key, val in ((1, r1), (2, r2)):
                if np.isfinite(val):
                    maxima[key] = max(maxima[key], val)
                else:
                    unbounded += 1
            rep.add("local_energy_measure", {"f": fid, "x": x, "r": r}, r1,
                    passed=bool(np.isfinite(r1)))
            rep.add("local_mass", {"f": fid, "x": x, "r": r}, r2,
                    passed=bool(np.isfinite(r2)))
            if in_bdry[x]:
                mass = m[small]
                alpha = float(np.sum(mass * g[small]) / mass.sum())
                num4 = float(np.sum(mass * (g[small] - alpha) ** 2))
                big0 = in_U & (d[x] < K0 * r)
                den4 = float(psi.psi(r)) * float(gamma_f[big0].sum())
                r4 = _ratio(num4, den4, floor)
                if np.isfinite(r4):
                    maxima[4] = max(maxima[4], r4)
                else:
                    unbounded += 1
                rep.add("boundary_variance", {"f": fid, "x": x, "r": r}, r4,
                        passed=bool(np.isfinite(r4)))
    for key, label in ((1, "local_energy_measure"), (2, "local_mass"),
                       (3, "global_energy"), (4, "boundary_variance")):
        rep.add(f"max_{label}", {"K": K, "K0": K0}, maxima[key], passed=None)
    rep.add("unbounded_ratios", {}, float(unbounded), bound=0.0,
            passed=bool(unbounded == 0))
    return rep


def _ratio(num: float, den: float, floor: float = 0.0) -> float:
    num = 0.0 if num <= floor else num
    den = 0.0 if den <= floor else den
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def boundary_energy(space: Space, dom: DomainDecomposition,
                    g: np.ndarray) -> tuple[float, float]:
    """Ambient energy measure charged to the boundary of U, absolute and
    relative to the total energy of g."""
    total, gamma = energy_and_measure(space, g)
    gb = float(gamma[dom.boundary].sum())
    return gb, (0.0 if total == 0.0 else gb / total)


# -- function families -------------------------------------------------------------


def function_family(space: Space, dom: DomainDecomposition, count: int,
                    seed: int = 0) -> list[np.ndarray]:
    """Deterministic test family on the closure: constant, coordinates, smooth
    random low-frequency fields, and capacitor potentials near the boundary."""
    from .forms import capacity_and_potential

    rng = np.random.default_rng(seed)
    n = space.n
    fam: list[np.ndarray] = [np.ones(n)]
    if space.coords is not None:
        scale = max(space.coords.max(), 1.0)
        fam.append(space.coords[:, 0] / scale)
        fam.append(space.coords[:, 1] / scale)
    else:
        fam.append(np.linspace(0.0, 1.0, n))

    n_cap = min(4, max(0, count - len(fam) - 4))
    step = max(1, dom.boundary.size // (n_cap + 1))
    r_cap = max(2.0 * space.h_min, dom.diam_U / 8.0)
    for c in dom.boundary[::step][:n_cap]:
        b1 = space.ball(int(c), r_cap)
        shell = space.ball(int(c), 3.0 * r_cap)
        if np.array_equal(np.sort(shell), np.arange(n)):
            continue
        _, u = capacity_and_potential(space, b1, shell)
        fam.append(u)

    if space.coords is not None:
        xs = space.coords[:, 0] / max(space.coords[:, 0].max(), 1.0)
        ys = space.coords[:, 1] / max(space.coords[:, 1].max(), 1.0)
        while len(fam) < count:
            kx, ky = rng.integers(1, 4, size=2)
            ax, ay = rng.normal(size=2)
            fam.append(ax * np.sin(np.pi * kx * xs) * np.cos(np.pi * ky * ys)
                       + ay * np.cos(np.pi * kx * xs))
    while len(fam) < count:
        fam.append(rng.normal(size=n))
    return fam[:count]
