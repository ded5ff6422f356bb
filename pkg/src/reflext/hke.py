"""Heat-kernel profiles, exit-time scaling fits, and the reflected space.

Profiles are taken inside the scale window where the graph resolves the
continuum: times between psi(4 h_min) and psi(diam/4), off-diagonal pairs no
farther than a third of the diameter. On-diagonal values are normalized by
the ball mass at the space-time scale; their envelope and the decay of the
normalized off-diagonal values against the transform variable are reported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import DomainDecomposition
from .forms import heat_kernel, kernel_entries, mean_exit_time
from .space import ScaleFunction, Space


class WindowError(ValueError):
    pass


class InsufficientScalesError(ValueError):
    pass


def reflected_space(space: Space, dom: DomainDecomposition) -> tuple[Space, np.ndarray]:
    """Induced space on the closure of U with its intrinsic metric.

    Returns the sub-space and the map from its indices to parent indices.
    """
    sub, back = space.subspace(dom.closure_U, name=f"{space.name}|reflected")
    return sub, back


def scale_window(space: Space, psi: ScaleFunction) -> tuple[float, float]:
    lo = float(psi.psi(4.0 * space.h_min))
    hi = float(psi.psi(space.diameter / 4.0))
    if lo > hi * (1.0 + 1e-12):
        raise WindowError("no admissible time window: space too small")
    return lo, hi


@dataclass
class HKEProfile:
    t_grid: np.ndarray
    x_sample: np.ndarray
    on_diag: np.ndarray            # shape (len(t), len(x))
    off_diag: list[tuple[float, int, int, float, float]]  # (t, x, y, p, d)
    c_low: float
    C_high: float
    near_pairs: int
    near_ok: int
    fit_slope: float

    @property
    def envelope_ratio(self) -> float:
        return self.C_high / self.c_low


def hke_profile(space: Space, psi: ScaleFunction, t_grid, x_sample,
                delta: float = 0.25) -> HKEProfile:
    """Kernel profile over a (t, x) grid inside the admissible window."""
    lo, hi = scale_window(space, psi)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t_grid < lo * (1.0 - 1e-9)) or np.any(t_grid > hi * (1.0 + 1e-9)):
        raise WindowError("t grid leaves the admissible window")
    x_sample = np.asarray(x_sample, dtype=int)
    if x_sample.size == 0:
        raise ValueError("x sample must be nonempty")

    d = space.distance
    m = space.measure
    dmax = space.diameter / 3.0
    on = np.zeros((t_grid.size, x_sample.size))
    off: list[tuple[float, int, int, float, float]] = []
    near_pairs = near_ok = 0
    ys, zs = [], []
    for it, t in enumerate(t_grid):
        kern = heat_kernel(space, float(t))
        rad = float(psi.psi_inv(t))
        mB = np.array([m[d[x] < rad].sum() for x in x_sample])
        on[it] = kern.values[x_sample, x_sample] * mB
        for a, x in enumerate(x_sample):
            for y in x_sample:
                dist = d[x, y]
                if dist <= 0 or dist > dmax:
                    continue
                p = float(kern.values[x, y])
                off.append((float(t), int(x), int(y), p, float(dist)))
                if p > 0:
                    ys.append(np.log(p * mB[a]))
                    zs.append(float(t) * psi.phi(dist / float(t)))
        c_low_t = on[it].min()
        for a, x in enumerate(x_sample):
            close = x_sample[(d[x, x_sample] > 0)
                             & (d[x, x_sample] <= delta * rad)]
            for y in close:
                near_pairs += 1
                if kern.values[x, y] * mB[a] >= 0.5 * c_low_t:
                    near_ok += 1

    c_low, C_high = float(on.min()), float(on.max())
    if c_low <= 0:
        raise AssertionError("on-diagonal profile must be positive in the window")
    slope = float("nan")
    if len(ys) >= 2 and np.ptp(zs) > 0:
        slope = float(np.polyfit(zs, ys, 1)[0])
    return HKEProfile(t_grid, x_sample, on, off, c_low, C_high,
                      near_pairs, near_ok, slope)


def beta_fit(space: Space, radii, x_sample) -> tuple[float, float]:
    """Exit-time scaling exponent: per-center slope of log exit time against
    log radius, averaged over the sample."""
    radii = np.sort(np.asarray(radii, dtype=float))
    lo, hi = space.h_min, space.diameter / 2.0
    usable = radii[(radii >= lo) & (radii <= hi)]
    if usable.size < 3:
        raise InsufficientScalesError(
            f"need >= 3 usable scales in [{lo}, {hi}], got {usable.size}")
    x_sample = np.asarray(x_sample, dtype=int)
    slopes, rsq = [], []
    for x in x_sample:
        times = []
        for r in usable:
            ball = space.ball(int(x), float(r))
            if ball.size == space.n:
                raise InsufficientScalesError("ball swallows the space")
            times.append(mean_exit_time(space, ball)[x])
        ly, lx = np.log(times), np.log(usable)
        b, a = np.polyfit(lx, ly, 1)
        fit = b * lx + a
        ss_res = float(np.sum((ly - fit) ** 2))
        ss_tot = float(np.sum((ly - ly.mean()) ** 2))
        slopes.append(b)
        rsq.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
    return float(np.mean(slopes)), float(np.mean(rsq))


def deep_interior_ratio(space: Space, dom: DomainDecomposition,
                        psi: ScaleFunction, t: float,
                        max_points: int = 8) -> list[tuple[int, float]]:
    """Reflected-over-ambient on-diagonal kernel ratio at deep interior points
    (clearance above four space-time radii), via sparse exponential columns."""
    rad = float(psi.psi_inv(t))
    deep = dom.U[dom.delta_full[dom.U] > 4.0 * rad]
    if deep.size == 0:
        return []
    if deep.size > max_points:
        step = deep.size // max_points
        deep = deep[::step][:max_points]
    sub, back = reflected_space(space, dom)
    pos = {int(v): i for i, v in enumerate(back)}
    amb = kernel_entries(space, t, [(int(x), int(x)) for x in deep])
    ref = kernel_entries(sub, t, [(pos[int(x)], pos[int(x)]) for x in deep])
    return [(int(x), float(rp / ap)) for x, ap, rp in zip(deep, amb, ref)]
