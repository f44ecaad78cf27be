"""The limiting zero measure ``mu`` with ``mu(D_r) = I'(log r)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .conjugate import ConjugateProfile, conjugate, conjugate_values
from .rng import uniform_block
from .schedule import INF, RadialProfile


@dataclass(frozen=True, eq=False)
class LimitMeasure:
    """Rotationally invariant limit measure, tabulated up to ``window``.

    Masses are raw (``mu(D_r) = I'(log r)``); ``total_mass_window`` is the
    normalizer for window-restricted comparisons.
    """

    profile: RadialProfile
    conj: ConjugateProfile = field(repr=False)
    window: float
    atoms: List[Tuple[float, float]]
    gaps: List[Tuple[float, float]]
    total_mass_window: float

    @property
    def h(self) -> float:
        return self.conj.h

    def radial_cdf(self, r, side: str = "left"):
        return radial_cdf(self, r, side)

    def density(self, z):
        return density(self, z)


def _default_s_lo(profile: RadialProfile, s_hi: float) -> float:
    _, top = conjugate_values(profile, np.array([s_hi]))
    ref = max(float(top[0]), 1e-300)
    s_lo = min(-8.0, s_hi - 8.0)
    while s_lo > -200.0:
        _, d = conjugate_values(profile, np.array([s_lo]))
        if d[0] <= 1e-8 * ref:
            break
        s_lo -= 8.0
    return s_lo


def limit_measure(
    profile: RadialProfile,
    window: float,
    h: float = 1e-3,
    s_lo: Optional[float] = None,
) -> LimitMeasure:
    """Tabulate the limit measure of ``profile`` on the disk of radius ``window``."""
    if not window > 0:
        raise ValueError("window must be positive")
    if window >= profile.r0:
        raise ValueError("window must lie inside the convergence disk")
    s_hi = math.log(window) + 5 * h
    if math.isfinite(profile.r0):
        s_hi = min(s_hi, 0.5 * (math.log(window) + math.log(profile.r0)))
    if s_lo is None:
        s_lo = _default_s_lo(profile, s_hi)
    cp = conjugate(profile, s_lo, s_hi, h)
    atoms = [(math.exp(loc), size) for loc, size in cp.jumps if loc < s_hi]
    gaps = [
        (0.0 if math.isinf(lo) else math.exp(lo), INF if math.isinf(hi) else math.exp(hi))
        for lo, hi, _ in cp.flats
    ]
    lm = LimitMeasure(profile, cp, float(window), atoms, gaps, 0.0)
    total = float(radial_cdf(lm, window))
    object.__setattr__(lm, "total_mass_window", total)
    return lm


def radial_cdf(lm: LimitMeasure, r, side: str = "left"):
    """Mass of the open (``side='left'``) or closed (``'right'``) disk of radius ``r``.

    Linear in ``log r`` between grid nodes, stepping exactly at detected jumps.
    Below the grid the mass is extrapolated as ``F(r0) (r/r0)^2``.
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r >= lm.profile.r0):
        raise ValueError("r must be below the convergence radius")
    cp = lm.conj
    s_nodes, d = cp.s_grid, cp.left_deriv
    with np.errstate(divide="ignore"):
        s = np.log(r)
    if np.any(s > s_nodes[-1] + 1e-12):
        raise ValueError("r beyond the tabulated window")
    out = np.empty_like(s)
    below = s <= s_nodes[0]
    out[below] = d[0] * np.exp(2.0 * (s[below] - s_nodes[0]))
    inside = ~below
    si = s[inside]
    idx = np.clip(np.searchsorted(s_nodes, si, side="left"), 1, len(s_nodes) - 1)
    s0, s1 = s_nodes[idx - 1], s_nodes[idx]
    d0, d1 = d[idx - 1], d[idx]
    w = (si - s0) / (s1 - s0)
    val = d0 + w * (d1 - d0)
    for loc, _ in cp.jumps:
        tol = 64 * np.finfo(float).eps * max(1.0, abs(loc))
        k = int(np.clip(np.searchsorted(s_nodes, loc + tol, side="right"), 1, len(s_nodes) - 1))
        here = (si >= s_nodes[k - 1]) & (si <= s_nodes[k])
        if side == "left":
            step = np.where(si <= loc + tol, d[k - 1], d[k])
        else:
            step = np.where(si < loc - tol, d[k - 1], d[k])
        val = np.where(here, step, val)
        # radii within rounding of the atom circle sit on it
        near = np.abs(si - loc) <= tol
        if near.any():
            j = max(int(np.searchsorted(s_nodes, loc - tol, side="left")) - 1, 0)
            val = np.where(near, d[j] if side == "left" else d[k], val)
    out[inside] = val
    return float(out[0]) if scalar else out


def _exact_left_derivative(profile, s):
    return conjugate_values(profile, s)[1]


def density(lm: LimitMeasure, z):
    """Density ``I''(log|z|) / (2 pi |z|^2)`` of the absolutely continuous part.

    ``I''`` comes from centered differences of the exact left derivative at
    steps ``h`` and ``h/2``, combined by Richardson extrapolation.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    rr = np.abs(z)
    if np.any(rr == 0):
        raise ValueError("density undefined at z = 0")
    s = np.log(rr)
    h = lm.h
    for loc, _ in lm.conj.jumps:
        if np.any(np.abs(s - loc) < 2 * h):
            raise ValueError(f"z lies on an atom circle of radius {math.exp(loc):.6g}")
    prof = lm.profile
    if math.isfinite(prof.r0) and np.any(s + h >= math.log(prof.r0)):
        raise ValueError("z too close to the convergence radius")
    pts = np.concatenate([s - h, s + h, s - h / 2, s + h / 2])
    dd = _exact_left_derivative(prof, pts).reshape(4, -1)
    D1 = (dd[1] - dd[0]) / (2 * h)
    D2 = (dd[3] - dd[2]) / h
    second = (4.0 * D2 - D1) / 3.0
    # one-sided fallback where the centered stencil crosses into a flat
    second = np.maximum(second, 0.0)
    rho = second / (2.0 * math.pi * rr**2)
    return float(rho[0]) if scalar else rho


def atoms_and_gaps(lm: LimitMeasure, normalize: bool = False):
    """Atoms ``(radius, mass)`` and gaps ``(r_lo, r_hi)`` of the limit measure."""
    scale = lm.total_mass_window if normalize else 1.0
    if normalize and not scale > 0:
        raise ValueError("zero-mass window")
    atoms = [(r, m / scale) for r, m in lm.atoms if r < lm.window or not normalize]
    return atoms, list(lm.gaps)


def _cdf_table(lm: LimitMeasure):
    cp = lm.conj
    keep = cp.s_grid <= math.log(lm.window)
    s = list(cp.s_grid[keep])
    F = list(cp.left_deriv[keep])
    for loc, size in cp.jumps:
        if loc >= math.log(lm.window):
            continue
        i = int(np.searchsorted(s, loc, side="left"))
        before = float(radial_cdf(lm, math.exp(loc), side="left"))
        after = float(radial_cdf(lm, math.exp(loc), side="right"))
        s[i:i] = [loc, loc]
        F[i:i] = [before, after]
    s.append(math.log(lm.window))
    F.append(lm.total_mass_window)
    r = np.exp(np.asarray(s))
    F = np.maximum.accumulate(np.asarray(F))
    return r, F


def sample_limit(lm: LimitMeasure, window_radius: float, m: int, seed: int) -> np.ndarray:
    """``m`` i.i.d. points from ``mu`` restricted to the window, normalized.

    Radius by the generalized inverse of the radial CDF (atoms are point
    masses of the inverse), angle uniform.
    """
    if window_radius > lm.window:
        raise ValueError("window larger than the tabulated range")
    sub = lm if window_radius == lm.window else limit_measure(lm.profile, window_radius, lm.h)
    if not sub.total_mass_window > 0:
        raise ValueError("zero-mass window")
    u = uniform_block(seed, m)
    target = u[:, 0] * sub.total_mass_window
    r_tab, F_tab = _cdf_table(sub)
    return _invert(r_tab, F_tab, target) * np.exp(2j * math.pi * u[:, 1])


def quantile_radii(lm: LimitMeasure, q) -> np.ndarray:
    """Deterministic radii at probability levels ``q`` of the window-normalized law."""
    r_tab, F_tab = _cdf_table(lm)
    return _invert(r_tab, F_tab, np.asarray(q, dtype=float) * lm.total_mass_window)


def _invert(r_tab, F_tab, target):
    F0, r0 = F_tab[0], r_tab[0]
    out = np.empty_like(target)
    low = target < F0
    out[low] = r0 * np.sqrt(target[low] / F0) if F0 > 0 else r0
    hi_t = target[~low]
    idx = np.clip(np.searchsorted(F_tab, hi_t, side="left"), 1, len(F_tab) - 1)
    Fa, Fb = F_tab[idx - 1], F_tab[idx]
    ra, rb = r_tab[idx - 1], r_tab[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(Fb > Fa, (hi_t - Fa) / (Fb - Fa), 1.0)
    out[~low] = ra + np.clip(w, 0.0, 1.0) * (rb - ra)
    return out


def support_annulus(profile: RadialProfile) -> Tuple[float, float]:
    """``[exp(u'(0+)), exp(u'(t0-))]``, which contains the support of ``mu``."""
    lo = profile.u_prime_at_zero()
    if math.isfinite(profile.t0):
        hi = float(profile.u_prime(np.array([profile.t0]))[0])
    else:
        hi = math.log(profile.r0) if math.isfinite(profile.r0) else INF
    return (0.0 if lo == -INF else math.exp(lo), INF if hi == INF else math.exp(hi))
