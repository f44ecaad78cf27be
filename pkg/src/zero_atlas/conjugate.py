"""Numerical Legendre-Fenchel transform ``I(s) = sup_{t>=0} (s t - u(t))``.

The sup is taken in two stages.  A coarse t-grid is reduced to its lower
convex hull; for sorted slopes ``s`` the maximizing hull vertex is found by a
merge (``searchsorted``) over the hull edge slopes, which is linear in the
grid sizes.  For closed-form profiles the maximizer is then refined inside the
bracket formed by its grid neighbours: by bisection on ``u'(t) = s`` when the
derivative is known, by golden-section search otherwise.

The left derivative ``I'(s)`` is the smallest maximizer (envelope theorem), so
the argmax array doubles as ``I'`` on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from .schedule import INF, RadialProfile, profile_from_samples

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SUP_DROP = 50.0
T_CEILING = 1e15


@dataclass(frozen=True, eq=False)
class ConjugateProfile:
    s_grid: np.ndarray
    I_values: np.ndarray
    h: float
    argmax: Optional[np.ndarray] = field(default=None, repr=False)
    left_deriv: Optional[np.ndarray] = field(default=None, repr=False)
    jumps: List[Tuple[float, float]] = field(default_factory=list)
    flats: List[Tuple[float, float, float]] = field(default_factory=list)
    profile: Optional[RadialProfile] = field(default=None, repr=False)

    @property
    def total_mass(self) -> float:
        return self.profile.t0 if self.profile is not None else INF


def lower_hull(x, y) -> np.ndarray:
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain).

    Collinear interior points are dropped.
    """
    hull: list = []
    for i in range(len(x)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (x[i1] - x[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (x[i] - x[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def convex_hull(profile: RadialProfile, t_grid) -> RadialProfile:
    """Greatest convex minorant of ``u`` sampled on ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    u = profile.u(t)
    fin = np.isfinite(u)
    if fin.sum() < 2:
        raise ValueError("need at least two finite samples")
    t, u = t[fin], u[fin]
    idx = lower_hull(t, u)
    vals = np.interp(t, t[idx], u[idx])
    t0 = profile.t0 if math.isfinite(profile.t0) else INF
    if math.isfinite(t0) and t[-1] < t0:
        t0 = float(t[-1])
    out = profile_from_samples(t, vals, t0=t0 if math.isinf(t0) else None)
    return out


def _search_extent(profile: RadialProfile, s_max: float) -> float:
    """Largest t worth searching for slope ``s_max`` (finite ``t0`` or the drop rule)."""
    if profile.is_polynomial:
        return profile.t0
    t = 1e-3
    best = -INF
    while t < T_CEILING:
        val = s_max * t - float(profile.u(t))
        best = max(best, val)
        if val < best - SUP_DROP and t > 1.0:
            return t
        t *= 1.5
    raise ValueError("unbounded sup: u grows sublinearly relative to s (check r0)")


def _coarse_grid(profile: RadialProfile, t_max: float, n_geo: int, n_lin: int) -> np.ndarray:
    if profile.is_gridded:
        tg = profile.t_grid
        t = tg[tg <= t_max]
        if t[-1] < t_max and math.isinf(profile.t0):
            t = np.append(t, t_max)
        return t
    lo = min(1e-14, t_max * 1e-16)
    pts = [np.array([0.0, t_max]), np.geomspace(lo, t_max, n_geo), np.linspace(0.0, t_max, n_lin)]
    if profile.is_polynomial:
        pts.append(profile.t0 * (1.0 - np.geomspace(1e-14, 1.0, n_geo)))
    return np.unique(np.clip(np.concatenate(pts), 0.0, t_max))


@lru_cache(maxsize=64)
def _hull_table(profile: RadialProfile, t_max: float, n_geo: int, n_lin: int):
    tg = _coarse_grid(profile, t_max, n_geo, n_lin)
    ug = profile.u(tg)
    fin = np.isfinite(ug)
    tg, ug = tg[fin], ug[fin]
    hull = lower_hull(tg, ug)
    edge_slopes = np.diff(ug[hull]) / np.diff(tg[hull])
    for a in (tg, ug, hull, edge_slopes):
        a.setflags(write=False)
    return tg, ug, hull, edge_slopes


def conjugate_values(profile: RadialProfile, s, n_geo: int = 4000, n_lin: int = 4000):
    """Return ``(I(s), argmax t*(s))`` for an array of slopes.

    ``t*`` is the smallest maximizer, i.e. the left derivative ``I'(s)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size == 0:
        return s.copy(), s.copy()
    if math.isfinite(profile.r0) and s.max() >= math.log(profile.r0):
        raise ValueError("slope range intersects [log r0, inf) where I = +inf")
    order = np.argsort(s, kind="stable")
    ss = s[order]
    t_max = _search_extent(profile, float(ss[-1]))
    tg, ug, hull, edge_slopes = _hull_table(profile, t_max, n_geo, n_lin)
    # merge sorted slopes against sorted hull edge slopes; ties (up to
    # rounding in the edge slope) go to the smaller t
    tie = 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(ss))
    v = np.searchsorted(edge_slopes, ss - tie, side="left")
    g = hull[v]
    t_best = tg[g]
    I_best = ss * t_best - ug[g]

    if not profile.is_gridded:
        lo = tg[np.maximum(g - 1, 0)]
        hi = tg[np.minimum(g + 1, len(tg) - 1)]
        if profile.has_closed_derivative:
            t_ref = _bisect_derivative(profile, ss, lo, hi)
        else:
            t_ref = _golden_max(profile, ss, lo, hi)
        I_ref = ss * t_ref - profile.u(t_ref)
        better = I_ref > I_best
        t_best = np.where(better, t_ref, t_best)
        I_best = np.where(better, I_ref, I_best)

    I_out = np.empty_like(s)
    t_out = np.empty_like(s)
    I_out[order] = I_best
    t_out[order] = t_best
    return I_out, t_out


def _bisect_derivative(profile, s, lo, hi, iters: int = 80):
    """Solve ``u'(t) = s`` in ``[lo, hi]``; endpoints when not bracketed."""
    lo0, hi0 = lo, hi
    lo = lo.copy()
    hi = hi.copy()
    at_lo = profile.u_prime(lo0) >= s
    at_hi = profile.u_prime(hi0) <= s
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        dm = profile.u_prime(mid)
        go_right = dm < s
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    # the bisection interval collapses onto the smallest root of u' = s
    res = np.where(at_lo, lo0, 0.5 * (lo + hi))
    return np.where(at_hi & ~at_lo, hi0, res)


def _golden_max(profile, s, a, b, tol: float = 1e-12, max_iter: int = 200):
    a = a.copy()
    b = b.copy()
    phi = lambda t: s * t - profile.u(t)  # noqa: E731
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(b))):
            break
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        fd_new = np.where(left, fc, phi(d_new))
        fc_new = np.where(left, phi(c_new), fd)
        c, d, fc, fd = c_new, d_new, fc_new, fd_new
    return 0.5 * (a + b)


def conjugate(
    profile: RadialProfile,
    s_lo: float,
    s_hi: float,
    h: float,
    jump_factor: float = 10.0,
) -> ConjugateProfile:
    """Tabulate ``I`` and its left derivative on ``s_lo, s_lo + h, ..., s_hi``."""
    if not h > 0:
        raise ValueError("h must be positive")
    if s_hi <= s_lo:
        raise ValueError("need s_lo < s_hi")
    if math.isfinite(profile.r0) and s_hi >= math.log(profile.r0):
        raise ValueError("s range intersects [log r0, inf)")
    n = int(round((s_hi - s_lo) / h))
    s = s_lo + h * np.arange(n + 1)
    I, tstar = conjugate_values(profile, s)
    cp = ConjugateProfile(s_grid=s, I_values=I, h=h, argmax=tstar, profile=profile)
    return left_derivative(cp, jump_factor=jump_factor)


def left_derivative(
    cp: ConjugateProfile,
    jump_factor: float = 10.0,
    flat_rtol: float = 1e-9,
    flat_atol: float = 1e-300,
    flat_min_len: Optional[float] = None,
) -> ConjugateProfile:
    """Fill ``left_deriv``, ``jumps`` and ``flats`` of a tabulated conjugate.

    With an argmax table the left derivative is exact up to the refinement
    tolerance; otherwise backward differences of ``I`` are used, with
    isotonic clean-up of rounding-level negative increments.
    """
    s, I, h = cp.s_grid, cp.I_values, cp.h
    if cp.argmax is not None:
        d = cp.argmax.astype(float).copy()
    else:
        d = np.empty_like(I)
        d[1:] = np.diff(I) / h
        d[0] = d[1]
        inc = np.diff(d)
        if np.any(inc < -1e-6 * np.maximum(1.0, np.abs(d[1:]))):
            raise ValueError("I is not convex beyond tolerance")
        d = np.maximum.accumulate(np.maximum(d, 0.0))
    if np.any(np.diff(d) < -1e-9 * np.maximum(1.0, np.abs(d[1:]))):
        raise ValueError("left derivative is not monotone: I not convex")
    d = np.maximum.accumulate(np.maximum(d, 0.0))

    jumps = _detect_jumps(s, I, d, h, jump_factor)
    flats = _detect_flats(s, d, jumps, h, flat_rtol, flat_atol, flat_min_len)
    out = replace(cp, left_deriv=d, jumps=jumps, flats=flats)
    _self_check(out)
    return out


def _detect_jumps(s, I, d, h, factor):
    inc = np.diff(d)  # inc[i-1] = d[i] - d[i-1]
    if inc.size == 0:
        return []
    prev = np.concatenate([[0.0], inc[:-1]])
    nxt = np.concatenate([inc[1:], [0.0]])
    neighbour = np.maximum(prev, nxt)
    thresh = factor * np.maximum(h * np.maximum(1.0, np.abs(d[:-1])), neighbour)
    jumps = []
    for j in np.nonzero(inc > thresh)[0]:
        i = j + 1
        ta, tb = d[i - 1], d[i]
        # intersection of the supporting lines at both ends of the interval
        loc = (I[i] - I[i - 1] + ta * s[i - 1] - tb * s[i]) / (ta - tb)
        loc = min(max(loc, s[i - 1]), s[i])
        jumps.append((float(loc), float(tb - ta)))
    return jumps


def _detect_flats(s, d, jumps, h, rtol, atol, min_len):
    if min_len is None:
        min_len = 10.0 * h
    flats = []
    n = len(d)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(d[j + 1] - d[i]) <= atol + rtol * abs(d[i]):
            j += 1
        lo, hi = s[i], s[j]
        for loc, _ in jumps:
            if s[max(i - 1, 0)] <= loc <= s[i]:
                lo = loc
            if s[j] <= loc <= s[min(j + 1, n - 1)]:
                hi = loc
        if (hi - lo) >= min_len:
            if i == 0:
                lo = -INF
            if j == n - 1:
                hi = INF
            flats.append((float(lo), float(hi), float(d[i])))
        i = j + 1
    return flats


_DECLARED_JUMPS = {
    "kac": [0.0],
    "three_circles": [0.0, math.log(2.0), math.log(3.0)],
}


def _self_check(cp: ConjugateProfile) -> None:
    prof = cp.profile
    if prof is None or prof.kind not in _DECLARED_JUMPS:
        return
    inside = [x for x in _DECLARED_JUMPS[prof.kind] if cp.s_grid[0] < x < cp.s_grid[-1]]
    if len(cp.jumps) != len(inside):
        raise ValueError(
            f"grid step {cp.h} too coarse to resolve the {len(inside)} jumps of {prof.kind}"
        )


def biconjugate(cp: ConjugateProfile, t) -> np.ndarray:
    """``u**(t) = sup_s (s t - I(s))`` from the tabulated conjugate.

    On each grid interval ``I`` is modelled by the cubic Hermite interpolant
    of ``(I, I')`` at its ends, or by the max of the two tangent lines when a
    jump of ``I'`` was detected there.  ``NaN`` where ``t`` lies outside
    ``[I'(s_lo), I'(s_hi)]``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s, I, d = cp.s_grid, cp.I_values, cp.left_deriv
    out = np.full(t.shape, np.nan)
    ok = (t >= d[0]) & (t <= d[-1])
    if not ok.any():
        return out
    tt = t[ok]
    # interval [s_{i-1}, s_i] whose end slopes bracket t
    i = np.clip(np.searchsorted(d, tt, side="left"), 1, len(s) - 1)
    s0, s1 = s[i - 1], s[i]
    I0, I1 = I[i - 1], I[i]
    d0, d1 = d[i - 1], d[i]
    # candidate values at the nodes (exact tangent points)
    best = np.maximum(s0 * tt - I0, s1 * tt - I1)
    jump_iv = np.zeros(len(s), dtype=bool)
    for loc, _ in cp.jumps:
        k = np.searchsorted(s, loc, side="left")
        jump_iv[np.clip(k, 1, len(s) - 1)] = True
        jump_iv[np.clip(k + 1, 1, len(s) - 1)] = True
    kinked = jump_iv[i]
    # tangent-line model: maximum at the intersection of the two tangents
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (I1 - I0 + d0 * s0 - d1 * s1) / (d0 - d1)
    sx = np.where(np.isfinite(sx), np.clip(sx, s0, s1), s0)
    tang = np.maximum(I0 + d0 * (sx - s0), I1 + d1 * (sx - s1))
    best_k = np.maximum(best, sx * tt - tang)
    # Hermite model: golden search on the concave objective
    hh = s1 - s0

    def herm(x):
        u = (x - s0) / hh
        h00 = (1 + 2 * u) * (1 - u) ** 2
        h10 = u * (1 - u) ** 2
        h01 = u * u * (3 - 2 * u)
        h11 = u * u * (u - 1)
        return h00 * I0 + h10 * hh * d0 + h01 * I1 + h11 * hh * d1

    a, b = s0.copy(), s1.copy()
    for _ in range(90):
        c = b - _GOLDEN * (b - a)
        e = a + _GOLDEN * (b - a)
        fc = c * tt - herm(c)
        fe = e * tt - herm(e)
        left = fc >= fe
        b = np.where(left, e, b)
        a = np.where(left, a, c)
    xm = 0.5 * (a + b)
    best_h = np.maximum(best, xm * tt - herm(xm))
    out[ok] = np.where(kinked, best_k, best_h)
    return out


def generalized_inverse(cp: ConjugateProfile, t) -> np.ndarray:
    """Left-continuous inverse ``(I')^<-(t) = inf{s : I'(s) >= t}`` on the grid."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    idx = np.searchsorted(cp.left_deriv, t, side="left")
    out = np.full(t.shape, np.nan)
    ok = idx < len(cp.s_grid)
    out[ok] = cp.s_grid[idx[ok]]
    return out
