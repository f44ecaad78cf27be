"""Radial coefficient profiles and the coefficient schedules built from them.

A random Taylor series ``G_n(z) = sum_k xi_k f_{k,n} z^k`` is described here by
its deterministic part only.  The profile ``u(t) = -lim (1/n) log|f_{tn,n}|``
fixes the limiting zero distribution; the schedule holds the exact
log-magnitudes ``log|f_{k,n}|`` for one value of ``n``.

Everything is kept in log domain: ``1/2000!`` and friends are never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, xlogy

INF = math.inf

KINDS = (
    "kac",
    "elliptic",
    "flat",
    "hyperbolic",
    "lo_poly",
    "theta",
    "three_circles",
    "custom",
)

# Upper bound on the number of materialized coefficients.
MAX_TERMS = 10_000_000

_EXACT_FACTORIAL_MAX = 32
_LOG_FACT_TABLE = np.array(
    [math.log(math.factorial(k)) for k in range(_EXACT_FACTORIAL_MAX + 1)]
)


def log_factorial(k):
    """``log k!`` for integer ``k >= 0`` (array or scalar).

    Exact (correctly rounded) for ``k <= 32``, log-gamma above.
    """
    k = np.asarray(k)
    out = np.empty(k.shape, dtype=float)
    small = k <= _EXACT_FACTORIAL_MAX
    out[small] = _LOG_FACT_TABLE[k[small].astype(int)]
    out[~small] = gammaln(k[~small] + 1.0)
    return out if out.ndim else float(out)


_THREE_CIRCLES_T = np.array([0.0, 1.0, 2.0, 3.0])
_THREE_CIRCLES_U = np.array([0.0, 0.0, math.log(2.0), math.log(6.0)])


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Exponential decay profile ``u`` of the coefficients.

    ``u`` is finite on ``[0, t0)``, ``+inf`` beyond ``t0``; ``r0`` is the
    convergence radius ``exp(liminf u(t)/t)``.  Gridded profiles (``t_grid`` /
    ``u_grid``) are piecewise linear between nodes.
    """

    kind: str
    alpha: Optional[float] = None
    beta: float = 0.0
    t0: float = INF
    r0: float = INF
    t_grid: Optional[np.ndarray] = field(default=None, repr=False)
    u_grid: Optional[np.ndarray] = field(default=None, repr=False)
    func: Optional[Callable] = field(default=None, repr=False)

    @property
    def is_polynomial(self) -> bool:
        return math.isfinite(self.t0)

    @property
    def is_gridded(self) -> bool:
        return self.t_grid is not None

    @property
    def has_closed_derivative(self) -> bool:
        return self.kind in ("kac", "elliptic", "flat", "hyperbolic", "lo_poly", "theta")

    @property
    def sigma(self) -> float:
        # sign of the theta profile u = sigma t^alpha
        return 1.0 if (self.alpha or 0) > 1 else -1.0

    def u(self, t):
        """Evaluate ``u`` (vectorized); ``+inf`` outside ``[0, t0]``."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.full(t.shape, INF)
        inside = (t >= 0) & (t <= self.t0)
        ti = t[inside]
        out[inside] = self._u_inside(ti)
        if np.isnan(out).any():
            raise ValueError(f"profile {self.kind!r} is undefined at some t")
        return float(out[0]) if scalar else out

    def _u_inside(self, t):
        a, b = self.alpha, self.beta
        k = self.kind
        if self.t_grid is not None:
            return _interp_linear(self.t_grid, self.u_grid, t)
        if k == "kac":
            return np.zeros_like(t)
        if k == "elliptic":
            return a * (xlogy(t, t) + xlogy(1.0 - t, 1.0 - t))
        if k in ("flat", "lo_poly"):
            return a * (xlogy(t, t) - t) + b * t
        if k == "hyperbolic":
            return a * (xlogy(t, t) - xlogy(1.0 + t, 1.0 + t))
        if k == "theta":
            return self.sigma * t**a
        if k == "custom":
            return np.asarray(self.func(t), dtype=float) * np.ones_like(t)
        raise ValueError(f"unknown kind {k!r}")

    def u_prime(self, t):
        """Left derivative of ``u``; at ``t = 0`` the limit from the right."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.alpha, self.beta
        k = self.kind
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.t_grid is not None:
                out = _grid_left_slope(self.t_grid, self.u_grid, t)
            elif k == "kac":
                out = np.zeros_like(t)
            elif k == "elliptic":
                out = a * (np.log(t) - np.log1p(-t))
            elif k in ("flat", "lo_poly"):
                out = a * np.log(t) + b
            elif k == "hyperbolic":
                out = a * (np.log(t) - np.log1p(t))
            elif k == "theta":
                out = self.sigma * a * t ** (a - 1.0)
            else:
                out = _numeric_left_derivative(self.u, t)
        out = np.where(t > self.t0, INF, out)
        return out

    def u_prime_at_zero(self) -> float:
        return float(self.u_prime(np.array([0.0]))[0])


def _interp_linear(tg, ug, t):
    out = np.interp(t, tg, ug)
    if tg[-1] < t.max(initial=-INF):
        # extrapolate with the last slope (only used when t0 = inf)
        slope = (ug[-1] - ug[-2]) / (tg[-1] - tg[-2])
        hi = t > tg[-1]
        out[hi] = ug[-1] + slope * (t[hi] - tg[-1])
    return out


def _grid_left_slope(tg, ug, t):
    slopes = np.diff(ug) / np.diff(tg)
    idx = np.searchsorted(tg, t, side="left") - 1
    idx = np.clip(idx, 0, len(slopes) - 1)
    return slopes[idx]


def _numeric_left_derivative(fn, t):
    d = 1e-7 * np.maximum(1.0, np.abs(t))
    left = t - d
    right_only = left < 0
    lo = np.where(right_only, t, left)
    hi = np.where(right_only, t + d, t)
    return (fn(hi) - fn(lo)) / (hi - lo)


def named_profile(kind: str, alpha: float = 1.0, beta: float = 0.0) -> RadialProfile:
    """Closed-form profile for one of the named ensembles.

    ``beta`` only enters the ``flat`` and ``lo_poly`` kinds.
    """
    kind = kind.replace("-", "_")
    if kind in ("weyl",):
        kind, alpha, beta = "lo_poly", 0.5, 0.0
    if kind not in KINDS or kind == "custom":
        raise ValueError(f"unknown named kind {kind!r}")
    if kind in ("kac", "three_circles"):
        alpha = None
    elif not (alpha is not None and alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive, got {alpha}")
    if kind == "theta" and alpha == 1.0:
        raise ValueError("theta profile requires alpha in (0,1) or (1,inf)")
    if kind not in ("flat", "lo_poly"):
        beta = 0.0

    if kind == "kac":
        return RadialProfile("kac", t0=1.0, r0=INF)
    if kind == "elliptic":
        return RadialProfile("elliptic", alpha, t0=1.0, r0=INF)
    if kind == "flat":
        return RadialProfile("flat", alpha, beta, t0=INF, r0=INF)
    if kind == "hyperbolic":
        return RadialProfile("hyperbolic", alpha, t0=INF, r0=1.0)
    if kind == "lo_poly":
        return RadialProfile("lo_poly", alpha, beta, t0=1.0, r0=INF)
    if kind == "theta":
        return RadialProfile("theta", alpha, t0=INF, r0=INF if alpha > 1 else 1.0)
    return RadialProfile(
        "three_circles",
        t0=3.0,
        r0=INF,
        t_grid=_THREE_CIRCLES_T.copy(),
        u_grid=_THREE_CIRCLES_U.copy(),
    )


def custom_profile(func: Callable, t0: float = INF, r0: float = INF) -> RadialProfile:
    """Profile given by an arbitrary vectorized callable ``u``."""
    if not (t0 > 0):
        raise ValueError("t0 must be positive")
    return RadialProfile("custom", t0=t0, r0=r0, func=func)


def profile_from_samples(t_grid, u_values, t0: Optional[float] = None) -> RadialProfile:
    """Piecewise-linear profile through ``(t_grid, u_values)``.

    ``t0`` defaults to the last node.  With ``t0 = inf`` the last segment is
    extended linearly and ``r0 = exp(last slope)``.
    """
    tg = np.asarray(t_grid, dtype=float)
    ug = np.asarray(u_values, dtype=float)
    if tg.ndim != 1 or tg.shape != ug.shape or len(tg) < 2:
        raise ValueError("need matching 1-d arrays with at least two nodes")
    if np.isnan(tg).any() or np.isnan(ug).any():
        raise ValueError("NaN in profile samples")
    if not np.all(np.isfinite(ug)):
        raise ValueError("u values must be finite on the grid")
    if tg[0] != 0.0:
        raise ValueError("t grid must start at 0")
    if np.any(np.diff(tg) <= 0):
        raise ValueError("t grid must be strictly increasing")
    r0 = INF
    if t0 is None:
        t0 = float(tg[-1])
    elif math.isinf(t0):
        r0 = math.exp((ug[-1] - ug[-2]) / (tg[-1] - tg[-2]))
    elif t0 <= 0:
        raise ValueError("t0 must be positive")
    elif t0 < tg[-1]:
        keep = tg < t0
        u_t0 = float(np.interp(t0, tg, ug))
        tg = np.append(tg[keep], t0)
        ug = np.append(ug[keep], u_t0)
    elif t0 > tg[-1]:
        raise ValueError("finite t0 beyond the last grid node")
    return RadialProfile("custom", t0=float(t0), r0=r0, t_grid=tg, u_grid=ug)


@dataclass(frozen=True, eq=False)
class CoefficientSchedule:
    """Log-magnitudes and phases of ``f_{k,n}`` for ``k = 0..k_max``."""

    n: float
    log_mag: np.ndarray
    phase: np.ndarray
    degree_hint: Optional[int] = None
    profile: Optional[RadialProfile] = None

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self.log_mag))

    @property
    def k_max(self) -> int:
        return len(self.log_mag) - 1

    @property
    def entries(self):
        return list(zip(self.k.tolist(), self.log_mag.tolist(), self.phase.tolist()))

    @classmethod
    def from_coefficients(cls, coeffs, n: float = 1.0) -> "CoefficientSchedule":
        """Raw schedule from complex coefficients ``c_0, c_1, ...``."""
        c = np.asarray(coeffs, dtype=complex)
        with np.errstate(divide="ignore"):
            lm = np.log(np.abs(c))
        return cls(n=n, log_mag=lm, phase=np.angle(c), degree_hint=len(c) - 1)


def polynomial_degree(profile: RadialProfile, n) -> Optional[int]:
    if not profile.is_polynomial:
        return None
    return int(math.floor(profile.t0 * n + 1e-9))


def schedule_log_mag(profile: RadialProfile, n, k) -> np.ndarray:
    """``log|f_{k,n}|`` for integer array ``k``; ``-inf`` past the degree."""
    k = np.asarray(k, dtype=float)
    a, b = profile.alpha, profile.beta
    kind = profile.kind
    logn = math.log(n)
    if kind == "kac":
        out = np.zeros_like(k)
    elif kind == "elliptic":
        kk = np.minimum(k, n)
        out = a * (gammaln(n + 1.0) - log_factorial(kk.astype(int)) - gammaln(n - kk + 1.0))
    elif kind in ("flat", "lo_poly"):
        out = a * (k * logn - log_factorial(k.astype(int))) - b * k
    elif kind == "hyperbolic":
        out = a * (gammaln(n + k) - gammaln(n) - log_factorial(k.astype(int)))
    elif kind == "theta":
        out = -profile.sigma * n ** (1.0 - a) * k**a
    elif kind == "three_circles":
        ln2, ln3 = math.log(2.0), math.log(3.0)
        out = np.where(
            k <= n,
            0.0,
            np.where(k <= 2 * n, n * ln2 - k * ln2, n * math.log(4.5) - k * ln3),
        )
    else:
        out = -n * profile.u(k / n)
        if np.isnan(out).any():
            raise ValueError("profile undefined at some k/n")
    deg = polynomial_degree(profile, n)
    if deg is not None:
        out = np.where(k > deg, -INF, out)
    return np.asarray(out, dtype=float)


def coefficients(profile: RadialProfile, n, k_max: int) -> CoefficientSchedule:
    """Exact coefficient schedule ``log|f_{k,n}|`` for ``k <= k_max``.

    Named kinds use exact log-gamma formulas; ``custom`` kinds use
    ``-n u(k/n)``.  Polynomial kinds clamp ``k_max`` to the degree.
    """
    if not n >= 1:
        raise ValueError("n must be >= 1")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if k_max > MAX_TERMS:
        raise ValueError(f"k_max={k_max} exceeds capacity {MAX_TERMS}")
    deg = polynomial_degree(profile, n)
    if deg is not None:
        k_max = min(k_max, deg)
    k = np.arange(k_max + 1)
    lm = schedule_log_mag(profile, n, k)
    return CoefficientSchedule(
        n=n, log_mag=lm, phase=np.zeros(k_max + 1), degree_hint=deg, profile=profile
    )


def measure_to_profile(
    radial_cdf: Callable,
    r0: float = INF,
    h: float = 1e-3,
    s_max: Optional[float] = None,
) -> RadialProfile:
    """Invert a rotationally invariant measure into a coefficient profile.

    ``radial_cdf(r)`` is the mass of the open disk of radius ``r``.  We form
    ``I(s) = int_{-inf}^s F(e^x) dx`` by the midpoint rule on a grid of step
    ``h`` and return its conjugate, which is piecewise linear with one node per
    distinct slope of the interpolated ``I``.
    """
    F = lambda s: np.asarray(radial_cdf(np.exp(s)), dtype=float)  # noqa: E731
    if s_max is None:
        if math.isfinite(r0):
            s_max = math.log(r0) - 0.05
        else:
            s_max = _saturation_point(F)
    s_min = _vanishing_point(F, s_max)
    n_steps = max(2, int(math.ceil((s_max - s_min) / h)))
    s = s_min + h * np.arange(n_steps + 1)
    mid = 0.5 * (s[:-1] + s[1:])
    fm = F(mid)
    if np.isnan(fm).any():
        raise ValueError("radial CDF returned NaN")
    if np.any(np.diff(fm) < -1e-12 * max(1.0, float(np.abs(fm).max()))):
        raise ValueError("radial CDF must be nondecreasing")
    if fm[-1] <= 0:
        raise ValueError("measure has no mass: degenerate profile")
    fm = np.maximum.accumulate(np.maximum(fm, 0.0))
    I = np.concatenate([[0.0], np.cumsum(h * fm)])

    # conjugate of the piecewise-linear I: one node per distinct segment slope
    slopes, first = np.unique(fm, return_index=True)
    t_nodes = np.concatenate([[0.0], slopes[slopes > 0]])
    # u(t) = max_i (s_i t - I_i) is attained at the left end of the segment
    # whose slope reaches t, i.e. at s_i with i = first index of that slope
    u_nodes = np.empty_like(t_nodes)
    u_nodes[0] = -I[0]
    pos = first[slopes > 0]
    u_nodes[1:] = s[pos + 1] * t_nodes[1:] - I[pos + 1]
    return profile_from_samples(t_nodes, u_nodes, t0=float(t_nodes[-1]))


def _saturation_point(F, s_start: float = 0.0, s_cap: float = 30.0) -> float:
    s = s_start
    while s < s_cap:
        a, b = float(F(np.array([s]))[0]), float(F(np.array([s + 1.0]))[0])
        if b > 0 and abs(b - a) <= 1e-12 * max(1.0, b):
            return s + 1.0
        s += 1.0
    return s_cap


def _vanishing_point(F, s_max: float, s_floor: float = -700.0) -> float:
    ref = float(F(np.array([s_max]))[0])
    if not ref > 0:
        raise ValueError("measure has no mass: degenerate profile")
    s = min(0.0, s_max) - 1.0
    while s > s_floor:
        if float(F(np.array([s]))[0]) <= 1e-13 * ref:
            return s
        s -= 1.0
    raise ValueError("divergent near-zero integral: mass does not vanish at the origin")
