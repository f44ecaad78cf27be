"""Random coefficients, truncation of entire series, and stable evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels
from .rng import uniform_block
from .schedule import (
    MAX_TERMS,
    CoefficientSchedule,
    RadialProfile,
    coefficients,
    polynomial_degree,
    schedule_log_mag,
)

NOISE_KINDS = (
    "complex_gaussian",
    "real_gaussian",
    "rademacher",
    "cauchy",
    "pareto_log",
    "uniform_disc",
)
REAL_KINDS = ("real_gaussian", "rademacher", "cauchy")
TRUNCATION_EPS = 0.05


class ZeroFunctionError(ValueError):
    """The realization vanishes identically up to its degree."""


@dataclass(frozen=True)
class NoiseDistribution:
    kind: str = "complex_gaussian"
    gamma: float = 4.0

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "pareto_log" and not self.gamma > 0:
            raise ValueError("pareto_log needs gamma > 0")

    @property
    def is_real(self) -> bool:
        return self.kind in REAL_KINDS

    @property
    def log_moment_finite(self) -> bool:
        """``E log(1 + |xi|) < inf``; fails only for heavy log-tails."""
        return self.kind != "pareto_log" or self.gamma > 1

    def label(self) -> str:
        return f"pareto_log({self.gamma:g})" if self.kind == "pareto_log" else self.kind


def draw_noise(dist: NoiseDistribution, count: int, seed: int, start: int = 0):
    """``(log_mag, phase)`` of draws ``start .. start+count-1``.

    Draw ``k`` depends only on ``(seed, k)``, so prefixes are shared across
    degrees and schedules.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    u = uniform_block(seed, count, start)
    u0, u1 = u[:, 0], u[:, 1]
    two_pi = 2.0 * math.pi
    kind = dist.kind
    if kind == "complex_gaussian":
        # |xi|^2 ~ Exp(1) for density exp(-|z|^2)/pi
        log_mag = 0.5 * np.log(-np.log(u0))
        phase = two_pi * u1
    elif kind == "real_gaussian":
        x = np.sqrt(-2.0 * np.log(u0)) * np.cos(two_pi * u1)
        log_mag, phase = _real_polar(x)
    elif kind == "rademacher":
        log_mag = np.zeros(count)
        phase = np.where(u0 < 0.5, 0.0, math.pi)
    elif kind == "cauchy":
        x = np.tan(math.pi * (u0 - 0.5))
        log_mag, phase = _real_polar(x)
    elif kind == "pareto_log":
        log_mag = u0 ** (-1.0 / dist.gamma)
        phase = two_pi * u1
    else:
        log_mag = 0.5 * np.log(u0)
        phase = two_pi * u1
    return log_mag, phase


def _real_polar(x):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(x)), np.where(x < 0, math.pi, 0.0)


def _term_logs(profile: RadialProfile, n, k0: int, k1: int) -> np.ndarray:
    return schedule_log_mag(profile, n, np.arange(k0, k1))


def truncation_degree(
    schedule,
    r: float,
    tol: float,
    relative: bool = False,
    eps: float = TRUNCATION_EPS,
) -> int:
    """Smallest ``K`` with ``sum_{k>K} exp(log|f_k| + eps k + k log r) < tol``.

    ``schedule`` is a ``CoefficientSchedule`` carrying its profile (entire
    kinds are generated on demand), a raw ``CoefficientSchedule`` (finite), or
    a ``(profile, n)`` pair.  With ``relative=True`` the tail is measured
    against the full majorant sum instead of in absolute terms.  When
    ``log r + eps`` would reach the convergence boundary, ``eps`` is reduced
    to half the remaining gap.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not r > 0:
        raise ValueError("r must be positive")
    profile, n, raw = _unpack(schedule)
    if profile is None:
        fin = np.nonzero(np.isfinite(raw.log_mag))[0]
        return int(fin[-1]) if fin.size else 0
    deg = polynomial_degree(profile, n)
    if deg is not None:
        return deg
    if r >= profile.r0:
        raise ValueError(f"divergence: r={r} is outside the convergence radius {profile.r0}")
    gap = math.log(profile.r0) - math.log(r) if math.isfinite(profile.r0) else math.inf
    eps_eff = min(eps, 0.5 * gap)
    slope = math.log(r) + eps_eff

    a = np.empty(0)
    chunk = 1024
    log_tail_beyond = math.inf
    while True:
        k0 = a.size
        k1 = min(k0 + chunk, MAX_TERMS + 1)
        if k0 >= k1:
            raise ValueError("divergence detected: tail does not decay within the term cap")
        ks = np.arange(k0, k1)
        a = np.concatenate([a, _term_logs(profile, n, k0, k1) + slope * ks])
        chunk *= 2
        if a.size < 16:
            continue
        inc = np.diff(a[-16:])
        if not np.all(inc < 0):
            continue
        log_q = float(inc.max())
        log_total = float(logsumexp(a))
        log_thr = math.log(tol) + (log_total if relative else 0.0)
        # geometric bound for everything past the computed block
        log_tail_beyond = float(a[-1]) + log_q - math.log1p(-math.exp(log_q))
        if a[-1] < log_thr - 40.0 and log_tail_beyond < log_thr - 10.0:
            break
    # suffix[k] = log sum_{j >= k} exp(a_j)
    suffix = np.logaddexp.accumulate(a[::-1])[::-1]
    tails = np.logaddexp(np.append(suffix[1:], -np.inf), log_tail_beyond)
    ok = np.nonzero(tails < log_thr)[0]
    return int(ok[0])


def _unpack(schedule):
    if isinstance(schedule, tuple):
        return schedule[0], schedule[1], None
    if isinstance(schedule, CoefficientSchedule):
        if schedule.profile is not None:
            return schedule.profile, schedule.n, schedule
        return None, schedule.n, schedule
    raise TypeError("expected a CoefficientSchedule or (profile, n)")


@dataclass(frozen=True, eq=False)
class RandomFunctionInstance:
    """A realization ``G(z) = sum xi_k f_k z^k`` truncated at ``degree``."""

    schedule: CoefficientSchedule
    noise_log_mag: np.ndarray
    noise_phase: np.ndarray
    degree: int
    seed: Optional[int]
    n: float
    noise: Optional[NoiseDistribution] = None
    window_radius: float = math.inf
    manifest_extra: dict = field(default_factory=dict)

    @property
    def log_mag(self) -> np.ndarray:
        """``log|xi_k f_k|`` for ``k = 0..degree``."""
        return self.schedule.log_mag[: self.degree + 1] + self.noise_log_mag[: self.degree + 1]

    @property
    def phase(self) -> np.ndarray:
        return self.schedule.phase[: self.degree + 1] + self.noise_phase[: self.degree + 1]

    @property
    def is_real(self) -> bool:
        ph = np.mod(self.phase, math.pi)
        return bool(np.all((ph < 1e-12) | (math.pi - ph < 1e-12)))

    def manifest(self) -> dict:
        prof = self.schedule.profile
        out = {
            "schedule": None
            if prof is None
            else {"kind": prof.kind, "alpha": prof.alpha, "beta": prof.beta},
            "n": self.n,
            "noise": None if self.noise is None else self.noise.label(),
            "seed": self.seed,
            "degree": self.degree,
            "window": self.window_radius,
        }
        out.update(self.manifest_extra)
        return out

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True)


def instantiate(
    schedule,
    dist: NoiseDistribution,
    seed: int,
    window_radius: float,
    tol: float = 1e-12,
    relative: bool = False,
    degree: Optional[int] = None,
) -> RandomFunctionInstance:
    """Truncate (entire kinds) and attach noise draws ``0..degree``."""
    profile, n, raw = _unpack(schedule)
    if profile is not None and window_radius >= profile.r0:
        raise ValueError("window must lie inside the convergence disk")
    if degree is None:
        degree = truncation_degree(schedule, window_radius, tol, relative=relative)
    if raw is None or raw.k_max < degree:
        if profile is None:
            raise ValueError("raw schedule shorter than the requested degree")
        raw = coefficients(profile, n, degree)
    lm, ph = draw_noise(dist, degree + 1, seed)
    return RandomFunctionInstance(raw, lm, ph, int(degree), seed, n, dist, float(window_radius))


def deterministic_instance(coeffs, n: float = 1.0, window_radius: float = math.inf):
    """Instance with fixed coefficients and unit noise."""
    sch = CoefficientSchedule.from_coefficients(coeffs, n)
    K = len(sch.log_mag) - 1
    z = np.zeros(K + 1)
    return RandomFunctionInstance(sch, z, z.copy(), K, None, n, None, window_radius)


def derivative(inst: RandomFunctionInstance, order: int = 1) -> RandomFunctionInstance:
    """Instance of ``G^{(order)}``: coefficients ``(k+1)...(k+order) c_{k+order}``."""
    if order < 1:
        return inst
    L, ph = inst.log_mag, inst.phase
    K = inst.degree
    if K < order:
        raise ZeroFunctionError("derivative of a constant")
    k = np.arange(K - order + 1)
    w = gammaln(k + order + 1.0) - gammaln(k + 1.0)
    sch = CoefficientSchedule(inst.n, L[order:] + w, ph[order:], K - order, None)
    zeros = np.zeros(K - order + 1)
    return RandomFunctionInstance(
        sch, zeros, zeros.copy(), K - order, inst.seed, inst.n, inst.noise,
        inst.window_radius, {"derivative_order": order},
    )


def evaluate(inst: RandomFunctionInstance, z, order: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """``(log|G(z)|, arg G(z))`` by compensated summation of max-scaled terms.

    ``order > 0`` evaluates ``z^order G^{(order)}(z)`` instead.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z).ravel()
    L, ph = _weighted_terms(inst.log_mag, inst.phase, order)
    if not np.any(np.isfinite(L)):
        raise ZeroFunctionError("identically zero realization")
    with np.errstate(divide="ignore"):
        lr = np.log(np.abs(zf))
    lm, arg, _ = _kernels.eval_log_many(L, ph, lr, np.angle(zf))
    if scalar:
        return float(lm[0]), float(arg[0])
    return lm.reshape(z.shape), arg.reshape(z.shape)


def evaluate_value(inst: RandomFunctionInstance, z) -> np.ndarray:
    lm, arg = evaluate(inst, z)
    return np.exp(lm) * np.exp(1j * arg)


def _weighted_terms(L, ph, order: int):
    L = np.ascontiguousarray(L, dtype=float)
    ph = np.ascontiguousarray(ph, dtype=float)
    if order == 0:
        return L, ph
    k = np.arange(L.size, dtype=float)
    with np.errstate(invalid="ignore"):
        w = np.where(k >= order, gammaln(k + 1.0) - gammaln(np.maximum(k - order, 0) + 1.0), -np.inf)
    return L + w, ph
