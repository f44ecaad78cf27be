"""Logarithmic potentials of truncated limit laws and the equilibrium property.

For the law ``mu_kappa`` with ``mu_kappa(D_r) = min(I'(log r), kappa)`` the
potential ``U(z) = int log(1/|z - w|) dmu_kappa(w)`` has a closed form in terms
of ``u`` and ``I``; ``U + I(log|z|)`` is constant on the support and not smaller
off it, which is the equilibrium property for the external field
``I(log|z|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from .conjugate import conjugate_values
from .limitlaw import LimitMeasure, limit_measure, quantile_radii
from .schedule import INF, RadialProfile, named_profile


@dataclass(frozen=True, eq=False)
class TruncatedLaw:
    profile: RadialProfile
    kappa: float
    u_prime_0: float
    u_prime_kappa: float

    @property
    def support(self) -> Tuple[float, float]:
        lo = 0.0 if self.u_prime_0 == -INF else math.exp(self.u_prime_0)
        return lo, math.exp(self.u_prime_kappa)

    @property
    def total_mass(self) -> float:
        return self.kappa

    def mass(self, r) -> np.ndarray:
        """``mu_kappa(D_r)`` for the open disk."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.minimum(_I_prime(self.profile, np.log(r[pos])), self.kappa)
        return out


def truncated_law(profile: RadialProfile, kappa: float) -> TruncatedLaw:
    """``kappa`` in ``(0, t0)``; ``kappa = t0`` is admitted when ``t0`` is finite."""
    t0 = profile.t0
    if not (kappa > 0 and (kappa < t0 or (math.isfinite(t0) and kappa == t0))):
        raise ValueError(f"kappa must lie in (0, {t0}]")
    up0 = profile.u_prime_at_zero()
    upk = float(profile.u_prime(np.array([kappa]))[0])
    if not math.isfinite(upk):
        raise ValueError("u'(kappa) is infinite")
    return TruncatedLaw(profile, float(kappa), up0, upk)


def _I(profile: RadialProfile, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s)
    low = s == -INF
    out[low] = -float(profile.u(0.0))
    if np.any(~low):
        out[~low] = conjugate_values(profile, s[~low])[0]
    return out


def _I_prime(profile: RadialProfile, s) -> np.ndarray:
    return conjugate_values(profile, np.atleast_1d(np.asarray(s, dtype=float)))[1]


def external_field(profile: RadialProfile, z) -> np.ndarray:
    """``I(log|z|)`` (untruncated)."""
    a = np.abs(np.atleast_1d(np.asarray(z, dtype=complex)))
    with np.errstate(divide="ignore"):
        return _I(profile, np.log(a))


def equilibrium_potential(tl: TruncatedLaw, z) -> np.ndarray:
    """Closed-form ``U(z)`` in three radial branches."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    a = np.abs(np.atleast_1d(z))
    prof = tl.profile
    uk = float(prof.u(tl.kappa))
    u0 = float(prof.u(0.0))
    with np.errstate(divide="ignore"):
        s = np.log(a)
    out = np.empty_like(a)
    inner = s <= tl.u_prime_0
    outer = s >= tl.u_prime_kappa
    mid = ~inner & ~outer
    out[inner] = -(uk - u0)
    out[outer] = -tl.kappa * s[outer]
    if np.any(mid):
        out[mid] = -(_I(prof, s[mid]) + uk)
    return float(out[0]) if scalar else out


def _lower_support(tl: TruncatedLaw) -> float:
    """A log-radius below which the truncated mass is negligible."""
    if tl.u_prime_0 > -INF:
        return tl.u_prime_0
    s = min(-4.0, tl.u_prime_kappa - 4.0)
    while s > -700.0:
        if _I_prime(tl.profile, s)[0] <= 1e-15 * tl.kappa:
            return s
        s -= 4.0
    return s


def potential_quadrature(tl: TruncatedLaw, z, tol: float = 1e-4, lm: Optional[LimitMeasure] = None):
    """``U(z) = int -max(log r, log|z|) dF(r)`` by adaptive quadrature.

    Integrating by parts against ``F(s) = min(I'(s), kappa)`` (``s = log r``)
    gives ``U = -kappa S + int_{max(l, s_min)}^{S} F(s) ds`` with
    ``S = u'(kappa)`` and ``l = log|z|``.  Atoms are the jumps of ``F`` and
    are passed to the integrator as breakpoints.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    a = np.abs(np.atleast_1d(z))
    S = tl.u_prime_kappa
    s_min = _lower_support(tl)
    atoms = _atom_logs(tl, lm)

    def F(s):
        return min(float(_I_prime(tl.profile, s)[0]), tl.kappa)

    out = np.empty_like(a)
    for i, r in enumerate(a):
        l = math.log(r) if r > 0 else -INF
        if l >= S:
            out[i] = -tl.kappa * l
            continue
        lo = max(l, s_min)
        brk = [x for x in atoms if lo < x < S]
        val, err = integrate.quad(F, lo, S, points=brk or None, epsabs=0.1 * tol,
                                  epsrel=1e-12, limit=400)
        if not err < tol:
            raise RuntimeError(f"quadrature did not converge at |z|={r} (err {err:.2e})")
        out[i] = -tl.kappa * S + val
    return float(out[0]) if scalar else out


def _atom_logs(tl: TruncatedLaw, lm: Optional[LimitMeasure]) -> List[float]:
    if lm is None:
        win = math.exp(tl.u_prime_kappa) * 1.01
        if win >= tl.profile.r0:
            win = 0.5 * (math.exp(tl.u_prime_kappa) + tl.profile.r0)
        lm = limit_measure(tl.profile, win)
    return [math.log(r) for r, _ in lm.atoms]


def energy(points, weights, profile: Optional[RadialProfile] = None,
           field: Optional[Callable] = None) -> float:
    """``J = 1/2 sum_{i != j} w_i w_j log(1/|z_i - z_j|) + sum w_i I(log|z_i|)``."""
    z = np.asarray(points, dtype=complex).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if z.shape != w.shape:
        raise ValueError("points and weights differ in length")
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, 1.0)
    if np.any(d == 0):
        raise ValueError("coincident points")
    inter = 0.5 * float(w @ (-np.log(d)) @ w)
    if field is not None:
        ext = np.asarray(field(z), dtype=float)
    elif profile is not None:
        ext = external_field(profile, z)
    else:
        ext = np.zeros(z.size)
    return inter + float(w @ ext)


def discretize(radii_quantile: Callable, kappa: float, m_r: int = 20, m_theta: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """``m_r x m_theta`` equal-weight points: radial quantiles times staggered angles."""
    q = (np.arange(m_r) + 0.5) / m_r
    r = np.asarray(radii_quantile(q), dtype=float)
    th = 2.0 * math.pi * (np.arange(m_theta) + 0.5) / m_theta
    pts = np.concatenate([ri * np.exp(1j * (th + math.pi * i / m_theta)) for i, ri in enumerate(r)])
    return pts, np.full(pts.size, kappa / pts.size)


def discretize_law(tl: TruncatedLaw, m_r: int = 20, m_theta: int = 20):
    """Quantile-grid discretization of ``mu_kappa``."""
    win = math.exp(tl.u_prime_kappa)
    lm = limit_measure(tl.profile, win * (1.0 + 1e-9) if win * (1.0 + 1e-9) < tl.profile.r0 else win)
    return discretize(lambda q: quantile_radii(lm, q), tl.kappa, m_r, m_theta)


def discretize_uniform_disk(radius: float, kappa: float, m_r: int = 20, m_theta: int = 20):
    return discretize(lambda q: radius * np.sqrt(q), kappa, m_r, m_theta)


@dataclass
class FlatnessReport:
    radii: np.ndarray
    values: np.ndarray
    in_support: np.ndarray
    constant: float
    max_dev_support: float
    min_gap_outside: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_dev_support <= self.tol and self.min_gap_outside >= -self.tol

    def rows(self):
        return [
            {"r": float(r), "F": float(v), "in_support": bool(s)}
            for r, v, s in zip(self.radii, self.values, self.in_support)
        ]


def flatness_certificate(tl: TruncatedLaw, n_support: int = 100, n_outside: int = 40,
                         tol: float = 1e-3, seed_angle: float = 0.37) -> FlatnessReport:
    """``F(z) = U(z) + I(log|z|)`` on probes inside and outside the support.

    ``U`` comes from quadrature, so the certificate is independent of the
    closed form.  Probes in gaps of the support count as outside.
    """
    r_in, r_out = tl.support
    win = r_out * 1.01 if r_out * 1.01 < tl.profile.r0 else 0.5 * (r_out + tl.profile.r0)
    lm = limit_measure(tl.profile, win)
    atoms = np.array([r for r, _ in lm.atoms])
    gaps = [(lo, hi) for lo, hi in lm.gaps if lo > r_in * (1 + 1e-9) and hi < r_out * (1 - 1e-9)]
    lo = max(r_in, 1e-3 * r_out)
    sup_r = np.linspace(lo, r_out, n_support + 2)[1:-1]
    if atoms.size:
        # atomic supports: probe the atom circles themselves
        sup_r = np.concatenate([sup_r, np.repeat(atoms[atoms <= r_out * (1 + 1e-12)], 3)])
    out_r = np.concatenate([
        np.linspace(0.05 * r_in, 0.95 * r_in, n_outside // 2) if r_in > 0 else np.zeros(0),
        np.linspace(1.05 * r_out, min(3.0 * r_out, 0.99 * tl.profile.r0), n_outside - n_outside // 2),
    ])
    in_gap = np.array([any(a < r < b for a, b in gaps) for r in sup_r], dtype=bool)
    if atoms.size and not gaps and lm.gaps:
        in_gap |= ~np.isclose(sup_r[:, None], atoms[None, :], rtol=1e-9).any(axis=1)
    radii = np.concatenate([sup_r, out_r])
    support = np.concatenate([~in_gap, np.zeros(out_r.size, bool)])
    z = radii * np.exp(1j * (seed_angle + 2.0 * math.pi * np.arange(radii.size) / 7.0))
    U = potential_quadrature(tl, z, lm=lm)
    vals = U + external_field(tl.profile, z)
    const = float(np.median(vals[support]))
    dev = float(np.max(np.abs(vals[support] - const)))
    gap = float(np.min(vals[~support] - const)) if np.any(~support) else INF
    return FlatnessReport(radii, vals, support, const, dev, gap, tol)


def support_nested(profile: RadialProfile, kappas) -> bool:
    """Support annuli grow with ``kappa``."""
    ann = [truncated_law(profile, k).support for k in sorted(kappas)]
    return all(a[0] >= b[0] - 1e-15 and a[1] <= b[1] + 1e-15 for a, b in zip(ann, ann[1:]))


# --- weighted orthogonal polynomials -------------------------------------

def _row_flat(n):
    return lambda s: math.log(n / math.pi) - n * math.exp(2.0 * s)


def _row_elliptic(n):
    return lambda s: math.log((n + 1) / math.pi) - (n + 2) * math.log1p(math.exp(2.0 * s))


def _row_hyperbolic(n):
    def f(s):
        x = math.exp(2.0 * s)
        return -INF if x >= 1 else math.log((n - 1) / math.pi) + (n - 2) * math.log1p(-x)

    return f


def _row_theta(n):
    return lambda s: math.log(math.pi ** -1.5 * math.sqrt(n)) - n * s * s


@dataclass(frozen=True)
class WeightRow:
    """Radial weight ``m_n`` (log-density in ``s = log|z|``) and its rate ``Q``."""

    name: str
    log_density: Callable[[float], Callable[[float], float]]
    Q: Callable[[float], float]
    profile: RadialProfile
    s_range: Tuple[float, float]


def _theta_profile():
    from .schedule import custom_profile

    return custom_profile(lambda t: 0.5 * np.asarray(t, dtype=float) ** 2)


WEIGHT_ROWS: Dict[str, WeightRow] = {
    "flat": WeightRow("flat", _row_flat, lambda s: 0.5 * math.exp(2.0 * s),
                      named_profile("lo_poly", 0.5), (-60.0, 10.0)),
    "elliptic": WeightRow("elliptic", _row_elliptic, lambda s: 0.5 * math.log1p(math.exp(2.0 * s)),
                          named_profile("elliptic", 0.5), (-60.0, 60.0)),
    "hyperbolic": WeightRow("hyperbolic", _row_hyperbolic,
                            lambda s: -0.5 * math.log1p(-math.exp(2.0 * s)) if s < 0 else INF,
                            named_profile("hyperbolic", 0.5), (-60.0, -1e-12)),
    "theta": WeightRow("theta", _row_theta, lambda s: 0.5 * s * s, _theta_profile(), (-60.0, 60.0)),
}


def log_moment(row: WeightRow, n: int, k: float) -> float:
    """``log int |z|^{2k} m_n(dz)`` by quadrature in ``s = log|z|`` around the peak."""
    dens = row.log_density(n)

    def phi(s):
        return (2.0 * k + 2.0) * s + dens(s) + math.log(2.0 * math.pi)

    a, b = row.s_range
    res = optimize.minimize_scalar(lambda s: -phi(s), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-12})
    s0 = float(res.x)
    top = phi(s0)
    # extend until the integrand has dropped by e^-60 on both sides
    lo, hi = s0, s0
    step = 1e-3
    while lo > a and phi(lo) > top - 60.0:
        lo -= step
        step *= 1.5
    step = 1e-3
    while hi < b and phi(hi) > top - 60.0:
        hi += step
        step *= 1.5
    lo, hi = max(lo, a), min(hi, b)
    val, _ = integrate.quad(lambda s: math.exp(phi(s) - top), lo, hi, points=[s0],
                            epsabs=0.0, epsrel=1e-10, limit=400)
    return top + math.log(val)


def orthonormal_rate(row: WeightRow, n: int, t: float) -> float:
    """``-(1/n) log f_{tn,n}`` with ``f_{k,n} = (int |z|^{2k} dm_n)^{-1/2}``."""
    return 0.5 * log_moment(row, n, t * n) / n


def varadhan_u(row: WeightRow, t: float) -> float:
    """``sup_s (t s - Q(e^s))`` by bounded scalar maximization."""
    a, b = row.s_range
    res = optimize.minimize_scalar(lambda s: -(t * s - row.Q(s)), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-12})
    return float(-res.fun)
