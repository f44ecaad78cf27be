"""Empirical zero measures against the limit law: KS statistics and potentials."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .conjugate import conjugate_values
from .limitlaw import LimitMeasure, limit_measure
from .rng import default_seed, trial_seed
from .roots import ZeroSet, find_roots
from .sampler import NoiseDistribution, RandomFunctionInstance, derivative, evaluate, instantiate
from .schedule import RadialProfile, named_profile


@dataclass(frozen=True)
class EmpiricalCDF:
    """Right-continuous step function ``r -> (1/n) #{zeros in closed D_r}``."""

    radii: np.ndarray
    values: np.ndarray
    n: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.radii, r, side="right")
        vals = np.concatenate([[0.0], self.values])
        return vals[idx]

    def left(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.radii, r, side="left")
        vals = np.concatenate([[0.0], self.values])
        return vals[idx]

    @property
    def plateaus(self):
        """``(r_lo, r_hi, value)`` for each constant stretch."""
        edges = np.concatenate([[0.0], self.radii, [math.inf]])
        vals = np.concatenate([[0.0], self.values])
        return [(float(edges[i]), float(edges[i + 1]), float(vals[i])) for i in range(len(vals))]


def empirical_radial_cdf(zs: ZeroSet, n: float) -> EmpiricalCDF:
    if n < 1:
        raise ValueError("n must be >= 1")
    r = np.abs(zs.zeros)
    w = zs.multiplicity.astype(float)
    if zs.origin_multiplicity:
        r = np.append(0.0, r)
        w = np.append(float(zs.origin_multiplicity), w)
    order = np.argsort(r, kind="stable")
    r, w = r[order], w[order]
    ur, inv = np.unique(r, return_inverse=True)
    mass = np.bincount(inv, weights=w)
    return EmpiricalCDF(ur, np.cumsum(mass) / n, float(n))


TargetCDF = Union[LimitMeasure, Callable]


def _target_sides(target: TargetCDF, r: np.ndarray):
    if isinstance(target, LimitMeasure):
        return target.radial_cdf(r, side="left"), target.radial_cdf(r, side="right")
    v = np.asarray(target(r), dtype=float)
    return v, v


def ks_radial(zs: ZeroSet, n: float, lm: TargetCDF, window: float) -> float:
    """Kolmogorov distance on ``[0, window)`` between window-normalized CDFs.

    ``lm`` is a ``LimitMeasure`` or a callable mass function ``r -> mu(D_r)``.
    Both one-sided limits are compared at every empirical jump and every atom.
    """
    pts = np.abs(zs.expanded())
    pts = np.sort(pts[pts < window])
    if isinstance(lm, LimitMeasure):
        # radii within rounding of an atom circle count as on it
        for a, _ in lm.atoms:
            pts[np.abs(pts - a) <= 64 * np.finfo(float).eps * a] = a
    if pts.size == 0:
        raise ValueError("no zeros in the window")
    total = float(_target_sides(lm, np.array([window]))[0][0])
    if not total > 0:
        raise ValueError("limit law has no mass in the window")
    ur, counts = np.unique(pts, return_counts=True)
    e_right = np.cumsum(counts) / pts.size
    e_left = e_right - counts / pts.size
    f_left, f_right = _target_sides(lm, ur)
    stat = max(np.max(np.abs(e_left - f_left / total)), np.max(np.abs(e_right - f_right / total)))
    if isinstance(lm, LimitMeasure):
        atoms = np.array([r for r, _ in lm.atoms if r < window])
        if atoms.size:
            emp_l = np.searchsorted(pts, atoms, side="left") / pts.size
            emp_r = np.searchsorted(pts, atoms, side="right") / pts.size
            fl, fr = _target_sides(lm, atoms)
            stat = max(stat, np.max(np.abs(emp_l - fl / total)), np.max(np.abs(emp_r - fr / total)))
    return float(min(stat, 1.0))


def ks_angular(zs) -> float:
    """Rotation-invariant distance of zero arguments from uniform (Kuiper's V).

    ``V = D+ + D-`` equals the linear KS statistic minimized over rotations up
    to a factor between 1 and 2, and needs no rotation grid.
    """
    z = zs.expanded() if isinstance(zs, ZeroSet) else np.asarray(zs, dtype=complex)
    z = z[z != 0]
    m = z.size
    if m < 10:
        raise ValueError("need at least 10 zeros")
    u = np.sort(np.mod(np.angle(z), 2.0 * math.pi) / (2.0 * math.pi))
    i = np.arange(1, m + 1)
    d_plus = np.max(i / m - u)
    d_minus = np.max(u - (i - 1) / m)
    return float(min(max(d_plus, 0.0) + max(d_minus, 0.0), 1.0))


def potential_at(inst: RandomFunctionInstance, z: complex, profile: Optional[RadialProfile] = None,
                 jitter: float = 1e-9, max_tries: int = 5):
    """``(p_n, target, gap)`` with ``p_n = log|G(z)| / n`` and ``target = I(log|z|)``."""
    profile = profile if profile is not None else inst.schedule.profile
    z = complex(z)
    if z == 0:
        raise ValueError("z must be nonzero")
    if abs(z) >= profile.r0 or abs(z) > inst.window_radius:
        raise ValueError("z outside the instance window")
    for _ in range(max_tries):
        lm, _ = evaluate(inst, z)
        if np.isfinite(lm):
            break
        z = z * (1.0 + jitter) * complex(math.cos(jitter), math.sin(jitter))
    else:
        raise ValueError("z is a zero of the realization")
    target = float(conjugate_values(profile, np.array([math.log(abs(z))]))[0][0])
    p = lm / inst.n
    return p, target, p - target


ENSEMBLE_ALIASES = {"weyl": ("lo_poly", 0.5), "three-circles": ("three_circles", None)}


def resolve_ensemble(kind: str, alpha: Optional[float] = None, beta: float = 0.0) -> RadialProfile:
    key = kind.replace("_", "-")
    if key in ENSEMBLE_ALIASES:
        kind, default_alpha = ENSEMBLE_ALIASES[key]
        alpha = default_alpha if alpha is None else alpha
    return named_profile(kind, 1.0 if alpha is None else alpha, beta)


@dataclass
class CompareConfig:
    ensemble: str = "weyl"
    alpha: Optional[float] = None
    beta: float = 0.0
    noise: str = "complex_gaussian"
    gamma: float = 4.0
    n: int = 500
    trials: int = 20
    window: Optional[float] = None
    seed: Optional[int] = None
    probes: Optional[List[complex]] = None
    derivative_order: int = 0
    tail_tol: float = 1e-12

    def profile(self) -> RadialProfile:
        return resolve_ensemble(self.ensemble, self.alpha, self.beta)

    def resolved_window(self) -> float:
        if self.window is not None:
            return float(self.window)
        return default_window(self.profile())

    def base_seed(self) -> int:
        return default_seed() if self.seed is None else int(self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed"] = self.base_seed()
        d["window"] = self.resolved_window()
        d["probes"] = None if self.probes is None else [[p.real, p.imag] for p in self.probes]
        return d


def default_window(profile: RadialProfile) -> float:
    """A window holding most of the mass of polynomial limits, or radius 2 / 0.9 R0."""
    if math.isfinite(profile.r0):
        return 0.9 * profile.r0
    if profile.kind == "three_circles":
        return 3.5
    if profile.kind in ("kac", "lo_poly"):
        return 1.2 if profile.kind == "lo_poly" else 2.0
    return 2.0


def default_probes(lm: LimitMeasure, window: float, n_radii: int = 8) -> List[complex]:
    """Eight radii times three angles inside the window, away from atom circles."""
    radii = window * (np.arange(n_radii) + 0.5) / n_radii
    atoms = np.array([r for r, _ in lm.atoms])
    out = []
    for r in radii:
        if atoms.size and np.min(np.abs(atoms - r)) < 1e-3:
            r = r * (1.0 + 5e-3)
        for a in (0.3, 0.3 + 2 * math.pi / 3, 0.3 + 4 * math.pi / 3):
            out.append(complex(r * math.cos(a), r * math.sin(a)))
    return out


@dataclass
class TrialResult:
    seed: int
    zeros: Optional[ZeroSet] = None
    instance: Optional[RandomFunctionInstance] = None
    error: Optional[str] = None


def run_trial(cfg: CompareConfig, i: int) -> TrialResult:
    seed = trial_seed(cfg.base_seed(), i)
    prof = cfg.profile()
    dist = NoiseDistribution(cfg.noise, cfg.gamma)
    try:
        inst = instantiate((prof, cfg.n), dist, seed, cfg.resolved_window(),
                           tol=cfg.tail_tol, relative=True)
        target = derivative(inst, cfg.derivative_order) if cfg.derivative_order else inst
        return TrialResult(seed, find_roots(target), inst)
    except Exception as exc:  # recorded per trial, not fatal for the campaign
        return TrialResult(seed, error=f"{type(exc).__name__}: {exc}")


def run_trials(cfg: CompareConfig, threads: int = 1) -> List[TrialResult]:
    idx = range(cfg.trials)
    if threads <= 1:
        return [run_trial(cfg, i) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda i: run_trial(cfg, i), idx))


@dataclass
class ComparisonReport:
    config: dict
    per_trial: List[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    potential: List[dict] = field(default_factory=list)
    normalization: str = "window"

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_trial": self.per_trial,
            "aggregate": self.aggregate,
            "potential": self.potential,
            "normalization": self.normalization,
        }


def _aggregate(rows: Sequence[dict]) -> dict:
    ok = [r for r in rows if "error" not in r]
    if not ok:
        return {"mean_ks_radial": None, "mean_ks_angular": None, "max_ks_radial": None,
                "max_ks_angular": None, "mean_count": None, "n_ok": 0}
    kr = np.array([r["ks_radial"] for r in ok])
    ka = np.array([r["ks_angular"] for r in ok])
    cnt = np.array([r["count"] for r in ok], dtype=float)
    return {
        "mean_ks_radial": float(kr.mean()),
        "mean_ks_angular": float(ka.mean()),
        "max_ks_radial": float(kr.max()),
        "max_ks_angular": float(ka.max()),
        "mean_count": float(cnt.mean()),
        "n_ok": len(ok),
    }


def compare_report(cfg: CompareConfig, threads: int = 1, target: Optional[TargetCDF] = None,
                   lm: Optional[LimitMeasure] = None) -> ComparisonReport:
    """Run ``cfg.trials`` realizations and compare them with the limit law.

    Trials use seeds ``base ^ i`` and are reduced in trial order, so the report
    does not depend on ``threads``.
    """
    report = ComparisonReport(cfg.to_dict())
    if cfg.trials == 0:
        report.aggregate = _aggregate([])
        return report
    window = cfg.resolved_window()
    prof = cfg.profile()
    if lm is None:
        lm = limit_measure(prof, window)
    target = lm if target is None else target
    results = run_trials(cfg, threads)
    rows = []
    for res in results:
        if res.error is not None:
            rows.append({"seed": res.seed, "error": res.error})
            continue
        zs = res.zeros
        inside = zs.expanded(window_only=True)
        row = {"seed": res.seed, "count": int(inside.size)}
        try:
            row["ks_radial"] = ks_radial(zs, cfg.n, target, window)
            row["ks_angular"] = ks_angular(inside)
        except ValueError as exc:
            row = {"seed": res.seed, "error": f"ValueError: {exc}"}
        rows.append(row)
    report.per_trial = rows
    report.aggregate = _aggregate(rows)
    probes = cfg.probes if cfg.probes is not None else default_probes(lm, window)
    pot = []
    for z in probes:
        vals = []
        for res in results:
            if res.instance is None:
                continue
            try:
                vals.append(potential_at(res.instance, z, prof)[0])
            except ValueError:
                continue
        t = float(conjugate_values(prof, np.array([math.log(abs(z))]))[0][0])
        mean = float(np.mean(vals)) if vals else None
        pot.append({"z_re": z.real, "z_im": z.imag, "p_n_mean": mean, "target": t,
                    "gap": None if mean is None else mean - t})
    report.potential = pot
    return report
