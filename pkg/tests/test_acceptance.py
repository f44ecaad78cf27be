"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math

import numpy as np
import pytest
from scipy import integrate, optimize

from zero_atlas.conjugate import biconjugate, conjugate, conjugate_values, generalized_inverse
from zero_atlas.empirics import CompareConfig, compare_report, ks_angular, potential_at
from zero_atlas.limitlaw import atoms_and_gaps, density, limit_measure
from zero_atlas.potential import (
    WEIGHT_ROWS,
    equilibrium_potential,
    flatness_certificate,
    orthonormal_rate,
    potential_quadrature,
    truncated_law,
)
from zero_atlas.rng import DEFAULT_SEED, trial_seed
from zero_atlas.roots import companion_roots, count_zeros_in_disk, find_roots, find_roots_coefficients, match_roots
from zero_atlas.sampler import NoiseDistribution, instantiate
from zero_atlas.schedule import log_factorial, named_profile

H = 1e-3


@pytest.fixture
def verdict(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
        assert ok, detail
    return emit


def trials(profile, n, count, window, noise="complex_gaussian", base=DEFAULT_SEED):
    dist = NoiseDistribution(noise, 4.0)
    for i in range(count):
        inst = instantiate((profile, n), dist, trial_seed(base, i), window, relative=True)
        yield inst, find_roots(inst)


def closed_I(kind, a, s):
    if kind == "kac":
        return np.maximum(0.0, s)
    if kind == "elliptic":
        return a * np.logaddexp(0.0, s / a)
    if kind == "flat":
        return a * np.exp(s / a)
    if kind == "hyperbolic":
        return -a * np.log1p(-np.exp(s / a))
    return np.where(s < 0, 0.0, (a - 1) * np.maximum(s / a, 0) ** (a / (a - 1)))


def test_conjugate_exactness(verdict):
    worst = []
    for kind, a in [("kac", None), ("elliptic", 0.5), ("elliptic", 1.0), ("flat", 0.5), ("flat", 1.0),
                    ("hyperbolic", 0.5), ("theta", 2.0)]:
        p = named_profile(kind, a or 1.0)
        hi = min(3.0, math.log(p.r0) - 0.1) if math.isfinite(p.r0) else 3.0
        s = -3.0 + H * np.arange(int(round((hi + 3.0) / H)) + 1)
        I, _ = conjugate_values(p, s)
        worst.append((float(np.max(np.abs(I - closed_I(kind, a, s)))), kind, a))
    err, kind, a = max(worst)
    verdict(1, err <= 1e-6, f"max |I - I_closed| = {err:.2e} (worst {kind} {a}), tol 1e-6")


def test_biconjugation_duality(verdict):
    cases = [("kac", None, 2.0), ("elliptic", 0.5, 2.0), ("elliptic", 1.0, 2.0), ("flat", 0.5, 1.0),
             ("flat", 1.0, 1.0), ("hyperbolic", 0.5, -0.2), ("lo_poly", 0.5, 1.0), ("theta", 2.0, 1.0),
             ("three_circles", None, 1.5)]
    bic, inv = 0.0, 0.0
    for kind, a, hi in cases:
        p = named_profile(kind, a or 1.0)
        cp = conjugate(p, -4.0, hi, H)
        d = cp.left_deriv
        t = np.linspace(d[0], d[-1], 203)[1:-1]
        if math.isfinite(p.t0):
            t = t[t < p.t0]
        # the convex hull of each named profile is the profile itself
        bic = max(bic, float(np.max(np.abs(biconjugate(cp, t) - p.u(t)))))
        t2 = t[(t > 1e-9) & (t < d[-2])]
        inv = max(inv, float(np.max(np.abs(generalized_inverse(cp, t2) - p.u_prime(t2)))))
    ok = bic <= 1e-6 and inv <= H * (1 + 1e-9)
    verdict(2, ok, f"biconjugate gap {bic:.2e} (tol 1e-6), inverse-vs-u' gap {inv:.2e} (tol {H})")


def test_three_circles(verdict):
    prof = named_profile("three_circles")
    lm = limit_measure(prof, 3.5)
    atoms, _ = atoms_and_gaps(lm, normalize=True)
    radii = np.array([r for r, _ in atoms])
    masses = np.array([m for _, m in atoms])
    struct = (radii.size == 3 and np.all(np.abs(radii / [1, 2, 3] - 1) <= 0.01)
              and np.all(np.abs(masses - 1 / 3) <= 0.01))
    worst = 1.0
    for noise in ("complex_gaussian", "cauchy"):
        frac = np.zeros(3)
        for _, zs in trials(prof, 120, 10, 3.5, noise):
            r = np.abs(zs.expanded())
            frac += [np.mean(np.abs(r - c) <= 0.1) for c in (1, 2, 3)]
        worst = min(worst, float(np.min(frac / 10)))
    verdict(3, struct and worst >= 0.30,
            f"atoms {np.round(radii, 4).tolist()} masses {np.round(masses, 4).tolist()}; "
            f"min mean fraction near a circle {worst:.3f} (need >= 0.30)")


def weyl_cdf(r):
    return np.minimum(np.asarray(r, dtype=float), 1.0) ** 2


def test_weyl_circular_law(verdict):
    parts, ok = [], True
    for noise in ("complex_gaussian", "rademacher", "cauchy", "pareto_log"):
        cfg = CompareConfig("weyl", noise=noise, n=500, trials=20, window=1.0, probes=[])
        agg = compare_report(cfg, target=weyl_cdf).aggregate
        kr, ka = agg["mean_ks_radial"], agg["mean_ks_angular"]
        ok = ok and agg["n_ok"] == 20 and kr <= 0.08 and ka <= 0.08
        parts.append(f"{noise} radial {kr:.4f} angular {ka:.4f}")
    verdict(4, ok, "; ".join(parts) + " (tol 0.08)")


def _quad_cdf(lm, r):
    # mu(D_r) by radial integration of the limit density
    val, _ = integrate.fixed_quad(lambda x: 2 * math.pi * x * density(lm, x), 0.0, r, n=200)
    return val


def test_invariant_ensembles(verdict):
    cases = [("elliptic", 2.0, lambda r: r**2 / (1 + r**2)), ("hyperbolic", 0.9, lambda r: r**2 / (1 - r**2))]
    parts, ok = [], True
    for kind, window, cdf in cases:
        prof = named_profile(kind, 0.5)
        lm = limit_measure(prof, window)
        oracle = max(abs(_quad_cdf(lm, r) - cdf(r)) for r in (0.3 * window, 0.7 * window, window))
        cfg = CompareConfig(kind, alpha=0.5, n=500, trials=20, window=window, probes=[])
        agg = compare_report(cfg, target=cdf, lm=lm).aggregate
        kr = agg["mean_ks_radial"]
        ok = ok and oracle <= 1e-4 and agg["n_ok"] == 20 and kr <= 0.08
        parts.append(f"{kind} radial {kr:.4f} (quadrature vs closed CDF {oracle:.1e})")
    verdict(5, ok, "; ".join(parts) + " (tol 0.08)")


def test_kac_clustering(verdict):
    fr, ka = [], []
    for _, zs in trials(named_profile("kac"), 500, 20, 2.0):
        z = zs.expanded()
        fr.append(np.mean(np.abs(np.log(np.abs(z))) <= 0.1))
        ka.append(ks_angular(z))
    f, a = float(np.mean(fr)), float(np.mean(ka))
    verdict(6, f >= 0.85 and a <= 0.08, f"mean fraction near |z|=1 {f:.4f} (need >= 0.85), "
            f"mean ks_angular {a:.4f} (tol 0.08)")


def test_theta_law(verdict):
    window = 4.0
    cfg = CompareConfig("theta", alpha=2.0, n=500, trials=20, window=window, probes=[])

    def cdf(r):
        return np.maximum(np.log(np.asarray(r, dtype=float)), 0.0) / 2

    agg = compare_report(cfg, target=cdf).aggregate
    inner = []
    for _, zs in trials(named_profile("theta", 2.0), 500, 20, window):
        z = zs.expanded(window_only=True)
        inner.append(np.mean(np.abs(z) < 0.95))
    kr, fi = agg["mean_ks_radial"], float(np.mean(inner))
    verdict(7, agg["n_ok"] == 20 and kr <= 0.1 and fi <= 0.02,
            f"mean ks_radial {kr:.4f} (tol 0.1), fraction inside D_0.95 {fi:.4f} (tol 0.02)")


def test_entire_lln(verdict):
    counts, agree = [], True
    for inst, zs in trials(named_profile("flat", 1.0), 1, 10, 50.0):
        c = zs.count_in_disk(50.0)
        agree = agree and c == count_zeros_in_disk(inst, 50.0)
        counts.append(c / 50.0)
    m = float(np.mean(counts))
    verdict(8, agree and 0.8 <= m <= 1.2, f"mean N(50)/50 {m:.3f} (need [0.8, 1.2]), "
            f"root count equals winding count in every trial: {agree}")


def test_potential_convergence(verdict):
    prof = named_profile("flat", 0.5)
    probes = [r * np.exp(1j * a) for r in (0.4, 0.8, 1.2) for a in (0.3, 2.4, 4.5)]
    dist = NoiseDistribution("complex_gaussian")
    vals = np.zeros((20, len(probes)))
    for i in range(20):
        inst = instantiate((prof, 1000), dist, trial_seed(DEFAULT_SEED, i), 1.2, relative=True)
        vals[i] = [potential_at(inst, z, prof)[0] for z in probes]
    gap = np.abs(vals.mean(axis=0) - 0.5 * np.abs(probes) ** 2)
    verdict(9, gap.max() <= 0.05, f"max |mean p_n - |z|^2/2| {gap.max():.4f} (tol 0.05)")


def test_equilibrium_certificate(verdict):
    tl = truncated_law(named_profile("lo_poly", 0.5), 1.0)
    rr = np.linspace(0.02, 2.0, 50)
    z = rr * np.exp(1j * (0.2 + 2.0 * math.pi * np.arange(50) / 11.0))
    gap = float(np.max(np.abs(equilibrium_potential(tl, z) - potential_quadrature(tl, z))))
    cert = flatness_certificate(tl, tol=1e-3)
    verdict(10, gap <= 1e-4 and cert.passed,
            f"closed vs quadrature {gap:.2e} (tol 1e-4), flatness deviation {cert.max_dev_support:.2e}, "
            f"outside margin {cert.min_gap_outside:.2e} (tol 1e-3)")


def test_table_rows(verdict):
    worst = 0.0
    for row in ("flat", "elliptic"):
        w = WEIGHT_ROWS[row]
        for t in (0.25, 0.5, 0.75):
            worst = max(worst, abs(orthonormal_rate(w, 400, t) - float(w.profile.u(t))))
    verdict(11, worst <= 0.05, f"max |(1/n) log f - u| {worst:.4f} (tol 0.05)")


def szego_distance(z, m=20000):
    # inner branch of |z e^{1-z}| = 1: log rho + 1 - rho cos(theta) = 0, rho in (0, 1]
    theta = np.linspace(-math.pi, math.pi, m, endpoint=False)
    rho = np.array([1.0 if abs(th) < 1e-12 else
                    optimize.brentq(lambda x: math.log(x) + 1 - x * math.cos(th), 1e-300, 1.0, xtol=1e-15)
                    for th in theta])
    curve = rho * np.exp(1j * theta)
    return np.min(np.abs(z[:, None] - curve[None, :]), axis=1)


def test_root_certification(verdict):
    res = 0.0
    for kind, a, window in [("lo_poly", 0.5, 1.2), ("kac", None, 2.0), ("elliptic", 0.5, 2.0),
                            ("flat", 0.5, 1.5), ("hyperbolic", 0.5, 0.9), ("theta", 2.0, 4.0),
                            ("three_circles", None, 3.5)]:
        for _, zs in trials(named_profile(kind, a or 1.0), 500, 1, window):
            res = max(res, zs.max_residual)
    rng = np.random.default_rng(DEFAULT_SEED)
    comp = 0.0
    for _ in range(20):
        deg = int(rng.integers(2, 65))
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        zs = find_roots_coefficients(c)
        comp = max(comp, float(match_roots(zs.expanded(), companion_roots(c)).max()))
    n = 60
    k = np.arange(n + 1)
    coeffs = np.exp(k * math.log(n) - log_factorial(k))
    sz = float(szego_distance(find_roots_coefficients(coeffs).expanded()).max())
    verdict(12, res <= 1e-10 and comp <= 1e-8 and sz <= 0.05,
            f"max residual at n=500 {res:.1e} (tol 1e-10), companion gap {comp:.1e} (tol 1e-8), "
            f"Szego max distance {sz:.4f} (tol 0.05)")
