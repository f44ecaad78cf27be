import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from zero_atlas.limitlaw import (
    atoms_and_gaps,
    density,
    limit_measure,
    quantile_radii,
    radial_cdf,
    sample_limit,
    support_annulus,
)
from zero_atlas.schedule import named_profile


def test_weyl_cdf():
    lm = limit_measure(named_profile("lo_poly", 0.5), 2.0)
    r = np.array([0.1, 0.3, 0.5, 0.9, 1.0, 1.2, 1.9])
    np.testing.assert_allclose(radial_cdf(lm, r), np.minimum(r**2, 1.0), atol=1e-6)


def test_weyl_cdf_from_density_quadrature():
    # independent oracle: integrate the density 1/pi over the disk
    lm = limit_measure(named_profile("lo_poly", 0.5), 1.0)
    for r in (0.2, 0.6, 0.95):
        m, _ = integrate.dblquad(lambda rr, th: rr / math.pi, 0, 2 * math.pi, 0, r)
        assert lm.radial_cdf(r) == pytest.approx(m, abs=1e-6)


def test_theta_cdf():
    lm = limit_measure(named_profile("theta", 2.0), 4.0)
    r = np.array([0.3, 0.9, 1.5, 2.0, 3.9])
    ref = np.where(r < 1, 0.0, np.log(np.maximum(r, 1)) / 2)
    np.testing.assert_allclose(radial_cdf(lm, r), ref, atol=1e-6)


def test_kac_cdf():
    lm = limit_measure(named_profile("kac"), 2.0)
    assert radial_cdf(lm, math.exp(-0.1)) == 0.0
    assert radial_cdf(lm, math.exp(0.1)) == 1.0


def test_cdf_beyond_r0_raises():
    lm = limit_measure(named_profile("hyperbolic", 0.5), 0.9)
    with pytest.raises(ValueError):
        radial_cdf(lm, 1.0)


def test_flat_density():
    lm = limit_measure(named_profile("flat", 0.5), 1.5)
    assert density(lm, 0.5) == pytest.approx(1 / math.pi, abs=1e-4)
    assert density(lm, 0.3j) == pytest.approx(1 / math.pi, abs=1e-4)


def test_hyperbolic_density():
    lm = limit_measure(named_profile("hyperbolic", 0.5), 0.9)
    assert density(lm, 0.5) == pytest.approx(16 / (9 * math.pi), abs=1e-4)


def test_theta_density():
    lm = limit_measure(named_profile("theta", 2.0), 4.0)
    assert density(lm, 2.0) == pytest.approx(1 / (16 * math.pi), abs=1e-4)


def test_density_errors():
    lm = limit_measure(named_profile("three_circles"), 3.5)
    with pytest.raises(ValueError):
        density(lm, 2.0)
    with pytest.raises(ValueError):
        density(limit_measure(named_profile("flat", 0.5), 1.0), 0.0)


def test_three_circles_atoms_and_gaps():
    lm = limit_measure(named_profile("three_circles"), 3.5)
    atoms, gaps = atoms_and_gaps(lm, normalize=True)
    np.testing.assert_allclose([a for a, _ in atoms], [1, 2, 3], rtol=1e-3)
    np.testing.assert_allclose([m for _, m in atoms], [1 / 3] * 3, atol=1e-3)
    inner = [(lo, hi) for lo, hi in gaps if lo >= 0.99 and hi <= 3.01]
    np.testing.assert_allclose(inner, [(1, 2), (2, 3)], rtol=1e-3)


def test_flat_no_atoms_no_gaps():
    atoms, gaps = atoms_and_gaps(limit_measure(named_profile("flat", 0.5), 2.0))
    assert atoms == [] and gaps == []


def test_kac_atom_and_gaps():
    lm = limit_measure(named_profile("kac"), 2.0)
    atoms, gaps = atoms_and_gaps(lm)
    assert len(atoms) == 1
    assert atoms[0][0] == pytest.approx(1.0, rel=1e-3)
    assert atoms[0][1] == pytest.approx(1.0, abs=1e-9)
    assert len(gaps) == 2
    assert gaps[0][0] == 0.0
    assert gaps[0][1] == pytest.approx(1.0, rel=1e-3)
    assert gaps[1][0] == pytest.approx(1.0, rel=1e-3)
    assert gaps[1][1] == math.inf


@pytest.mark.parametrize(
    "kind,a,win", [("flat", 0.5, 2.0), ("elliptic", 0.5, 3.0), ("hyperbolic", 0.5, 0.9), ("theta", 2.0, 4.0)],
)
def test_density_integrates_to_cdf_increment(kind, a, win):
    lm = limit_measure(named_profile(kind, a), win)
    r1, r2 = (1.2, 3.5) if kind == "theta" else (0.2 * win, 0.8 * win)
    m, _ = integrate.quad(lambda r: 2 * math.pi * r * density(lm, r), r1, r2, limit=200)
    assert m == pytest.approx(lm.radial_cdf(r2) - lm.radial_cdf(r1), abs=1e-4)


def test_three_circles_left_right_limits():
    lm = limit_measure(named_profile("three_circles"), 3.5)
    for k, r in enumerate((1.0, 2.0, 3.0)):
        assert lm.radial_cdf(r, side="left") == pytest.approx(k, abs=1e-9)
        assert lm.radial_cdf(r, side="right") == pytest.approx(k + 1, abs=1e-9)


def test_support_annulus():
    assert support_annulus(named_profile("kac")) == pytest.approx((1.0, 1.0))
    lo, hi = support_annulus(named_profile("three_circles"))
    assert (lo, hi) == pytest.approx((1.0, 3.0))
    lo, hi = support_annulus(named_profile("theta", 2.0))
    assert lo == pytest.approx(1.0) and hi == math.inf


def test_sample_kac():
    lm = limit_measure(named_profile("kac"), 2.0)
    z = sample_limit(lm, 2.0, 10_000, seed=3)
    np.testing.assert_allclose(np.abs(z), 1.0, rtol=1e-3)
    ang = np.mod(np.angle(z), 2 * math.pi) / (2 * math.pi)
    assert stats.kstest(ang, "uniform").statistic <= 0.02


def test_sample_weyl():
    lm = limit_measure(named_profile("lo_poly", 0.5), 1.0)
    z = sample_limit(lm, 1.0, 10_000, seed=4)
    assert stats.kstest(np.abs(z) ** 2, "uniform").statistic <= 0.02


def test_sample_three_circles():
    lm = limit_measure(named_profile("three_circles"), 4.0)
    z = sample_limit(lm, 4.0, 30_000, seed=5)
    r = np.abs(z)
    for c in (1.0, 2.0, 3.0):
        assert np.mean(np.abs(r - c) < 0.01) == pytest.approx(1 / 3, abs=0.01)


def test_sample_deterministic_and_zero_mass():
    lm = limit_measure(named_profile("flat", 0.5), 1.0)
    np.testing.assert_array_equal(sample_limit(lm, 1.0, 50, 9), sample_limit(lm, 1.0, 50, 9))
    with pytest.raises(ValueError):
        sample_limit(limit_measure(named_profile("kac"), 0.9), 0.9, 10, 1)


def test_quantiles_weyl():
    lm = limit_measure(named_profile("lo_poly", 0.5), 1.0)
    q = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(quantile_radii(lm, q), np.sqrt(q), atol=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 2.5), st.lists(st.floats(0.01, 0.99), min_size=2, max_size=20))
def test_cdf_monotone(a, fr):
    lm = limit_measure(named_profile("elliptic", a), 3.0)
    r = 3.0 * np.sort(np.asarray(fr))
    c = lm.radial_cdf(r)
    assert np.all(np.diff(c) >= 0) and np.all(c >= 0)
