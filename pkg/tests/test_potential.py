import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from zero_atlas.potential import (
    WEIGHT_ROWS,
    discretize_law,
    discretize_uniform_disk,
    energy,
    equilibrium_potential,
    flatness_certificate,
    orthonormal_rate,
    potential_quadrature,
    support_nested,
    truncated_law,
    varadhan_u,
)
from zero_atlas.schedule import named_profile

WEYL = named_profile("lo_poly", 0.5)


def weyl_potential(r):
    # log potential of the uniform probability measure on the unit disk
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1, 0.5 * (1 - r**2), -np.log(np.maximum(r, 1e-300)))


def test_weyl_outer_branch():
    tl = truncated_law(WEYL, 1.0)
    assert tl.support == pytest.approx((0.0, 1.0))
    assert equilibrium_potential(tl, 2.0) == pytest.approx(-math.log(2.0), abs=1e-12)


def test_weyl_edge():
    assert equilibrium_potential(truncated_law(WEYL, 1.0), 1.0) == pytest.approx(0.0, abs=1e-12)


def test_kac_circle():
    tl = truncated_law(named_profile("kac"), 1.0)
    assert equilibrium_potential(tl, 3.0) == pytest.approx(-math.log(3.0), abs=1e-12)
    assert equilibrium_potential(tl, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_closed_form_against_uniform_disk_formula():
    tl = truncated_law(WEYL, 1.0)
    r = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(equilibrium_potential(tl, r + 0j), weyl_potential(r), atol=1e-9)


def test_quadrature_weyl():
    tl = truncated_law(WEYL, 1.0)
    assert potential_quadrature(tl, 2.0) == pytest.approx(-math.log(2.0), abs=1e-4)
    assert potential_quadrature(tl, 0.0) == pytest.approx(0.5, abs=1e-4)


def test_quadrature_three_circles():
    tl = truncated_law(named_profile("three_circles"), 3.0)
    assert potential_quadrature(tl, 10.0) == pytest.approx(-3 * math.log(10.0), abs=1e-4)
    # inside the smallest circle each circle contributes -log r
    assert potential_quadrature(tl, 0.5) == pytest.approx(-math.log(6.0), abs=1e-4)


@pytest.mark.parametrize("kind,a,kappa", [("lo_poly", 0.5, 1.0), ("three_circles", None, 3.0),
                                         ("flat", 0.5, 0.7), ("elliptic", 1.0, 0.5),
                                         ("hyperbolic", 0.5, 1.0), ("theta", 2.0, 1.0)])
def test_closed_form_vs_quadrature(kind, a, kappa):
    tl = truncated_law(named_profile(kind, a or 1.0), kappa)
    r_out = tl.support[1]
    r = np.linspace(0.02, 2.0, 50) * r_out
    r = r[r < tl.profile.r0]
    z = r * np.exp(1j * np.arange(r.size))
    gap = np.abs(equilibrium_potential(tl, z) - potential_quadrature(tl, z))
    assert gap.max() <= 1e-4


def test_quadrature_independent_oracle():
    # direct 1-D integral of -max(log r, log|z|) against the density 2r on [0,1]
    tl = truncated_law(WEYL, 1.0)
    for a in (0.3, 0.7, 1.5):
        ref, _ = integrate.quad(lambda r: -max(math.log(r), math.log(a)) * 2 * r, 0, 1, points=[min(a, 1)])
        assert potential_quadrature(tl, a) == pytest.approx(ref, abs=1e-8)


def test_kappa_range():
    with pytest.raises(ValueError):
        truncated_law(WEYL, 0.0)
    with pytest.raises(ValueError):
        truncated_law(WEYL, 1.5)
    assert truncated_law(named_profile("flat", 0.5), 3.0).total_mass == 3.0


def test_truncated_mass():
    tl = truncated_law(named_profile("flat", 0.5), 0.6)
    r_out = tl.support[1]
    assert tl.mass(10 * r_out)[0] == pytest.approx(0.6)
    assert tl.mass(0.5 * r_out)[0] == pytest.approx(0.25 * 0.6, rel=1e-6)


def test_energy_two_points():
    assert energy([1, -1], [1, 1]) == pytest.approx(-math.log(2.0))


def test_energy_single_point():
    z0 = 1.7 + 0.2j
    prof = named_profile("flat", 0.5)
    assert energy([z0], [0.8], prof) == pytest.approx(0.8 * 0.5 * abs(z0) ** 2, rel=1e-9)


def test_energy_rejects_coincident():
    with pytest.raises(ValueError):
        energy([1.0, 1.0], [1, 1])


def test_energy_minimizer():
    tl = truncated_law(WEYL, 1.0)
    pts, w = discretize_law(tl, 20, 20)
    J_mu = energy(pts, w, WEYL)
    qp, qw = discretize_uniform_disk(1.3, 1.0, 20, 20)
    J_other = energy(qp, qw, WEYL)
    assert J_mu < J_other
    assert abs(J_mu - J_other) > 0.01


def test_flatness_weyl():
    rep = flatness_certificate(truncated_law(WEYL, 1.0))
    assert rep.passed
    assert rep.max_dev_support <= 1e-3
    rows = rep.rows()
    # the support reaches the origin, so only outer probes lie outside it
    assert len(rows) == 100 + 20 and {"r", "F", "in_support"} <= set(rows[0])


def test_flatness_three_circles():
    assert flatness_certificate(truncated_law(named_profile("three_circles"), 3.0)).passed


@pytest.mark.parametrize("kind", ["flat", "hyperbolic"])
def test_nesting(kind):
    assert support_nested(named_profile(kind, 0.5), [0.3, 0.7, 1.0])


@pytest.mark.parametrize("row", ["flat", "elliptic"])
@pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
def test_table_rows(row, t):
    w = WEIGHT_ROWS[row]
    rate = orthonormal_rate(w, 400, t)
    assert abs(rate - float(w.profile.u(t))) <= 0.05
    assert varadhan_u(w, t) == pytest.approx(float(w.profile.u(t)), abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.99), st.floats(0.01, 4.0))
def test_potential_continuous_across_branches(kappa, r):
    tl = truncated_law(named_profile("flat", 0.5), kappa)
    a = equilibrium_potential(tl, r)
    b = equilibrium_potential(tl, r * (1 + 1e-7))
    assert abs(a - b) <= 1e-5
