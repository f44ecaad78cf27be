"""Limit laws for zeros of random analytic functions, and the tools to test them.

A coefficient profile ``u`` determines the limit of the empirical zero
measure through its Legendre-Fenchel transform ``I``: ``mu(D_r) = I'(log r)``.
"""

from .conjugate import ConjugateProfile, biconjugate, conjugate, conjugate_values, generalized_inverse
from .empirics import (
    CompareConfig,
    ComparisonReport,
    compare_report,
    empirical_radial_cdf,
    ks_angular,
    ks_radial,
    potential_at,
)
from .limitlaw import LimitMeasure, atoms_and_gaps, density, limit_measure, radial_cdf, sample_limit
from .potential import (
    TruncatedLaw,
    energy,
    equilibrium_potential,
    flatness_certificate,
    potential_quadrature,
    truncated_law,
)
from .roots import ZeroSet, companion_roots, count_zeros_in_disk, find_roots, find_roots_coefficients
from .sampler import (
    NoiseDistribution,
    RandomFunctionInstance,
    derivative,
    draw_noise,
    evaluate,
    instantiate,
    truncation_degree,
)
from .schedule import (
    CoefficientSchedule,
    RadialProfile,
    coefficients,
    custom_profile,
    measure_to_profile,
    named_profile,
    profile_from_samples,
)

__version__ = "0.1.0"
