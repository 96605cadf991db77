"""Distribution distances, KS machinery, and reference laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import iv, ndtr

from theta_stationary import (
    ConstraintViolation,
    EmpiricalDistribution,
    bl_distance_upper,
    ecdf,
    histogram_density,
    ks_test,
    moments,
    quartic_gibbs,
    wasserstein1_1d,
)
from theta_stationary.stationary import NormalReference, _ks_tail


finite_samples = st.lists(
    st.floats(-50, 50, allow_nan=False, allow_infinity=False),
    min_size=2, max_size=60).map(np.array)


class TestEcdf:
    def test_step_values(self):
        cdf = ecdf([1.0, 2.0, 3.0, 4.0])
        assert cdf(0.5) == 0.0
        assert cdf(1.0) == 0.25
        assert cdf(2.5) == 0.5
        assert cdf(4.0) == 1.0

    def test_vectorized(self):
        cdf = ecdf([0.0, 1.0])
        out = cdf(np.array([-1.0, 0.0, 0.5, 2.0]))
        assert np.allclose(out, [0.0, 0.5, 0.5, 1.0])

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ConstraintViolation):
            ecdf([])
        with pytest.raises(ConstraintViolation):
            ecdf([1.0, np.nan])


class TestEmpiricalDistribution:
    def test_quantile_inverts_cdf_on_atoms(self):
        emp = EmpiricalDistribution.from_sample([3.0, 1.0, 2.0])
        assert emp.n == 3
        assert emp.quantile(0.01) == 1.0
        assert emp.quantile(0.5) == 2.0
        assert emp.quantile(1.0) == 3.0

    @given(finite_samples)
    @settings(max_examples=50, deadline=None)
    def test_cdf_is_monotone_into_unit_interval(self, sample):
        emp = EmpiricalDistribution.from_sample(sample)
        grid = np.linspace(sample.min() - 1, sample.max() + 1, 40)
        vals = emp.cdf(grid)
        assert np.all(np.diff(vals) >= 0.0)
        assert vals[0] == 0.0 and vals[-1] == 1.0


class TestKs:
    def test_statistic_against_hand_computation(self):
        # Three points at -1, 0, 1 versus the standard normal: the largest
        # deviation sits just left of the midpoint atom.
        result = ks_test(np.array([-1.0, 0.0, 1.0]), lambda t: ndtr(np.asarray(t)))
        assert result.statistic == pytest.approx(0.1746780794018763, abs=1e-15)
        assert result.n == 3

    def test_tail_series_value(self):
        assert _ks_tail(1.0) == pytest.approx(0.26999967167735456, rel=1e-12)

    def test_tail_series_guards(self):
        assert _ks_tail(0.04) == 1.0
        assert _ks_tail(8.0) < 1e-50

    def test_tail_series_monotone(self):
        # The asymptotic series is reliable away from the small-lambda clamp.
        lams = np.linspace(0.4, 3.0, 60)
        vals = [_ks_tail(l) for l in lams]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_p_value_decreases_with_statistic(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=400)
        p_centered = ks_test(base, lambda t: ndtr(np.asarray(t))).p_value
        p_shifted = ks_test(base + 0.5, lambda t: ndtr(np.asarray(t))).p_value
        assert p_shifted < p_centered

    def test_well_specified_sample_not_rejected(self):
        rng = np.random.default_rng(12)
        sample = rng.normal(size=2000)
        result = ks_test(sample, lambda t: ndtr(np.asarray(t)))
        assert result.p_value > 0.01

    def test_bad_cdf_rejected(self):
        with pytest.raises(ConstraintViolation, match="cdf"):
            ks_test(np.array([0.0, 1.0]), lambda t: np.asarray(t) * 10.0)

    @given(shift=st.floats(-3, 3, allow_nan=False), scale=st.floats(0.1, 5))
    @settings(max_examples=40, deadline=None)
    def test_statistic_invariant_under_affine_maps(self, shift, scale):
        rng = np.random.default_rng(5)
        sample = rng.normal(size=100)
        d0 = ks_test(sample, lambda t: ndtr(np.asarray(t))).statistic
        mapped = scale * sample + shift
        d1 = ks_test(mapped,
                     lambda t: ndtr((np.asarray(t) - shift) / scale)).statistic
        assert d1 == pytest.approx(d0, abs=1e-12)


class TestWasserstein:
    def test_equal_sizes_reduce_to_order_statistics(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=300)
        b = rng.normal(size=300) + 0.3
        pooled = wasserstein1_1d(a, b)
        matched = np.abs(np.sort(a) - np.sort(b)).mean()
        assert pooled == pytest.approx(matched, abs=1e-12)

    def test_translation_identity(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=257)
        assert wasserstein1_1d(a, a + 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_self_distance_zero(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=100)
        assert wasserstein1_1d(a, a) == 0.0

    @given(finite_samples, finite_samples, finite_samples)
    @settings(max_examples=40, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        dab = wasserstein1_1d(a, b)
        dbc = wasserstein1_1d(b, c)
        dac = wasserstein1_1d(a, c)
        assert dac <= dab + dbc + 1e-10

    @given(finite_samples, finite_samples)
    @settings(max_examples=40, deadline=None)
    def test_symmetry(self, a, b):
        assert wasserstein1_1d(a, b) == pytest.approx(wasserstein1_1d(b, a), abs=1e-12)

    def test_bounded_lipschitz_cap(self):
        a = np.zeros(10)
        b = np.full(10, 1e6)
        assert wasserstein1_1d(a, b) == pytest.approx(1e6)
        assert bl_distance_upper(a, b) == 2.0
        assert bl_distance_upper(a, a + 0.25) == pytest.approx(0.25, abs=1e-12)


class TestMoments:
    def test_scalar_sample(self):
        summary = moments(np.array([1.0, 2.0, 3.0, 4.0]))
        assert summary.mean[0] == pytest.approx(2.5)
        assert summary.variance == pytest.approx(np.var([1, 2, 3, 4], ddof=1))
        assert summary.second_moment == pytest.approx(7.5)
        assert summary.fourth_moment == pytest.approx((1 + 16 + 81 + 256) / 4)

    def test_bivariate_radial_moments(self):
        sample = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        summary = moments(sample)
        assert summary.second_moment == pytest.approx(1.0)
        assert summary.fourth_moment == pytest.approx(1.0)
        assert np.allclose(summary.mean, 0.0)

    def test_requires_two_observations(self):
        with pytest.raises(ConstraintViolation):
            moments(np.array([1.0]))


class TestHistogramDensity:
    def test_1d_normalization(self):
        rng = np.random.default_rng(3)
        edges, density = histogram_density(rng.normal(size=5000), bins=32,
                                           data_range=(-5, 5))
        assert np.sum(density * np.diff(edges)) == pytest.approx(1.0)

    def test_2d_normalization_and_pinned_grid(self):
        rng = np.random.default_rng(4)
        sample = rng.normal(size=(4000, 2))
        xe, ye, density = histogram_density(sample, bins=16,
                                            data_range=[[-4, 4], [-4, 4]])
        area = np.outer(np.diff(xe), np.diff(ye))
        assert np.sum(density * area) == pytest.approx(1.0)
        assert xe[0] == -4 and ye[-1] == 4

    def test_rejects_higher_dimensions(self):
        with pytest.raises(ConstraintViolation):
            histogram_density(np.zeros((5, 3)))


class TestNormalReference:
    def test_quantile_cdf_roundtrip(self):
        ref = NormalReference(mean=1.0, variance=4.0)
        xs = np.linspace(-6, 8, 101)
        assert np.allclose(ref.quantile(ref.cdf(xs)), xs, atol=1e-9)

    def test_moments(self):
        ref = NormalReference(mean=1.0, variance=4.0)
        assert ref.moment(1) == 1.0
        assert ref.moment(2) == 5.0
        assert ref.moment(4) == 73.0
        centered = NormalReference(mean=0.0, variance=2.0)
        assert centered.moment(3) == 0.0
        assert centered.moment(4) == 12.0

    def test_variance_must_be_positive(self):
        with pytest.raises(ConstraintViolation):
            NormalReference(variance=0.0)


class TestQuarticGibbs:
    def test_normalizer_matches_bessel_identity(self):
        # Z = integral exp(-x^2/2 - x^4/4) dx equals
        # (pi/2) e^{1/8} (I_{-1/4}(1/8) - I_{1/4}(1/8)).
        ref = quartic_gibbs()
        bessel = (math.pi / 2.0) * math.exp(0.125) * (iv(-0.25, 0.125) - iv(0.25, 0.125))
        assert ref.normalizer == pytest.approx(bessel, rel=1e-12)

    def test_moment_identity(self):
        # Integrating (x^2 + x^3) * density by parts gives
        # E[X^2] + E[X^4] = 1 exactly.
        ref = quartic_gibbs()
        assert ref.moment(2) + ref.moment(4) == pytest.approx(1.0, abs=1e-12)
        assert ref.moment(2) == pytest.approx(0.4679199169736652, rel=1e-12)

    def test_symmetry(self):
        ref = quartic_gibbs()
        assert ref.moment(1) == pytest.approx(0.0, abs=1e-13)
        assert float(ref.cdf(0.0)) == pytest.approx(0.5, abs=1e-13)
        xs = np.linspace(0.1, 3.0, 20)
        assert np.allclose(ref.cdf(-xs) + ref.cdf(xs), 1.0, atol=1e-13)

    def test_cdf_quantile_roundtrip(self):
        ref = quartic_gibbs()
        q = np.linspace(1e-6, 1 - 1e-6, 501)
        assert np.abs(ref.cdf(ref.quantile(q)) - q).max() < 1e-12

    def test_quantile_cdf_roundtrip_in_the_bulk(self):
        ref = quartic_gibbs()
        xs = np.linspace(-2.0, 2.0, 101)
        assert np.abs(ref.quantile(ref.cdf(xs)) - xs).max() < 1e-10

    def test_quantile_domain(self):
        ref = quartic_gibbs()
        with pytest.raises(ConstraintViolation):
            ref.quantile(np.array([0.0]))
        with pytest.raises(ConstraintViolation):
            ref.quantile(np.array([1.0]))

    def test_matched_sample_moments(self):
        ref = quartic_gibbs()
        sample = ref.sample_matched(200_000)
        assert sample.mean() == pytest.approx(0.0, abs=1e-12)
        assert (sample ** 2).mean() == pytest.approx(ref.moment(2), abs=1e-4)

    def test_density_integrates_to_one(self):
        ref = quartic_gibbs()
        xs = np.linspace(-8, 8, 20001)
        mass = np.trapezoid(ref.pdf(xs), xs)
        assert mass == pytest.approx(1.0, abs=1e-9)
