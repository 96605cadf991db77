"""Counter-based increment generator: determinism, distribution, addressing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr, ndtri

from theta_stationary import EnsembleSeeding, IncrementStream, coupled_pair
from theta_stationary.noise import (
    inverse_normal_cdf,
    normals_at,
    path_seed,
    resolve_worker_count,
    uniforms_at,
)
from theta_stationary.noise import _uniforms_from_words


class TestInverseNormalCdf:
    def test_matches_reference_to_near_machine_precision(self):
        # Probe the central region and both tails down to 1e-300.
        u = np.concatenate([
            np.linspace(1e-4, 1 - 1e-4, 2001),
            np.logspace(-300, -4, 500),
            1.0 - np.logspace(-16, -4, 200),
        ])
        ours = inverse_normal_cdf(u)
        ref = ndtri(u)
        scale = np.maximum(1.0, np.abs(ref))
        assert np.max(np.abs(ours - ref) / scale) < 5e-15

    def test_median_and_quartiles(self):
        assert inverse_normal_cdf(0.5) == 0.0
        assert float(inverse_normal_cdf(ndtr(1.0))) == pytest.approx(1.0, rel=1e-14)
        assert float(inverse_normal_cdf(ndtr(-2.5))) == pytest.approx(-2.5, rel=1e-14)

    def test_antisymmetry(self):
        # Stay above 1e-6 so that 1-u is representable to ~1e-10 relative
        # tail mass; below that the complement itself moves the quantile.
        u = np.linspace(1e-6, 0.5, 1000)
        left = inverse_normal_cdf(u)
        right = inverse_normal_cdf(1.0 - u)
        assert np.max(np.abs(left + right)) < 1e-9

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 2.0, np.nan])
    def test_domain_rejected(self, bad):
        with pytest.raises(ValueError):
            inverse_normal_cdf(bad)

    @given(st.floats(1e-300, 1.0 - 2.0 ** -53))
    @settings(max_examples=200, deadline=None)
    def test_monotone_and_finite_everywhere(self, u):
        z = float(inverse_normal_cdf(u))
        assert np.isfinite(z)
        v = min(u * 1.0000001, 1.0 - 2.0 ** -53)
        if v > u:
            assert float(inverse_normal_cdf(v)) >= z


class TestWordMapping:
    def test_extreme_words_stay_inside_open_interval(self):
        words = np.array([0, 1, 2 ** 64 - 2, 2 ** 64 - 1], dtype=np.uint64)
        u = _uniforms_from_words(words)
        assert np.all(u > 0.0) and np.all(u < 1.0)
        assert u.min() == 2.0 ** -53
        assert u.max() == 1.0 - 2.0 ** -53
        inverse_normal_cdf(u)  # must not raise even at the extremes

    def test_uniform_range_on_bulk(self):
        u = uniforms_at(np.uint64(7), np.arange(100_000, dtype=np.uint64))
        assert u.min() > 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.005


class TestAddressing:
    def test_replay_is_exact(self):
        idx = np.arange(1000, dtype=np.uint64)
        a = normals_at(np.uint64(42), idx)
        b = normals_at(np.uint64(42), idx)
        assert np.array_equal(a, b)

    def test_different_seeds_decorrelate(self):
        idx = np.arange(1000, dtype=np.uint64)
        a = normals_at(np.uint64(1), idx)
        b = normals_at(np.uint64(2), idx)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.15

    def test_random_access_matches_sequential(self):
        idx = np.arange(50, dtype=np.uint64)
        seq = normals_at(np.uint64(9), idx)
        shuffled = np.array([17, 3, 42, 0], dtype=np.uint64)
        assert np.array_equal(normals_at(np.uint64(9), shuffled), seq[[17, 3, 42, 0]])

    def test_path_seeds_are_distinct(self):
        seeds = np.array([path_seed(123, i) for i in range(10_000)], dtype=np.uint64)
        assert len(np.unique(seeds)) == 10_000

    def test_broadcast_over_paths(self):
        seeds = np.array([path_seed(5, i) for i in range(8)], dtype=np.uint64)
        block = normals_at(seeds, np.uint64(3))
        singles = np.array([float(normals_at(s, np.uint64(3))) for s in seeds])
        assert np.array_equal(block, singles)


class TestIncrementStream:
    def test_take_equals_repeated_next(self):
        a = IncrementStream(seed=11, h=0.25)
        b = IncrementStream(seed=11, h=0.25)
        block = a.take(40)
        singles = np.array([b.next_increment() for _ in range(40)])
        assert np.array_equal(block, singles)

    def test_zero_step_gives_zero_increments(self):
        s = IncrementStream(seed=11, h=0.0)
        assert np.all(s.take(10) == 0.0)

    def test_invalid_step_rejected(self):
        with pytest.raises(ValueError):
            IncrementStream(seed=11, h=-1.0)
        with pytest.raises(ValueError):
            IncrementStream(seed=11, h=np.inf)

    def test_scaling_by_sqrt_h(self):
        a = IncrementStream(seed=11, h=1.0).take(100)
        b = IncrementStream(seed=11, h=4.0).take(100)
        assert np.allclose(b, 2.0 * a, rtol=1e-15)

    def test_increment_moments(self):
        h = 0.3
        draws = IncrementStream(seed=2024, h=h).take(100_000)
        se_mean = np.sqrt(h / 100_000)
        assert abs(draws.mean()) < 4 * se_mean
        assert abs(draws.var() - h) < 4 * h * np.sqrt(2.0 / 100_000)

    def test_normality_not_rejected(self):
        from theta_stationary import ks_test
        z = IncrementStream(seed=31, h=1.0).take(5000)
        result = ks_test(z, lambda t: ndtr(np.asarray(t)))
        assert result.p_value > 0.005


class TestEnsembleSeeding:
    def test_seed_table_matches_single_lookups(self):
        seeding = EnsembleSeeding(base_seed=99)
        table = seeding.seeds(64)
        singles = np.array([seeding.seed_for(i) for i in range(64)], dtype=np.uint64)
        assert np.array_equal(table, singles)

    def test_streams_are_independent_cursors(self):
        seeding = EnsembleSeeding(base_seed=99)
        s0 = seeding.stream(0, 0.5)
        s0b = seeding.stream(0, 0.5)
        first = s0.next_increment()
        assert s0b.next_increment() == first

    def test_coupled_pair_shares_seed(self):
        seeding = EnsembleSeeding(base_seed=5)
        a, b = coupled_pair(seeding, 3, 0.1)
        assert np.array_equal(a.take(20), b.take(20))


class TestWorkerCount:
    def test_default_is_single_threaded(self, monkeypatch):
        monkeypatch.delenv("THETA_STATIONARY_THREADS", raising=False)
        assert resolve_worker_count(None) == 1

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("THETA_STATIONARY_THREADS", "6")
        assert resolve_worker_count(None) == 6

    def test_explicit_overrides_env(self, monkeypatch):
        monkeypatch.setenv("THETA_STATIONARY_THREADS", "6")
        assert resolve_worker_count(2) == 2

    def test_invalid_counts_rejected(self):
        with pytest.raises(ValueError):
            resolve_worker_count(0)
        with pytest.raises(ValueError):
            resolve_worker_count(-3)
