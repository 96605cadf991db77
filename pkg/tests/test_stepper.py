"""Implicit solve correctness, scheme exactness on linear problems, drivers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from theta_stationary import (
    ConstraintViolation,
    EnsembleSeeding,
    ImplicitSolverConfig,
    IncrementStream,
    SdeProblem,
    SolverFailure,
    ThetaScheme,
    builtin,
    g_map,
    simulate_coupled,
    simulate_ensemble,
    simulate_path,
    solve_implicit,
    step,
)
from theta_stationary.stepper import SolverStats, solve_implicit_bisection


@pytest.fixture(scope="module")
def cubic():
    problem, _ = builtin("cubic1d")
    return problem


@pytest.fixture(scope="module")
def plane():
    problem, _ = builtin("cubic2d")
    return problem


class TestImplicitSolve:
    def test_known_root_of_cubic_equation(self, cubic):
        # x - 0.5 * f(x) = 0.8 with f(x) = -(x + x^3)/2 reduces to
        # 0.25 x^3 + 1.25 x - 0.8 = 0, whose real root is below.
        x = solve_implicit(cubic, 1.0, 0.5, np.array([[0.8]]))
        assert x[0, 0] == pytest.approx(0.5973663706349217, rel=1e-13)

    def test_newton_matches_bisection(self, cubic):
        rng = np.random.default_rng(1)
        rhs = 3.0 * rng.normal(size=(200, 1))
        for theta in (0.5, 1.0):
            sol = solve_implicit(cubic, theta, 0.5, rhs)
            ref = solve_implicit_bisection(cubic, theta, 0.5, rhs)
            assert np.abs(sol - ref).max() < 1e-10

    def test_all_residuals_within_tolerance(self, cubic):
        rng = np.random.default_rng(2)
        rhs = 5.0 * rng.normal(size=(500, 1))
        config = ImplicitSolverConfig()
        sol = solve_implicit(cubic, 1.0, 0.25, rhs, config=config)
        resid = np.abs(g_map(cubic, 1.0, 0.25, sol) - rhs)[:, 0]
        tol = config.abs_tol + config.rel_tol * np.abs(rhs[:, 0])
        assert np.all(resid <= np.maximum(tol, 1e-12))

    def test_zero_implicit_weight_returns_rhs(self, cubic):
        rhs = np.array([[0.3], [-4.0]])
        out = solve_implicit(cubic, 0.0, 0.5, rhs)
        assert np.array_equal(out, rhs)

    def test_single_point_shape_round_trip(self, cubic):
        out = solve_implicit(cubic, 1.0, 0.5, np.array([0.8]))
        assert out.shape == (1,)

    def test_dimension_mismatch_rejected(self, plane):
        with pytest.raises(ConstraintViolation, match="dimension"):
            solve_implicit(plane, 0.5, 0.1, np.zeros((4, 3)))

    def test_plane_system_residuals(self, plane):
        rng = np.random.default_rng(3)
        rhs = 4.0 * rng.normal(size=(300, 2))
        sol = solve_implicit(plane, 0.5, 0.1, rhs)
        resid = np.sqrt(((g_map(plane, 0.5, 0.1, sol) - rhs) ** 2).sum(axis=1))
        assert resid.max() < 1e-10

    def test_plane_system_large_step(self, plane):
        rng = np.random.default_rng(4)
        rhs = 50.0 * rng.normal(size=(100, 2))
        sol = solve_implicit(plane, 1.0, 10.0, rhs)
        resid = np.sqrt(((g_map(plane, 1.0, 10.0, sol) - rhs) ** 2).sum(axis=1))
        scale = np.sqrt((rhs ** 2).sum(axis=1))
        assert np.all(resid <= 1e-14 + 1e-12 * scale + 1e-12)

    def test_central_differences_match_analytic_jacobian(self, plane):
        stripped = SdeProblem(dim=2, drift=plane.drift, diffusion=plane.diffusion)
        rng = np.random.default_rng(5)
        rhs = 4.0 * rng.normal(size=(100, 2))
        with_jac = solve_implicit(plane, 0.5, 0.1, rhs)
        without = solve_implicit(stripped, 0.5, 0.1, rhs)
        assert np.abs(with_jac - without).max() < 1e-12

    def test_nan_drift_raises_solver_failure(self):
        bad = SdeProblem(dim=1, drift=lambda x: np.full_like(np.asarray(x, float), np.nan),
                         diffusion=lambda x: np.ones_like(np.asarray(x, float)))
        with pytest.raises(SolverFailure):
            solve_implicit(bad, 1.0, 0.5, np.array([[0.8]]))

    def test_stats_accumulate(self, cubic):
        stats = SolverStats()
        solve_implicit(cubic, 1.0, 0.5, np.array([[0.8]]), stats=stats)
        solve_implicit(cubic, 1.0, 0.5, np.array([[0.2]]), stats=stats)
        assert stats.solves == 2
        assert stats.newton_iterations > 0
        assert 0.0 <= stats.max_residual < 1e-10

    @given(x=st.floats(-20, 20), y=st.floats(-20, 20),
           theta=st.floats(0.01, 1.0), h=st.floats(0.001, 10.0))
    @settings(max_examples=150, deadline=None)
    def test_implicit_map_expands_gaps(self, cubic, x, y, theta, h):
        # For a dissipative drift, G(x) = x - theta*h*f(x) is monotone with
        # slope at least one: gaps never shrink through G.
        gx = g_map(cubic, theta, h, np.array([[x]]))[0, 0]
        gy = g_map(cubic, theta, h, np.array([[y]]))[0, 0]
        assert abs(gx - gy) >= abs(x - y) * (1.0 - 1e-12)


class TestSolverConfig:
    def test_rejects_zero_tolerances(self):
        with pytest.raises(ConstraintViolation):
            ImplicitSolverConfig(rel_tol=0.0, abs_tol=0.0)

    def test_rejects_empty_budgets(self):
        with pytest.raises(ConstraintViolation):
            ImplicitSolverConfig(max_iters=0)


class TestStep:
    def test_explicit_step_is_euler(self, cubic):
        scheme = ThetaScheme(theta=0.0, h=0.125)
        x = np.array([[0.5], [-1.0]])
        dB = np.array([0.2, -0.3])
        out = step(cubic, scheme, x, dB)
        expected = x + 0.125 * cubic.drift(x) + cubic.diffusion(x) * dB[:, None]
        assert np.array_equal(out, expected)

    def test_increment_count_mismatch(self, cubic):
        scheme = ThetaScheme(theta=0.0, h=0.1)
        with pytest.raises(ConstraintViolation, match="increments"):
            step(cubic, scheme, np.zeros((3, 1)), np.zeros(2))

    def test_implicit_step_satisfies_update_equation(self, cubic):
        scheme = ThetaScheme(theta=0.7, h=0.4)
        x = np.array([[1.3]])
        dB = np.array([0.11])
        out = step(cubic, scheme, x, dB)
        lhs = out
        rhs = (x + 0.7 * 0.4 * cubic.drift(out) + 0.3 * 0.4 * cubic.drift(x)
               + cubic.diffusion(x) * dB[:, None])
        assert np.abs(lhs - rhs).max() < 1e-11


class TestLinearExactness:
    @pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
    def test_matches_affine_recursion(self, theta):
        problem, _ = builtin("ou")
        alpha = noise = 2.0
        h = 0.25
        scheme = ThetaScheme(theta=theta, h=h)
        path = simulate_path(problem, scheme, [1.0], 50, IncrementStream(seed=99, h=h))
        stream = IncrementStream(seed=99, h=h)
        x = 1.0
        worst = 0.0
        for k in range(50):
            dB = stream.next_increment()
            x = ((1.0 - (1.0 - theta) * alpha * h) * x + noise * dB) / (1.0 + theta * alpha * h)
            worst = max(worst, abs(x - path.states[k + 1, 0]))
        assert worst < 1e-13

    def test_explicit_path_bit_equals_hand_coded_euler(self, cubic):
        h = 0.125
        scheme = ThetaScheme(theta=0.0, h=h)
        path = simulate_path(cubic, scheme, [0.5], 40, IncrementStream(seed=7, h=h))
        stream = IncrementStream(seed=7, h=h)
        x = np.array([0.5])
        for k in range(40):
            dB = stream.next_increment()
            x = x + h * cubic.drift(x) + cubic.diffusion(x) * dB
            assert x[0] == path.states[k + 1, 0]


class TestDrivers:
    def test_path_shapes_and_times(self, cubic):
        scheme = ThetaScheme(theta=1.0, h=0.2)
        path = simulate_path(cubic, scheme, [0.1], 25, IncrementStream(seed=1, h=0.2))
        assert path.states.shape == (26, 1)
        assert path.times[0] == 0.0
        assert path.times[-1] == pytest.approx(5.0)

    def test_zero_steps(self, cubic):
        scheme = ThetaScheme(theta=1.0, h=0.2)
        path = simulate_path(cubic, scheme, [0.1], 0, IncrementStream(seed=1, h=0.2))
        assert path.states.shape == (1, 1)
        assert path.states[0, 0] == 0.1

    def test_coupled_paths_share_increments(self):
        # Linear drift: the gap halves every explicit step at h = 0.5,
        # independently of the shared noise, which cancels exactly.
        lin = SdeProblem(dim=1, drift=lambda x: -np.asarray(x, float),
                         diffusion=lambda x: np.ones_like(np.asarray(x, float)))
        scheme = ThetaScheme(theta=0.0, h=0.5)
        pa, pb = simulate_coupled(lin, scheme, [2.0], [-1.0], 20,
                                  IncrementStream(seed=5, h=0.5))
        gaps = np.abs(pa.states - pb.states)[:, 0]
        ratios = gaps[1:] / gaps[:-1]
        assert np.allclose(ratios, 0.5, rtol=1e-12)

    def test_single_path_ensemble_equals_path_driver(self, cubic):
        seeding = EnsembleSeeding(base_seed=1234)
        scheme = ThetaScheme(theta=1.0, h=0.1)
        ens = simulate_ensemble(cubic, scheme, [0.2], 30, 1, seeding,
                                snapshot_steps=[10, 30])
        path = simulate_path(cubic, scheme, [0.2], 30, seeding.stream(0, 0.1))
        assert ens.at_step(10)[0, 0] == path.states[10, 0]
        assert ens.at_step(30)[0, 0] == path.states[30, 0]

    def test_worker_count_does_not_change_results(self, cubic):
        seeding = EnsembleSeeding(base_seed=77)
        scheme = ThetaScheme(theta=1.0, h=0.1)
        one = simulate_ensemble(cubic, scheme, [0.2], 20, 64, seeding,
                                snapshot_steps=[20], workers=1)
        three = simulate_ensemble(cubic, scheme, [0.2], 20, 64, seeding,
                                  snapshot_steps=[20], workers=3)
        assert np.array_equal(one.snapshots, three.snapshots)

    def test_snapshots_always_include_endpoints(self, cubic):
        seeding = EnsembleSeeding(base_seed=3)
        scheme = ThetaScheme(theta=0.5, h=0.1)
        ens = simulate_ensemble(cubic, scheme, [0.0], 10, 4, seeding,
                                snapshot_steps=[5])
        assert list(ens.snapshot_steps) == [0, 5, 10]
        assert np.allclose(ens.times, [0.0, 0.5, 1.0])
        assert ens.snapshots.shape == (3, 4, 1)

    def test_snapshot_out_of_range_rejected(self, cubic):
        seeding = EnsembleSeeding(base_seed=3)
        scheme = ThetaScheme(theta=0.5, h=0.1)
        with pytest.raises(ConstraintViolation, match="snapshot"):
            simulate_ensemble(cubic, scheme, [0.0], 10, 4, seeding,
                              snapshot_steps=[11])

    def test_plane_ensemble_runs(self, plane):
        seeding = EnsembleSeeding(base_seed=9)
        scheme = ThetaScheme(theta=0.5, h=0.1)
        ens = simulate_ensemble(plane, scheme, [0.0, 0.0], 15, 8, seeding)
        assert ens.snapshots.shape == (2, 8, 2)
        assert np.all(np.isfinite(ens.snapshots))
