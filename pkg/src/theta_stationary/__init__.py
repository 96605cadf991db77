"""Stochastic theta method for dissipative SDEs and their stationary laws.

The package is organized around six concerns: problem declarations with
certified coefficient bounds (``model``), replayable Brownian increments
(``noise``), the drift-implicit theta stepper (``stepper``), empirical and
reference stationary distributions with distances (``stationary``),
the reproduction experiments (``experiments``), and a file-based CLI
(``cli``).
"""

from .model import (
    AnalyticInfo,
    CoefficientBounds,
    ConstraintViolation,
    RegimeReport,
    SdeProblem,
    ThetaScheme,
    builtin,
    check_conditions_sampled,
    max_stable_step,
    regime_report,
    verify_auxiliary_inequalities,
)
from .noise import EnsembleSeeding, IncrementStream, coupled_pair
from .experiments import (
    ExperimentReport,
    ExperimentSpec,
    RateFit,
    read_csv_series,
    run_2d_study,
    run_contraction,
    run_cubic_study,
    run_moment_bound,
    run_ou_study,
    run_rate_study,
    run_sup_moment,
)
from .stepper import (
    EnsembleResult,
    ImplicitSolverConfig,
    PathResult,
    SolverFailure,
    g_map,
    simulate_coupled,
    simulate_ensemble,
    simulate_path,
    solve_implicit,
    step,
)
from .stationary import (
    EmpiricalDistribution,
    KsResult,
    ReferenceDistribution,
    bl_distance_upper,
    ecdf,
    histogram_density,
    ks_test,
    moments,
    quartic_gibbs,
    wasserstein1_1d,
)

__version__ = "0.1.0"
