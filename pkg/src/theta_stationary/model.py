"""Problem declarations, coefficient bounds, and scheme-regime analysis.

A problem is a drift/diffusion pair on ``(..., d)`` arrays together with a
:class:`CoefficientBounds` certificate recording the dissipativity and growth
constants the stepper's stability theory consumes:

* ``k1``: squared Lipschitz constant of the diffusion (and of the drift too
  when ``drift_globally_lipschitz`` is set),
* ``k2 < 0``: one-sided Lipschitz constant of the drift,
* ``mu < 0, a > 0``: radial dissipativity ``<x, f(x)> <= mu*|x|^2 + a``,
* ``sigma >= 0, b > 0``: diffusion growth ``|g(x)|^2 <= sigma*|x|^2 + b``,
* ``kappa >= 0, c > 0``: drift growth ``|f(x)|^2 <= kappa*|x|^2 + c``.

The constants are claims, not theorems: :func:`check_conditions_sampled`
probes them on random point pairs and reports the worst observed ratios.
For super-linear drifts no global ``(kappa, c)`` exists; the built-ins store
values valid on the default sampling box, which is exactly the regime where
the explicit-leaning theory is probed (and where it fails, it should).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .noise import uniforms_at

__all__ = [
    "AnalyticInfo",
    "BoxSampler",
    "CoefficientBounds",
    "ConditionCheck",
    "ConditionReport",
    "ConstraintViolation",
    "EvaluationError",
    "Regime",
    "RegimeReport",
    "SdeProblem",
    "ThetaScheme",
    "builtin",
    "check_conditions_sampled",
    "max_stable_step",
    "moment_recursion_coefficients",
    "coupling_contraction_factor",
    "ou_mean_decay_factor",
    "ou_limit_variance",
    "ou_variance_at",
    "regime_report",
    "verify_auxiliary_inequalities",
]

DEFAULT_BOX = (-10.0, 10.0)
DEFAULT_SAMPLES = 10_000
REL_TOL = 1e-12

_EPS = float(np.finfo(np.float64).eps)


class ConstraintViolation(ValueError):
    """A coefficient bound or scheme parameter violates a required inequality."""


class EvaluationError(RuntimeError):
    """A user coefficient returned a non-finite value or a bad shape."""


@dataclass(frozen=True)
class CoefficientBounds:
    """Dissipativity and growth constants claimed for one problem.

    Construction enforces the sign conventions and the two combined strict
    inequalities the stability theory rests on: ``2*mu + sigma < 0`` always,
    and ``2*k2 + k1 < 0`` whenever the drift is claimed globally Lipschitz
    with the same ``k1``.  Zero intercepts ``a``, ``b``, ``c`` are nudged to
    machine epsilon because strictly positive intercepts are assumed
    throughout.
    """

    k1: float
    k2: float
    mu: float
    a: float
    sigma: float
    b: float
    kappa: float
    c: float
    drift_globally_lipschitz: bool = False

    def __post_init__(self):
        values = {
            "k1": self.k1, "k2": self.k2, "mu": self.mu, "a": self.a,
            "sigma": self.sigma, "b": self.b, "kappa": self.kappa, "c": self.c,
        }
        for name, v in values.items():
            if not math.isfinite(float(v)):
                raise ConstraintViolation(f"bound {name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        for name in ("a", "b", "c"):
            if getattr(self, name) == 0.0:
                object.__setattr__(self, name, _EPS)
        if self.k1 < 0.0:
            raise ConstraintViolation(f"requires k1 >= 0 (got {self.k1})")
        if not self.k2 < 0.0:
            raise ConstraintViolation(f"requires k2 < 0 (got {self.k2})")
        if not self.mu < 0.0:
            raise ConstraintViolation(f"requires mu < 0 (got {self.mu})")
        if self.sigma < 0.0:
            raise ConstraintViolation(f"requires sigma >= 0 (got {self.sigma})")
        if self.kappa < 0.0:
            raise ConstraintViolation(f"requires kappa >= 0 (got {self.kappa})")
        for name in ("a", "b", "c"):
            if not getattr(self, name) > 0.0:
                raise ConstraintViolation(f"requires {name} > 0 (got {getattr(self, name)})")
        if not 2.0 * self.mu + self.sigma < 0.0:
            raise ConstraintViolation(
                f"requires 2*mu + sigma < 0 (got {2.0 * self.mu + self.sigma})")
        if self.drift_globally_lipschitz and not 2.0 * self.k2 + self.k1 < 0.0:
            raise ConstraintViolation(
                "requires 2*k2 + k1 < 0 when the drift is claimed globally "
                f"Lipschitz (got {2.0 * self.k2 + self.k1})")


@dataclass(frozen=True)
class AnalyticInfo:
    """Optional closed-form knowledge attached to a problem.

    ``stationary`` is a descriptor consumed by the reference-distribution
    factory, e.g. ``{"kind": "normal", "mean": 0.0, "variance": 1.0}`` or
    ``{"kind": "quartic_gibbs"}``.  For linear drift ``-alpha*x`` with
    constant noise amplitude, ``ou_alpha``/``ou_noise`` unlock the exact
    per-step mean and variance recursions of the theta iteration.
    """

    stationary: Optional[dict] = None
    ou_alpha: Optional[float] = None
    ou_noise: Optional[float] = None


@dataclass(frozen=True)
class SdeProblem:
    """Autonomous Ito problem ``dX = f(X) dt + g(X) dB`` with scalar noise.

    ``drift`` and ``diffusion`` map arrays of shape ``(..., dim)`` to the
    same shape and must broadcast over leading axes (for ``dim == 1`` any
    elementwise callable qualifies).  ``drift_jacobian``, if given, maps
    ``(..., dim)`` to ``(..., dim, dim)`` and is used by the implicit solver
    in place of central differences.  Coefficients must be pure functions;
    the simulation layer assumes repeated evaluation is reproducible.
    """

    dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    analytic: Optional[AnalyticInfo] = None
    drift_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ConstraintViolation(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if not callable(self.drift) or not callable(self.diffusion):
            raise ConstraintViolation("drift and diffusion must be callable")


@dataclass(frozen=True)
class ThetaScheme:
    """Implicitness weight and step size of one theta iteration.

    ``theta=0`` is the explicit Euler scheme, ``theta=1`` the drift-implicit
    backward scheme, ``theta=0.5`` the trapezoidal compromise.  ``solver``
    optionally overrides the implicit solver configuration (defaulted by the
    stepper when ``None``).
    """

    theta: float
    h: float
    solver: object = None

    def __post_init__(self):
        if not (math.isfinite(self.theta) and 0.0 <= self.theta <= 1.0):
            raise ConstraintViolation(f"theta must lie in [0, 1], got {self.theta}")
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ConstraintViolation(f"step h must be positive and finite, got {self.h}")
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "h", float(self.h))


class Regime(enum.Enum):
    """Which branch of the step-size theory applies."""

    BELOW_HALF = "theta_below_half"
    AT_LEAST_HALF = "theta_at_least_half"


@dataclass(frozen=True)
class RegimeReport:
    """Applicability verdict of a scheme against a bounds certificate."""

    regime: Regime
    h_max_moment: float
    h_max_contraction: float
    theta_star: float
    lam: float
    valid: bool
    reasons: tuple = ()


def max_stable_step(theta: float, bounds: CoefficientBounds):
    """Step-size thresholds ``(h_moment, h_contraction)`` for a given theta.

    For ``theta >= 1/2`` both are infinite: the implicit-leaning iteration
    admits every positive step.  Below one half the second-moment bound
    requires ``h < -(2*mu + sigma) / ((1-theta)^2 * kappa)`` and the coupling
    contraction requires ``h < -(2*k2 + k1) / ((1-theta)^2 * k1)``; a zero
    growth constant removes the corresponding restriction.  The contraction
    threshold only exists under a global drift Lipschitz claim, so without
    one it is reported as infinite (the companion regime report carries the
    caveat).
    """

    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ConstraintViolation(f"theta must lie in [0, 1], got {theta}")
    if theta >= 0.5:
        return (math.inf, math.inf)
    shrink = (1.0 - theta) ** 2
    if bounds.kappa == 0.0:
        h_moment = math.inf
    else:
        h_moment = -(2.0 * bounds.mu + bounds.sigma) / (shrink * bounds.kappa)
    if not bounds.drift_globally_lipschitz or bounds.k1 == 0.0:
        h_contraction = math.inf
    else:
        gap = 2.0 * bounds.k2 + bounds.k1
        if gap >= 0.0:
            # Unreachable through a validated certificate; kept as a guard
            # against hand-built bounds objects.
            raise ConstraintViolation(
                f"degenerate contraction threshold: 2*k2 + k1 = {gap} >= 0")
        h_contraction = -gap / (shrink * bounds.k1)
    return (h_moment, h_contraction)


def moment_recursion_coefficients(theta: float, h: float, bounds: CoefficientBounds):
    """Coefficients ``(A2, A3)`` of the second-moment recursion below theta=1/2.

    The iteration satisfies ``E|X_{k+1}|^2 <= A2 * E|X_k|^2 + A3`` with

        A2 = (1 + (1-theta)^2 h^2 kappa + h sigma + 2 (1-theta) h mu)
             / (1 - 2 mu theta h)
        A3 = ((1-theta)^2 h^2 c + b h + 2 (1-theta) h a + 2 a theta h)
             / (1 - 2 mu theta h)

    and ``A2`` lies in (0, 1) exactly when ``h`` is below the moment
    threshold.
    """

    one = 1.0 - theta
    denom = 1.0 - 2.0 * bounds.mu * theta * h
    a2 = (1.0 + one * one * h * h * bounds.kappa + h * bounds.sigma
          + 2.0 * one * h * bounds.mu) / denom
    a3 = (one * one * h * h * bounds.c + bounds.b * h
          + 2.0 * one * h * bounds.a + 2.0 * bounds.a * theta * h) / denom
    return (a2, a3)


def coupling_contraction_factor(theta: float, h: float, bounds: CoefficientBounds) -> float:
    """Per-step factor of ``E|X_k^x - X_k^y|^2`` below theta=1/2.

    Equals ``(1 + (1-theta)^2 h^2 k1 + h k1 + 2 k2 (1-theta) h)
    / (1 - 2 k2 theta h)`` and lies in (0, 1) under the contraction
    threshold.  Requires a global drift Lipschitz claim.
    """

    if not bounds.drift_globally_lipschitz:
        raise ConstraintViolation(
            "contraction factor needs a global drift Lipschitz claim (k1 bounding f)")
    one = 1.0 - theta
    return (1.0 + one * one * h * h * bounds.k1 + h * bounds.k1
            + 2.0 * bounds.k2 * one * h) / (1.0 - 2.0 * bounds.k2 * theta * h)


def _theta_star(bounds: CoefficientBounds) -> float:
    return 1.0 + bounds.sigma / (4.0 * bounds.mu)


def _lam(theta: float, bounds: CoefficientBounds) -> float:
    return min((2.0 * bounds.mu + bounds.sigma) / (2.0 * bounds.mu), 2.0 * theta - 1.0)


def _moment_decay_ratio(theta: float, h: float, lam: float, bounds: CoefficientBounds) -> float:
    """Ratio N_h = (1 - mu (1-theta) h) / (1 - mu (1-theta+lam) h)."""
    return (1.0 - bounds.mu * (1.0 - theta) * h) / (1.0 - bounds.mu * (1.0 - theta + lam) * h)


def _coupling_decay_ratio(theta: float, h: float, lam: float, bounds: CoefficientBounds) -> float:
    """Ratio L_h = |(1 - k2 (1-theta) h) / (1 - k2 (1-theta+lam) h)|^2."""
    r = (1.0 - bounds.k2 * (1.0 - theta) * h) / (1.0 - bounds.k2 * (1.0 - theta + lam) * h)
    return r * r


def regime_report(scheme: ThetaScheme, bounds: CoefficientBounds) -> RegimeReport:
    """Classify a scheme against a certificate and collect applicability notes."""

    theta, h = scheme.theta, scheme.h
    reasons = []
    solvable = theta * h * bounds.k2 < 1.0  # automatic for k2 < 0
    if not solvable:
        reasons.append(
            f"implicit map not monotone: theta*h*k2 = {theta * h * bounds.k2} >= 1")
    if theta >= 0.5:
        report_valid = solvable
        return RegimeReport(
            regime=Regime.AT_LEAST_HALF,
            h_max_moment=math.inf,
            h_max_contraction=math.inf,
            theta_star=_theta_star(bounds),
            lam=_lam(theta, bounds),
            valid=report_valid,
            reasons=tuple(reasons),
        )

    h_moment, h_contraction = max_stable_step(theta, bounds)
    valid = solvable
    if not h < h_moment:
        valid = False
        reasons.append(
            f"h={h} is not below the moment step bound {h_moment} "
            "= -(2*mu+sigma)/((1-theta)^2*kappa)")
    if bounds.drift_globally_lipschitz:
        if not h < h_contraction:
            valid = False
            reasons.append(
                f"h={h} is not below the contraction step bound {h_contraction} "
                "= -(2*k2+k1)/((1-theta)^2*k1)")
    else:
        reasons.append(
            "no global drift Lipschitz claim: contraction guarantees "
            "unavailable below theta=1/2")
    return RegimeReport(
        regime=Regime.BELOW_HALF,
        h_max_moment=h_moment,
        h_max_contraction=h_contraction,
        theta_star=_theta_star(bounds),
        lam=_lam(theta, bounds),
        valid=valid,
        reasons=tuple(reasons),
    )


# --- closed forms for linear drift with additive noise ----------------------

def ou_mean_decay_factor(alpha: float, theta: float, h: float) -> float:
    """Per-step mean factor of the theta iteration on ``f(x) = -alpha*x``."""
    return (1.0 - (1.0 - theta) * alpha * h) / (1.0 + theta * alpha * h)


def ou_limit_variance(alpha: float, noise: float, theta: float, h: float) -> float:
    """Limit variance ``noise^2 / (2 alpha - alpha^2 h + 2 alpha^2 theta h)``."""
    denom = 2.0 * alpha - alpha * alpha * h + 2.0 * alpha * alpha * theta * h
    if denom <= 0.0:
        raise ConstraintViolation(
            f"theta iteration has no finite limit variance at theta={theta}, h={h}")
    return noise * noise / denom


def ou_variance_at(alpha: float, noise: float, theta: float, h: float, k) -> np.ndarray:
    """Exact variance after ``k`` steps from a deterministic start."""
    rho = ou_mean_decay_factor(alpha, theta, h)
    vinf = ou_limit_variance(alpha, noise, theta, h)
    k = np.asarray(k, dtype=np.float64)
    return vinf * (1.0 - rho ** (2.0 * k))


# --- sampled verification ----------------------------------------------------

@dataclass(frozen=True)
class BoxSampler:
    """Uniform sampler on a box, driven by the package's own counter RNG."""

    low: float = DEFAULT_BOX[0]
    high: float = DEFAULT_BOX[1]
    seed: int = 0

    def _uniform(self, n: int, dim: int, lane: int) -> np.ndarray:
        idx = np.arange(n * dim, dtype=np.uint64)
        u = uniforms_at(np.uint64((self.seed + 0x51E) * 2654435761 + lane), idx)
        return self.low + (self.high - self.low) * u.reshape(n, dim)

    def points(self, n: int, dim: int) -> np.ndarray:
        return self._uniform(n, dim, lane=0)

    def pairs(self, n: int, dim: int):
        return self._uniform(n, dim, lane=0), self._uniform(n, dim, lane=1)

    def scalars(self, n: int, lane: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = uniforms_at(np.uint64((self.seed + 0x51E) * 2654435761 + lane),
                        np.arange(n, dtype=np.uint64))
        return low + (high - low) * u


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of one sampled inequality."""

    name: str
    worst: float
    bound: float
    passed: bool
    witness: Optional[tuple] = None


@dataclass(frozen=True)
class ConditionReport:
    """Sampled verification of every claimed coefficient inequality."""

    checks: dict
    n: int
    box: tuple
    passed: bool

    def __getitem__(self, name: str) -> ConditionCheck:
        return self.checks[name]


def _eval_coeff(fn, x, dim, what):
    out = np.asarray(fn(x), dtype=np.float64)
    if out.shape != x.shape:
        raise EvaluationError(
            f"{what} returned shape {out.shape}, expected {x.shape}")
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out).all(axis=-1))
        where = x[tuple(bad[0])] if bad.size else x
        raise EvaluationError(f"{what} returned a non-finite value near {where!r}")
    return out


def check_conditions_sampled(problem: SdeProblem, bounds: CoefficientBounds,
                             sampler: Optional[BoxSampler] = None,
                             n: int = DEFAULT_SAMPLES) -> ConditionReport:
    """Probe every claimed inequality on ``n`` sampled point pairs.

    Ratio checks (Lipschitz and one-sided constants) report the worst
    observed ratio; growth checks with intercepts report the worst violation
    margin scaled by ``max(1, |rhs|)``.  A claim passes when its worst value
    is within relative tolerance 1e-12 of the bound.  The drift Lipschitz
    ratio is only evaluated under a ``drift_globally_lipschitz`` claim.
    """

    if n < 2:
        raise ConstraintViolation("need at least 2 sample pairs")
    sampler = sampler or BoxSampler()
    d = problem.dim
    x, y = sampler.pairs(n, d)
    fx = _eval_coeff(problem.drift, x, d, "drift")
    fy = _eval_coeff(problem.drift, y, d, "drift")
    gx = _eval_coeff(problem.diffusion, x, d, "diffusion")
    gy = _eval_coeff(problem.diffusion, y, d, "diffusion")

    dx = x - y
    dsq = np.einsum("ij,ij->i", dx, dx)
    keep = dsq > 1e-280
    dx, dsq = dx[keep], dsq[keep]
    dfsq = np.einsum("ij,ij->i", (fx - fy)[keep], (fx - fy)[keep])
    dgsq = np.einsum("ij,ij->i", (gx - gy)[keep], (gx - gy)[keep])
    inner = np.einsum("ij,ij->i", dx, (fx - fy)[keep])

    checks = {}

    def ratio_check(name, ratios, bound):
        i = int(np.argmax(ratios))
        worst = float(ratios[i])
        ok = worst <= bound + REL_TOL * max(1.0, abs(bound))
        witness = None if ok else (x[keep][i].copy(), y[keep][i].copy())
        checks[name] = ConditionCheck(name, worst, float(bound), bool(ok), witness)

    def margin_check(name, lhs, rhs, pts):
        margins = (lhs - rhs) / np.maximum(1.0, np.abs(rhs))
        i = int(np.argmax(margins))
        worst = float(margins[i])
        ok = worst <= REL_TOL
        witness = None if ok else (pts[i].copy(),)
        checks[name] = ConditionCheck(name, worst, 0.0, bool(ok), witness)

    if bounds.drift_globally_lipschitz:
        ratio_check("lipschitz_f", dfsq / dsq, bounds.k1)
    ratio_check("lipschitz_g", dgsq / dsq, bounds.k1)
    ratio_check("one_sided_f", inner / dsq, bounds.k2)
    ratio_check("combined_2k2_plus_k1", 2.0 * inner / dsq + dgsq / dsq,
                2.0 * bounds.k2 + bounds.k1)

    xf = np.einsum("ij,ij->i", x, fx)
    xsq = np.einsum("ij,ij->i", x, x)
    margin_check("radial_xf", xf, bounds.mu * xsq + bounds.a, x)
    margin_check("growth_g", np.einsum("ij,ij->i", gx, gx),
                 bounds.sigma * xsq + bounds.b, x)
    margin_check("growth_f", np.einsum("ij,ij->i", fx, fx),
                 bounds.kappa * xsq + bounds.c, x)

    passed = all(c.passed for c in checks.values())
    return ConditionReport(checks=checks, n=n, box=(sampler.low, sampler.high),
                           passed=passed)


@dataclass(frozen=True)
class AuxiliaryReport:
    """Sampled verification of the two deterministic comparison inequalities."""

    worst_slack_radial: float
    worst_slack_difference: float
    witness_radial: Optional[tuple]
    witness_difference: Optional[tuple]
    n: int
    passed: bool


def verify_auxiliary_inequalities(problem: SdeProblem, bounds: CoefficientBounds,
                                  sampler: Optional[BoxSampler] = None,
                                  n: int = DEFAULT_SAMPLES,
                                  tol: float = 1e-10) -> AuxiliaryReport:
    """Probe the two comparison inequalities the implicit analysis leans on.

    With ``0 <= beta1 <= beta2`` and the radial bound ``<x, f(x)> <= mu|x|^2
    + a``:

        |x - beta1 f(x)|^2 + 2 beta1 a
            <= ((1 - mu beta1) / (1 - mu beta2)) (|x - beta2 f(x)|^2 + 2 beta2 a)

    and with ``0 <= lam1 <= lam2`` and the one-sided bound on drift
    differences:

        |x - y - lam1 (f(x) - f(y))|
            <= ((1 - k2 lam1) / (1 - k2 lam2)) |x - y - lam2 (f(x) - f(y))|

    Slacks are ``(rhs - lhs) / max(1, |rhs|)``; the report carries the worst
    one for each inequality together with a witness draw when negative
    beyond ``tol``.
    """

    sampler = sampler or BoxSampler()
    d = problem.dim
    x, y = sampler.pairs(n, d)
    u1 = sampler.scalars(n, lane=2, low=0.0, high=2.0)
    u2 = sampler.scalars(n, lane=3, low=0.0, high=2.0)
    beta1, beta2 = np.minimum(u1, u2), np.maximum(u1, u2)
    v1 = sampler.scalars(n, lane=4, low=0.0, high=2.0)
    v2 = sampler.scalars(n, lane=5, low=0.0, high=2.0)
    lam1, lam2 = np.minimum(v1, v2), np.maximum(v1, v2)

    fx = _eval_coeff(problem.drift, x, d, "drift")
    fy = _eval_coeff(problem.drift, y, d, "drift")

    def sqnorm(v):
        return np.einsum("ij,ij->i", v, v)

    lhs_r = sqnorm(x - beta1[:, None] * fx) + 2.0 * beta1 * bounds.a
    rhs_r = ((1.0 - bounds.mu * beta1) / (1.0 - bounds.mu * beta2)
             * (sqnorm(x - beta2[:, None] * fx) + 2.0 * beta2 * bounds.a))
    slack_r = (rhs_r - lhs_r) / np.maximum(1.0, np.abs(rhs_r))
    i_r = int(np.argmin(slack_r))

    df = fx - fy
    lhs_d = np.sqrt(sqnorm(x - y - lam1[:, None] * df))
    rhs_d = ((1.0 - bounds.k2 * lam1) / (1.0 - bounds.k2 * lam2)
             * np.sqrt(sqnorm(x - y - lam2[:, None] * df)))
    slack_d = (rhs_d - lhs_d) / np.maximum(1.0, np.abs(rhs_d))
    i_d = int(np.argmin(slack_d))

    ok_r = slack_r[i_r] >= -tol
    ok_d = slack_d[i_d] >= -tol
    return AuxiliaryReport(
        worst_slack_radial=float(slack_r[i_r]),
        worst_slack_difference=float(slack_d[i_d]),
        witness_radial=None if ok_r else (x[i_r].copy(), float(beta1[i_r]), float(beta2[i_r])),
        witness_difference=None if ok_d else (x[i_d].copy(), y[i_d].copy(),
                                              float(lam1[i_d]), float(lam2[i_d])),
        n=n,
        passed=bool(ok_r and ok_d),
    )


# --- built-in problems --------------------------------------------------------

def _ou_problem() -> tuple:
    alpha, noise = 2.0, 2.0

    def drift(x):
        return -alpha * np.asarray(x, dtype=np.float64)

    def diffusion(x):
        return np.full_like(np.asarray(x, dtype=np.float64), noise)

    def jacobian(x):
        x = np.asarray(x, dtype=np.float64)
        return np.full(x.shape[:-1] + (1, 1), -alpha)

    problem = SdeProblem(
        dim=1, drift=drift, diffusion=diffusion, name="ou",
        analytic=AnalyticInfo(
            stationary={"kind": "normal", "mean": 0.0,
                        "variance": noise * noise / (2.0 * alpha)},
            ou_alpha=alpha, ou_noise=noise),
        drift_jacobian=jacobian)
    # The tight linear constants give 2*k2 + k1 = 0 exactly, which the strict
    # contraction inequality rejects, so no global-Lipschitz claim is
    # attached; k1 certifies the (constant) diffusion only.
    bounds = CoefficientBounds(k1=4.0, k2=-2.0, mu=-2.0, a=0.01,
                               sigma=0.0, b=4.0, kappa=4.0, c=0.01,
                               drift_globally_lipschitz=False)
    return problem, bounds


def _cubic1d_problem() -> tuple:
    def drift(x):
        x = np.asarray(x, dtype=np.float64)
        return -0.5 * (x + x ** 3)

    def diffusion(x):
        return np.ones_like(np.asarray(x, dtype=np.float64))

    def jacobian(x):
        x = np.asarray(x, dtype=np.float64)
        return (-0.5 * (1.0 + 3.0 * x * x))[..., None]

    problem = SdeProblem(
        dim=1, drift=drift, diffusion=diffusion, name="cubic1d",
        analytic=AnalyticInfo(stationary={"kind": "quartic_gibbs"}),
        drift_jacobian=jacobian)
    # kappa/c hold on the default sampling box only: the cubic drift has no
    # global linear growth bound, which is precisely why the explicit-leaning
    # regime fails on this problem.
    bounds = CoefficientBounds(k1=0.0, k2=-0.5, mu=-0.5, a=0.0,
                               sigma=0.0, b=1.0, kappa=2600.0, c=0.01,
                               drift_globally_lipschitz=False)
    return problem, bounds


def _cubic2d_problem() -> tuple:
    def drift(x):
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([-x1 ** 3 - 5.0 * x1 + x2 + 5.0,
                         -x2 ** 3 - x1 - 5.0 * x2 + 5.0], axis=-1)

    def diffusion(x):
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x1 - x2 + 3.0, -x1 - x2 + 3.0], axis=-1)

    def jacobian(x):
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        j = np.empty(x.shape[:-1] + (2, 2), dtype=np.float64)
        j[..., 0, 0] = -3.0 * x1 * x1 - 5.0
        j[..., 0, 1] = 1.0
        j[..., 1, 0] = -1.0
        j[..., 1, 1] = -3.0 * x2 * x2 - 5.0
        return j

    problem = SdeProblem(dim=2, drift=drift, diffusion=diffusion,
                         name="cubic2d", analytic=None,
                         drift_jacobian=jacobian)
    # k2=-4 and the diffusion difference identity |dg|^2 = 2|dx|^2 are exact;
    # mu/a come from absorbing the affine drift part, sigma/b from absorbing
    # the affine diffusion part, kappa/c hold on the default sampling box.
    bounds = CoefficientBounds(k1=2.0, k2=-4.0, mu=-4.0, a=12.5,
                               sigma=3.0, b=54.0, kappa=12000.0, c=51.0,
                               drift_globally_lipschitz=False)
    return problem, bounds


_BUILTINS = {
    "ou": _ou_problem,
    "cubic1d": _cubic1d_problem,
    "cubic2d": _cubic2d_problem,
}


def builtin(name: str) -> tuple:
    """Return ``(problem, bounds)`` for one of the named built-in problems.

    ``"ou"`` is the linear problem ``dx = -2x dt + 2 dB`` with standard
    normal stationary law; ``"cubic1d"`` is ``dx = -(x + x^3)/2 dt + dB``
    whose stationary density is the quartic Gibbs law; ``"cubic2d"`` is the
    plane system with cubic drift, exact one-sided constant -4 and exact
    diffusion difference ratio 2, driven by one shared Brownian motion.
    """

    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin problem {name!r}; "
                       f"choose from {sorted(_BUILTINS)}") from None
    return factory()
