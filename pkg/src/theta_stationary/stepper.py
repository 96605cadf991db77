"""One-step theta iteration and its simulation drivers.

The update from ``X_k`` to ``X_{k+1}`` with implicitness weight ``theta`` and
step ``h`` reads

    X_{k+1} = X_k + theta*h*f(X_{k+1}) + (1-theta)*h*f(X_k) + g(X_k)*dB_k,

so each step solves ``G(x) = x - theta*h*f(x) = rhs`` for the known right-hand
side.  For a one-sided Lipschitz drift (``k2 < 0``) the map ``G`` is strongly
monotone with modulus at least one, which makes the equation uniquely solvable
for every ``theta*h`` and makes the damped Newton iteration used here globally
convergent: the Newton direction is always a descent direction for the squared
residual, and the residual has no spurious critical points.  A bisection
fallback (dimension one) and a damped fixed-point fallback (higher dimensions)
guard against pathological coefficient callables anyway.

Ensembles are advanced path-parallel: step ``k`` of path ``i`` draws its
increment from the counter generator at ``(seed_i, k)``, so results are
bit-identical whether paths are simulated one at a time, in one vectorized
block, or chunked across worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ConstraintViolation, SdeProblem, ThetaScheme
from .noise import EnsembleSeeding, IncrementStream, normals_at, resolve_worker_count

__all__ = [
    "EnsembleResult",
    "ImplicitSolverConfig",
    "PathResult",
    "SolverFailure",
    "SolverStats",
    "g_map",
    "simulate_coupled",
    "simulate_ensemble",
    "simulate_path",
    "solve_implicit",
    "solve_implicit_bisection",
    "step",
]


class SolverFailure(RuntimeError):
    """The implicit solve did not reach tolerance for at least one path."""


@dataclass(frozen=True)
class ImplicitSolverConfig:
    """Tolerances and iteration budgets of the implicit solve.

    Convergence requires the residual ``|G(x) - rhs|`` to fall below
    ``abs_tol + rel_tol * |rhs|`` per path.  ``fd_step`` scales the central
    difference used when no analytic Jacobian is attached to the problem.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_iters: int = 50
    max_halvings: int = 30
    fallback_iters: int = 2000
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.rel_tol < 0 or self.abs_tol < 0 or (self.rel_tol == 0 and self.abs_tol == 0):
            raise ConstraintViolation("solver tolerances must be nonnegative, not both zero")
        if self.max_iters < 1 or self.max_halvings < 0 or self.fallback_iters < 1:
            raise ConstraintViolation("solver iteration budgets must be positive")


@dataclass
class SolverStats:
    """Aggregate effort counters across every implicit solve of a run."""

    solves: int = 0
    newton_iterations: int = 0
    fallback_paths: int = 0
    max_residual: float = 0.0

    def merge(self, other: "SolverStats") -> None:
        self.solves += other.solves
        self.newton_iterations += other.newton_iterations
        self.fallback_paths += other.fallback_paths
        self.max_residual = max(self.max_residual, other.max_residual)


def g_map(problem: SdeProblem, theta: float, h: float, x: np.ndarray) -> np.ndarray:
    """The implicit map ``G(x) = x - theta*h*f(x)`` on ``(..., dim)`` arrays."""
    x = np.asarray(x, dtype=np.float64)
    return x - theta * h * np.asarray(problem.drift(x), dtype=np.float64)


def _drift_jacobian(problem: SdeProblem, x: np.ndarray, fd_step: float) -> np.ndarray:
    """Analytic Jacobian when attached, otherwise per-path central differences."""
    if problem.drift_jacobian is not None:
        return np.asarray(problem.drift_jacobian(x), dtype=np.float64)
    n, d = x.shape
    jac = np.empty((n, d, d), dtype=np.float64)
    for j in range(d):
        eps = fd_step * (1.0 + np.abs(x[:, j]))
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += eps
        xm[:, j] -= eps
        fp = np.asarray(problem.drift(xp), dtype=np.float64)
        fm = np.asarray(problem.drift(xm), dtype=np.float64)
        jac[:, :, j] = (fp - fm) / (2.0 * eps)[:, None]
    return jac


def _residual_norm(r: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", r, r))


def solve_implicit_bisection(problem: SdeProblem, theta: float, h: float,
                             rhs: np.ndarray, tol: float = 1e-15,
                             max_iters: int = 200) -> np.ndarray:
    """Reference solver for dimension one via bracketed bisection.

    ``G`` is strictly increasing with slope at least one for a dissipative
    drift, so a sign-changing bracket always exists and bisection converges
    unconditionally.  Slow but assumption-free; used to cross-check the
    Newton path.
    """

    if problem.dim != 1:
        raise ConstraintViolation("bisection reference requires dim == 1")
    rhs = np.atleast_2d(np.asarray(rhs, dtype=np.float64))
    target = rhs[:, 0]

    def resid(v):
        return g_map(problem, theta, h, v[:, None])[:, 0] - target

    lo = target - 1.0
    hi = target + 1.0
    # Expand the bracket geometrically until the residual changes sign.
    width = np.ones_like(target)
    for _ in range(200):
        bad_lo = resid(lo) > 0
        bad_hi = resid(hi) < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        width *= 2.0
        lo = np.where(bad_lo, target - width, lo)
        hi = np.where(bad_hi, target + width, hi)
    else:
        raise SolverFailure("bisection bracket expansion failed")
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        go_hi = resid(mid) < 0
        lo = np.where(go_hi, mid, lo)
        hi = np.where(go_hi, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return (0.5 * (lo + hi))[:, None]


def _newton(problem: SdeProblem, theta: float, h: float, rhs: np.ndarray,
            x0: np.ndarray, config: ImplicitSolverConfig, stats: SolverStats):
    """Damped Newton on ``G(x) - rhs = 0``; returns (x, converged_mask)."""

    n, d = rhs.shape
    x = x0.copy()
    tol = config.abs_tol + config.rel_tol * _residual_norm(rhs)
    resid = g_map(problem, theta, h, x) - rhs
    rnorm = _residual_norm(resid)
    active = ~(rnorm <= tol)
    active &= np.isfinite(rnorm)
    for _ in range(config.max_iters):
        if not active.any():
            break
        xa = x[active]
        ra = resid[active]
        jac = np.eye(d)[None, :, :] - theta * h * _drift_jacobian(problem, xa, config.fd_step)
        if d == 1:
            denom = jac[:, 0, 0]
            ok = np.isfinite(denom) & (np.abs(denom) > 1e-300)
            dx = np.zeros_like(ra)
            dx[ok, 0] = -ra[ok, 0] / denom[ok]
        else:
            dx = np.full_like(ra, np.nan)
            finite = np.isfinite(jac).all(axis=(1, 2)) & np.isfinite(ra).all(axis=1)
            if finite.any():
                try:
                    dx[finite] = np.linalg.solve(jac[finite], -ra[finite, :, None])[:, :, 0]
                except np.linalg.LinAlgError:
                    for i in np.nonzero(finite)[0]:
                        try:
                            dx[i] = np.linalg.solve(jac[i], -ra[i])
                        except np.linalg.LinAlgError:
                            dx[i] = np.nan
        stats.newton_iterations += int(active.sum())

        # Backtracking: halve the step until the residual norm decreases.
        ra_norm = _residual_norm(ra)
        scale = np.ones(len(xa))
        x_new = xa + dx
        r_new = g_map(problem, theta, h, x_new) - rhs[active]
        rn_new = _residual_norm(r_new)
        for _ in range(config.max_halvings):
            worse = ~(rn_new < ra_norm) | ~np.isfinite(rn_new)
            worse &= np.isfinite(ra_norm)
            if not worse.any():
                break
            scale[worse] *= 0.5
            x_new[worse] = xa[worse] + scale[worse, None] * dx[worse]
            r_new[worse] = g_map(problem, theta, h, x_new[worse]) - rhs[active][worse]
            rn_new[worse] = _residual_norm(r_new[worse])
        improved = np.isfinite(rn_new) & (rn_new < ra_norm)
        xa = np.where(improved[:, None], x_new, xa)
        ra = np.where(improved[:, None], r_new, ra)
        x[active] = xa
        resid[active] = ra
        rnorm[active] = _residual_norm(ra)
        still = rnorm[active] > tol[active]
        idx = np.nonzero(active)[0]
        active[idx] = still
    return x, rnorm <= tol


def _fixed_point_fallback(problem: SdeProblem, theta: float, h: float,
                          rhs: np.ndarray, x0: np.ndarray,
                          config: ImplicitSolverConfig):
    """Damped residual iteration ``x <- x - gamma*(G(x) - rhs)``.

    For a strongly monotone ``G`` a small enough ``gamma`` contracts; the
    damping is adapted per sweep by halving whenever the worst residual fails
    to decrease.
    """

    x = x0.copy()
    tol = config.abs_tol + config.rel_tol * _residual_norm(rhs)
    gamma = 0.5
    resid = g_map(problem, theta, h, x) - rhs
    rnorm = _residual_norm(resid)
    if not np.all(np.isfinite(x)):
        x = rhs.copy()
        resid = g_map(problem, theta, h, x) - rhs
        rnorm = _residual_norm(resid)
    for _ in range(config.fallback_iters):
        if np.all(rnorm <= tol):
            return x, True
        x_new = x - gamma * resid
        r_new = g_map(problem, theta, h, x_new) - rhs
        rn_new = _residual_norm(r_new)
        if np.all(np.isfinite(rn_new)) and rn_new.max() <= rnorm.max():
            x, resid, rnorm = x_new, r_new, rn_new
        else:
            gamma *= 0.5
            if gamma < 1e-12:
                return x, False
    return x, bool(np.all(rnorm <= tol))


def solve_implicit(problem: SdeProblem, theta: float, h: float, rhs: np.ndarray,
                   x0: Optional[np.ndarray] = None,
                   config: Optional[ImplicitSolverConfig] = None,
                   stats: Optional[SolverStats] = None) -> np.ndarray:
    """Solve ``x - theta*h*f(x) = rhs`` for a batch of right-hand sides.

    ``rhs`` has shape ``(n, dim)`` (a single point is accepted and returned
    in kind).  The initial guess defaults to ``rhs`` itself.  Raises
    :class:`SolverFailure` if any path misses tolerance after the Newton
    budget and the fallback.
    """

    config = config or ImplicitSolverConfig()
    own_stats = stats if stats is not None else SolverStats()
    arr = np.asarray(rhs, dtype=np.float64)
    squeeze = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != problem.dim:
        raise ConstraintViolation(
            f"rhs has dimension {arr.shape[1]}, problem has {problem.dim}")
    own_stats.solves += 1
    if theta * h == 0.0:
        out = arr.copy()
        return out[0] if squeeze else out

    guess = arr.copy() if x0 is None else np.atleast_2d(np.asarray(x0, dtype=np.float64)).copy()
    x, converged = _newton(problem, theta, h, arr, guess, config, own_stats)
    if not converged.all():
        bad = ~converged
        own_stats.fallback_paths += int(bad.sum())
        if problem.dim == 1:
            x[bad] = solve_implicit_bisection(problem, theta, h, arr[bad])
            resid = g_map(problem, theta, h, x[bad]) - arr[bad]
            tol = config.abs_tol + config.rel_tol * _residual_norm(arr[bad])
            ok = _residual_norm(resid) <= np.maximum(tol, 1e-10)
            if not ok.all():
                raise SolverFailure(
                    f"{int((~ok).sum())} paths failed the implicit solve even "
                    "by bisection; the drift callable is likely not dissipative")
        else:
            xb, ok = _fixed_point_fallback(problem, theta, h, arr[bad], x[bad], config)
            x[bad] = xb
            if not ok:
                raise SolverFailure(
                    f"{int(bad.sum())} paths failed the implicit solve; "
                    "the drift callable is likely not one-sided Lipschitz")
    resid_norm = _residual_norm(g_map(problem, theta, h, x) - arr)
    own_stats.max_residual = max(own_stats.max_residual, float(resid_norm.max()))
    return x[0] if squeeze else x


def step(problem: SdeProblem, scheme: ThetaScheme, x: np.ndarray,
         increments: np.ndarray, config: Optional[ImplicitSolverConfig] = None,
         stats: Optional[SolverStats] = None) -> np.ndarray:
    """Advance a batch ``(n, dim)`` one step with per-path scalar increments.

    All paths share one driving Brownian motion per path: ``increments`` has
    shape ``(n,)`` and multiplies the diffusion vector elementwise.  With
    ``theta == 0`` the update is explicit and no solver runs.
    """

    theta, h = scheme.theta, scheme.h
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    dB = np.asarray(increments, dtype=np.float64).reshape(-1)
    if dB.shape[0] != x.shape[0]:
        raise ConstraintViolation(
            f"{x.shape[0]} paths but {dB.shape[0]} increments")
    with np.errstate(over="ignore", invalid="ignore"):
        fx = np.asarray(problem.drift(x), dtype=np.float64)
        gx = np.asarray(problem.diffusion(x), dtype=np.float64)
        rhs = x + (1.0 - theta) * h * fx + gx * dB[:, None]
        if theta == 0.0:
            return rhs
        predictor = rhs + theta * h * fx
    return solve_implicit(problem, theta, h, rhs, x0=predictor,
                          config=config, stats=stats)


@dataclass(frozen=True)
class PathResult:
    """A single trajectory sampled on a step grid."""

    times: np.ndarray
    states: np.ndarray
    stats: SolverStats


@dataclass(frozen=True)
class EnsembleResult:
    """Snapshot states of many paths at selected step indices."""

    snapshot_steps: np.ndarray
    times: np.ndarray
    snapshots: np.ndarray  # shape (n_snapshots, n_paths, dim)
    stats: SolverStats

    def at_step(self, k: int) -> np.ndarray:
        i = int(np.nonzero(self.snapshot_steps == k)[0][0])
        return self.snapshots[i]


def _as_state(x0, dim) -> np.ndarray:
    x = np.asarray(x0, dtype=np.float64).reshape(-1)
    if x.shape != (dim,):
        raise ConstraintViolation(f"initial state has shape {x.shape}, expected ({dim},)")
    return x


def simulate_path(problem: SdeProblem, scheme: ThetaScheme, x0,
                  n_steps: int, stream: IncrementStream,
                  config: Optional[ImplicitSolverConfig] = None) -> PathResult:
    """Simulate one trajectory, recording every step including the start."""

    if n_steps < 0:
        raise ConstraintViolation("n_steps must be nonnegative")
    x = _as_state(x0, problem.dim)
    stats = SolverStats()
    states = np.empty((n_steps + 1, problem.dim), dtype=np.float64)
    states[0] = x
    current = x[None, :]
    for k in range(n_steps):
        dB = np.array([stream.next_increment()])
        current = step(problem, scheme, current, dB, config=config, stats=stats)
        states[k + 1] = current[0]
    times = scheme.h * np.arange(n_steps + 1)
    return PathResult(times=times, states=states, stats=stats)


def simulate_coupled(problem: SdeProblem, scheme: ThetaScheme, x0, y0,
                     n_steps: int, stream: IncrementStream,
                     config: Optional[ImplicitSolverConfig] = None):
    """Evolve two initial states under one shared increment sequence.

    Returns ``(path_x, path_y)``; the squared gap between them is the
    quantity the coupling contraction envelope controls.
    """

    xa = _as_state(x0, problem.dim)
    xb = _as_state(y0, problem.dim)
    stats = SolverStats()
    sa = np.empty((n_steps + 1, problem.dim), dtype=np.float64)
    sb = np.empty_like(sa)
    sa[0], sb[0] = xa, xb
    current = np.stack([xa, xb])
    for k in range(n_steps):
        shared = stream.next_increment()
        current = step(problem, scheme, current, np.array([shared, shared]),
                       config=config, stats=stats)
        sa[k + 1], sb[k + 1] = current[0], current[1]
    times = scheme.h * np.arange(n_steps + 1)
    return (PathResult(times=times, states=sa, stats=stats),
            PathResult(times=times, states=sb, stats=stats))


def _validated_snapshots(snapshot_steps, n_steps) -> np.ndarray:
    if snapshot_steps is None:
        ks = {0, n_steps}
    else:
        ks = set(int(k) for k in snapshot_steps)
        for k in ks:
            if k < 0 or k > n_steps:
                raise ConstraintViolation(
                    f"snapshot step {k} outside [0, {n_steps}]")
        ks |= {0, n_steps}
    return np.array(sorted(ks), dtype=np.int64)


def _run_chunk(problem, scheme, x0, n_steps, seeds, snap_steps, config):
    n = len(seeds)
    stats = SolverStats()
    x = np.broadcast_to(x0, (n, problem.dim)).copy()
    out = np.empty((len(snap_steps), n, problem.dim), dtype=np.float64)
    pos = 0
    if snap_steps[0] == 0:
        out[0] = x
        pos = 1
    sqrt_h = math.sqrt(scheme.h)
    for k in range(n_steps):
        dB = sqrt_h * normals_at(seeds, np.uint64(k))
        x = step(problem, scheme, x, dB, config=config, stats=stats)
        if pos < len(snap_steps) and snap_steps[pos] == k + 1:
            out[pos] = x
            pos += 1
    return out, stats


def simulate_ensemble(problem: SdeProblem, scheme: ThetaScheme, x0,
                      n_steps: int, n_paths: int, seeding: EnsembleSeeding,
                      snapshot_steps=None,
                      config: Optional[ImplicitSolverConfig] = None,
                      workers: Optional[int] = None) -> EnsembleResult:
    """Simulate ``n_paths`` independent trajectories from a common start.

    Only the requested snapshot steps are stored (plus the first and last),
    keeping memory flat in ``n_steps``.  Worker threads split the ensemble
    into path chunks; because every path's increments are addressed by
    ``(seed, step)`` the result is bit-identical for any worker count.
    """

    if n_steps < 0 or n_paths < 1:
        raise ConstraintViolation("need n_steps >= 0 and n_paths >= 1")
    x0 = _as_state(x0, problem.dim)
    snap_steps = _validated_snapshots(snapshot_steps, n_steps)
    seeds = seeding.seeds(n_paths)
    n_workers = resolve_worker_count(workers)
    stats = SolverStats()
    if n_workers == 1 or n_paths < 2 * n_workers:
        snapshots, stats = _run_chunk(problem, scheme, x0, n_steps, seeds,
                                      snap_steps, config)
    else:
        chunks = np.array_split(np.arange(n_paths), n_workers)
        snapshots = np.empty((len(snap_steps), n_paths, problem.dim), dtype=np.float64)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_chunk, problem, scheme, x0, n_steps,
                                   seeds[c], snap_steps, config)
                       for c in chunks if len(c)]
            offset = 0
            for fut, c in zip(futures, [c for c in chunks if len(c)]):
                part, part_stats = fut.result()
                snapshots[:, offset:offset + len(c)] = part
                stats.merge(part_stats)
                offset += len(c)
    return EnsembleResult(snapshot_steps=snap_steps,
                          times=scheme.h * snap_steps.astype(np.float64),
                          snapshots=snapshots, stats=stats)
