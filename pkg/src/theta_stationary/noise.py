"""Deterministic Brownian-increment streams for path simulation.

Reproducibility contract
------------------------
Every increment is a pure function of ``(seed, index)``, so a stream can be
replayed from any position on any platform without replaying its prefix.
The pipeline is fixed and intentionally library-independent:

1. *Counter generator* (splitmix64): the 64-bit word for index ``k`` of a
   stream with seed ``s`` is ``mix64(s + (k+1) * GOLDEN)`` where ``GOLDEN`` is
   the odd constant 0x9E3779B97F4A7C15 and ``mix64`` is the splitmix64
   finalizer (xor-shift/multiply chain with constants 0xBF58476D1CE4E5B9 and
   0x94D049BB133111EB).  All arithmetic is modulo 2**64.
2. *Uniform*: the top 52 bits give ``u = ((word >> 12) + 0.5) * 2**-52``.
   Every value is exactly representable and lies in
   ``[2**-53, 1 - 2**-53]``, strictly inside (0, 1), so the inverse CDF
   below never sees an endpoint.
3. *Normal*: ``z = ndtri(u)`` where ``ndtri`` is Wichura's PPND16 rational
   approximation to the inverse standard normal CDF (double precision,
   relative error around 1e-16).
4. *Increment*: ``sqrt(h) * z``.

Per-path seeds are themselves splitmix64 outputs of the base seed:
``path_seed(base, i) = mix64(base + (i+1) * GOLDEN)``.  ``mix64`` is a
bijection on 64-bit words, so distinct path indices are guaranteed distinct
seeds.  Coupled pairs share one seed (and therefore one increment sequence)
through two independent cursors.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GOLDEN",
    "IncrementStream",
    "EnsembleSeeding",
    "coupled_pair",
    "inverse_normal_cdf",
    "normals_at",
    "path_seed",
    "resolve_worker_count",
    "uniforms_at",
]

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG52 = 2.0 ** -52

# Coefficients of Wichura's PPND16 (algorithm AS 241): three rational
# approximations covering the central region and the two tail regions.
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
    5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
    2.8729085735721942674e4, 5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
    6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
    5.47593808499534494600e-4, 1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
    1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
    1.42151175831644588870e-7, 2.04426310338993978564e-15,
)


def _mix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; bijective on 64-bit words (arithmetic mod 2**64)."""
    x = np.uint64(x) if np.isscalar(x) or isinstance(x, int) else x.astype(np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def _poly(coeffs, r):
    acc = np.full_like(r, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * r + c
    return acc


def inverse_normal_cdf(u):
    """Inverse standard normal CDF via Wichura's PPND16 rational minimax fits.

    Vectorized over numpy arrays; ``u`` must lie strictly inside (0, 1).
    Agreement with high-precision references is at the few-ulp level, which
    is what makes increment streams bit-for-bit replayable.
    """
    u = np.asarray(u, dtype=np.float64)
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("inverse_normal_cdf requires arguments strictly inside (0, 1)")
    q = u - 0.5
    out = np.empty_like(u)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)

    tails = ~central
    if np.any(tails):
        ut = u[tails]
        r = np.sqrt(-np.log(np.minimum(ut, 1.0 - ut)))
        near = r <= 5.0
        vals = np.empty_like(r)
        if np.any(near):
            rn = r[near] - 1.6
            vals[near] = _poly(_C, rn) / _poly(_D, rn)
        if np.any(~near):
            rf = r[~near] - 5.0
            vals[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tails] = np.where(q[tails] < 0.0, -vals, vals)
    return out


def _uniforms_from_words(words: np.ndarray) -> np.ndarray:
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_NEG52


def normals_at(seeds, indices) -> np.ndarray:
    """Standard normal draws for stream ``seeds`` at counter ``indices``.

    Broadcasts seeds against indices; both the per-path vector-at-one-step
    and per-stream batch-of-steps layouts reduce to this kernel, which is
    what keeps ensemble runs and single-stream runs bit-identical.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counters = (np.asarray(indices, dtype=np.uint64) + np.uint64(1)) * GOLDEN
        words = _mix64(seeds + counters)
    return inverse_normal_cdf(_uniforms_from_words(np.asarray(words)))


def uniforms_at(seeds, indices) -> np.ndarray:
    """Uniform(0, 1) draws for stream ``seeds`` at counter ``indices``."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counters = (np.asarray(indices, dtype=np.uint64) + np.uint64(1)) * GOLDEN
        words = _mix64(seeds + counters)
    return _uniforms_from_words(np.asarray(words))


def path_seed(base_seed: int, path_index: int):
    """Per-path seed: splitmix64 stream of the base seed at the path index."""
    base = np.uint64(int(base_seed) & 0xFFFFFFFFFFFFFFFF)
    idx = np.asarray(path_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(base + (idx + np.uint64(1)) * GOLDEN)


@dataclass
class IncrementStream:
    """Replayable Brownian increment source for one path at step size ``h``.

    The stream state is exactly ``(seed, h, index)``: reconstructing a stream
    at a given index reproduces the increments from that index on.
    """

    seed: int
    h: float
    index: int = 0

    def __post_init__(self):
        if not (self.h >= 0.0 and np.isfinite(self.h)):
            raise ValueError("step size h must be finite and nonnegative")
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        self.index = int(self.index)

    def next_increment(self) -> float:
        """Return increment ``sqrt(h) * z_index`` and advance the cursor."""
        value = self.take(1)[0]
        return float(value)

    def take(self, n: int) -> np.ndarray:
        """Return the next ``n`` increments as an array and advance by ``n``."""
        if n < 0:
            raise ValueError("cannot take a negative number of increments")
        idx = np.arange(self.index, self.index + n, dtype=np.uint64)
        z = normals_at(np.uint64(self.seed), idx)
        self.index += n
        return np.sqrt(self.h) * z


@dataclass(frozen=True)
class EnsembleSeeding:
    """Derives per-path seeds and streams from one base seed."""

    base_seed: int

    def seed_for(self, path_index: int) -> int:
        return int(path_seed(self.base_seed, path_index))

    def seeds(self, n_paths: int) -> np.ndarray:
        return path_seed(self.base_seed, np.arange(n_paths))

    def stream(self, path_index: int, h: float) -> IncrementStream:
        return IncrementStream(seed=self.seed_for(path_index), h=h)


def coupled_pair(seeding: EnsembleSeeding, path_index: int, h: float):
    """Two streams over one increment sequence (common-random-number coupling)."""
    return (seeding.stream(path_index, h), seeding.stream(path_index, h))


def resolve_worker_count(requested: int | None = None) -> int:
    """Worker cap for ensemble chunking; THETA_STATIONARY_THREADS wins over default 1."""
    if requested is not None:
        n = int(requested)
    else:
        env = os.environ.get("THETA_STATIONARY_THREADS")
        n = int(env) if env else 1
    if n < 1:
        raise ValueError("worker count must be at least 1")
    return n
