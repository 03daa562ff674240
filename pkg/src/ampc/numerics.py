"""Numerical primitives: roots of unity, normal CDF, truncated Gaussian
sampling, Vandermonde conditioning and seeded random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import InvalidArgument, SamplingFailure, SingularMatrix

MAX_SAMPLING_ATTEMPTS = 10_000

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class EvalPoint:
    index: int
    value: complex


@dataclass(frozen=True)
class VandermondeInfo:
    matrix: np.ndarray
    condition_number: float
    min_singular: float
    max_singular: float


def root_of_unity(i: int, n: int) -> complex:
    """exp(2*pi*sqrt(-1)*i/n), snapped to exact values on quarter turns."""
    k = i % n
    if (4 * k) % n == 0:
        return (1 + 0j, 1j, -1 + 0j, -1j)[(4 * k) // n]
    theta = 2.0 * math.pi * k / n
    return complex(math.cos(theta), math.sin(theta))


def roots_of_unity(n: int) -> list[EvalPoint]:
    if n < 1:
        raise InvalidArgument(f"need at least one evaluation point, got N={n}")
    return [EvalPoint(i, root_of_unity(i, n)) for i in range(1, n + 1)]


def eval_values(indices, n: int) -> np.ndarray:
    return np.array([root_of_unity(i, n) for i in indices], dtype=complex)


def std_normal_cdf(x):
    """Standard normal CDF via erfc; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / _SQRT2)
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def std_normal_sf(x):
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / _SQRT2)
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def normal_mass(lo, hi):
    """P(lo < Z < hi) for standard normal Z without catastrophic cancellation
    in either tail."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = lo > 0
    lower_tail = std_normal_cdf(hi) - std_normal_cdf(lo)
    upper_tail = std_normal_sf(lo) - std_normal_sf(hi)
    out = np.where(upper, upper_tail, lower_tail)
    return float(out) if out.ndim == 0 else out


def truncated_gaussian_cdf(x, sigma: float, t: float):
    x = np.clip(np.asarray(x, dtype=float), -t, t)
    z = std_normal_cdf(t / sigma) - std_normal_cdf(-t / sigma)
    return normal_mass(-t / sigma, x / sigma) / z


def sample_truncated_gaussian(sigma: float, t: float, rng: np.random.Generator) -> float:
    """One draw from N(0, sigma^2) conditioned on [-t, t], by rejection."""
    if sigma <= 0 or t <= 0:
        raise InvalidArgument(f"sigma and t must be positive (sigma={sigma}, t={t})")
    for _ in range(MAX_SAMPLING_ATTEMPTS):
        y = rng.normal(0.0, sigma)
        if -t <= y <= t:
            return float(y)
    raise SamplingFailure(
        f"no sample in [-{t}, {t}] after {MAX_SAMPLING_ATTEMPTS} draws at sigma={sigma}",
        rejection_rate=1.0,
    )


def truncated_gaussian_array(sigma: float, t: float, size, rng: np.random.Generator) -> np.ndarray:
    """Vectorised rejection sampler; each entry gets the same per-scalar
    attempt cap as :func:`sample_truncated_gaussian`."""
    if sigma <= 0 or t <= 0:
        raise InvalidArgument(f"sigma and t must be positive (sigma={sigma}, t={t})")
    out = rng.normal(0.0, sigma, size=size)
    bad = np.abs(out) > t
    draws, rejected = out.size, int(bad.sum())
    attempts = 1
    while rejected:
        if attempts >= MAX_SAMPLING_ATTEMPTS:
            raise SamplingFailure(
                f"{rejected} entries still outside [-{t}, {t}] after "
                f"{MAX_SAMPLING_ATTEMPTS} attempts",
                rejection_rate=rejected / draws,
            )
        out[bad] = rng.normal(0.0, sigma, size=rejected)
        draws += rejected
        bad = np.abs(out) > t
        rejected = int(bad.sum())
        attempts += 1
    return out


def vandermonde_info(points, T: int) -> VandermondeInfo:
    values = np.array([p.value if isinstance(p, EvalPoint) else p for p in points], dtype=complex)
    if values.size != T + 1:
        raise InvalidArgument(f"need exactly T+1={T + 1} points, got {values.size}")
    diffs = np.abs(values[:, None] - values[None, :]) + np.eye(values.size)
    if np.any(diffs < 1e-12):
        raise SingularMatrix("evaluation points are not distinct")
    G = values[:, None] ** np.arange(T + 1)[None, :]
    s = np.linalg.svd(G, compute_uv=False)
    return VandermondeInfo(G, float(s[0] / s[-1]), float(s[-1]), float(s[0]))


def client_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for (seed, key...), e.g. key=(STREAM_CLIENT, i)."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
