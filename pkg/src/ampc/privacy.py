"""(epsilon, delta) local-DP calibration for truncated Gaussian share noise.

The release ``X + noise`` with noise ~ TN(0, sigma^2; [-t, t]) is private
except on two tail regions of the output,
``y < -sigma^2 eps / Delta + Delta / 2`` and ``y > sigma^2 eps / Delta + Delta / 2``.
Writing ``sigma = alpha * Delta / sqrt(2 eps)`` turns their probability into
a function ``B(alpha)`` that falls monotonically from 1; the calibrated
``alpha*`` is the root of ``B(alpha) = delta``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InfeasibleBudget, InvalidArgument
from .numerics import normal_mass, truncated_gaussian_array
from .sharing import make_share_polynomial

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200


def compute_sensitivity(record_bound: float | None = None, override: float | None = None) -> float:
    """Frobenius sensitivity of replacing one record whose L2 norm is at
    most ``record_bound``; the worst case swaps a record for its negation."""
    if override is not None:
        if override <= 0:
            raise InvalidArgument(f"sensitivity must be positive, got {override}")
        return float(override)
    if record_bound is None or record_bound <= 0:
        raise InvalidArgument(f"record bound must be positive, got {record_bound}")
    return 2.0 * float(record_bound)


def privacy_loss_scalar(y, sigma: float, sensitivity: float, t: float):
    """|log p_d(y) / p_d'(y)| for neighbouring scalar inputs 0 and Delta,
    zero outside the common support [-t + Delta, t]."""
    y = np.asarray(y, dtype=float)
    loss = np.abs((-2.0 * y * sensitivity + sensitivity**2) / (2.0 * sigma**2))
    out = np.where((y >= -t + sensitivity) & (y <= t), loss, 0.0)
    return float(out) if out.ndim == 0 else out


def privacy_loss_vector(s, w, sigma: float) -> float:
    """Log density ratio of two isotropic Gaussians centred at 0 and ``w``."""
    s = np.ravel(s)
    w = np.ravel(w)
    return abs((s @ s - (s - w) @ (s - w)) / (2.0 * sigma**2))


def alpha_upper(t: float, sensitivity: float) -> float:
    r = 2.0 * t / sensitivity - 1.0
    if r <= 0:
        raise InvalidArgument(
            f"truncation width too small: need 2t/Delta > 1, got t={t}, Delta={sensitivity}"
        )
    return math.sqrt(r)


def violation_objective(alpha, epsilon: float, t: float, sensitivity: float):
    """B(alpha): probability of the non-private regions at
    ``sigma = alpha * Delta / sqrt(2 eps)``.

    Evaluated as two tail masses over the truncation mass so that values
    near 1e-12 keep their relative accuracy.
    """
    hi = alpha_upper(t, sensitivity)
    a = np.asarray(alpha, dtype=float)
    if np.any(a <= 0) or np.any(a >= hi):
        raise InvalidArgument(f"alpha must lie in (0, {hi:.6g})")
    r = math.sqrt(epsilon / 2.0)
    upper_arg = r * (a + 1.0 / a)
    lower_arg = r * (1.0 / a - a)
    trunc = t * math.sqrt(2.0 * epsilon) / (a * sensitivity)
    z = normal_mass(-trunc, trunc)
    tails = (normal_mass(-trunc, lower_arg) + normal_mass(upper_arg, trunc)) / z
    # near 1 the complement form rounds monotonically; near 0 the tail form keeps relative accuracy
    out = np.where(tails < 0.5, tails, 1.0 - normal_mass(lower_arg, upper_arg) / z)
    return float(out) if np.ndim(out) == 0 else out


def sigma_upper(epsilon: float, t: float, sensitivity: float) -> float:
    return math.sqrt(t * sensitivity / epsilon - sensitivity**2 / (2.0 * epsilon))


def analytic_violation_prob(sigma: float, epsilon: float, sensitivity: float, t: float) -> float:
    """Mass of the two violation regions under TN(0, sigma^2; [-t, t])."""
    top = sigma_upper(epsilon, t, sensitivity) if 2 * t > sensitivity else 0.0
    if not 0 < sigma < top:
        raise InvalidArgument(f"sigma must lie in (0, {top:.6g}), got {sigma}")
    edge = sigma**2 * epsilon / sensitivity
    left = -edge + sensitivity / 2.0
    right = edge + sensitivity / 2.0
    z = normal_mass(-t / sigma, t / sigma)
    return (normal_mass(-t / sigma, left / sigma) + normal_mass(right / sigma, t / sigma)) / z


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float
    t: float
    sensitivity: float
    T: int
    alpha_star: float
    sigma: float
    sigma_s: float
    feasible: bool = True
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "t": self.t,
            "delta_sensitivity": self.sensitivity,
            "alpha_star": self.alpha_star,
            "sigma": self.sigma,
            "sigma_s": self.sigma_s,
            "T": self.T,
            "feasible": self.feasible,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "PrivacyBudget":
        return cls(
            epsilon=float(d["epsilon"]),
            delta=float(d["delta"]),
            t=float(d["t"]),
            sensitivity=float(d["delta_sensitivity"]),
            T=int(d["T"]),
            alpha_star=float(d["alpha_star"]),
            sigma=float(d["sigma"]),
            sigma_s=float(d["sigma_s"]),
            feasible=bool(d.get("feasible", True)),
        )

    def scaled(self, multiplier: float) -> "PrivacyBudget":
        """Same budget record with the noise scaled (no longer calibrated)."""
        d = asdict(self)
        d.update(sigma=self.sigma * multiplier, sigma_s=self.sigma_s * multiplier)
        return PrivacyBudget(**d)


def calibrate(epsilon: float, delta: float, t: float, sensitivity: float, T: int = 1) -> PrivacyBudget:
    """Smallest noise level meeting (epsilon, delta): bisection for
    ``B(alpha) = delta`` on ``(0, sqrt(2t/Delta - 1))``."""
    if epsilon <= 0 or t <= 0 or sensitivity <= 0 or T < 1:
        raise InvalidArgument("epsilon, t, sensitivity must be positive and T >= 1")
    if not 0 < delta < 1:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    if 2.0 * t <= sensitivity:
        raise InfeasibleBudget(
            f"truncation width too small: need 2t/Delta > 1, got t={t:g}, Delta={sensitivity:g}; increase t"
        )
    a_max = alpha_upper(t, sensitivity) * (1.0 - 1e-12)
    b_max = violation_objective(a_max, epsilon, t, sensitivity)
    if b_max > delta:
        raise InfeasibleBudget(
            f"even the largest admissible noise leaves violation probability {b_max:.3g} > delta={delta:g}; "
            f"increase the truncation width t (now {t:g}) or relax epsilon/delta"
        )
    lo, hi = a_max * 1e-12, a_max
    degenerate = violation_objective(lo, epsilon, t, sensitivity) <= delta
    if degenerate:
        hi = lo
    else:
        for _ in range(BISECTION_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if violation_objective(mid, epsilon, t, sensitivity) > delta:
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECTION_TOL:
                break
    alpha = hi
    sigma = alpha * sensitivity / math.sqrt(2.0 * epsilon)
    return PrivacyBudget(
        epsilon=epsilon,
        delta=delta,
        t=t,
        sensitivity=sensitivity,
        T=T,
        alpha_star=alpha,
        sigma=sigma,
        sigma_s=sigma / math.sqrt(T),
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class AuditResult:
    empirical: float
    stderr: float
    n_samples: int
    delta: float | None = None

    @property
    def passed(self) -> bool:
        return self.delta is not None and self.empirical <= self.delta + 3.0 * self.stderr

    def to_dict(self) -> dict:
        return {
            "empirical": self.empirical,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "delta": self.delta,
            "pass": self.passed,
        }


def _violations(y, sigma, sensitivity, epsilon):
    edge = sigma**2 * epsilon / sensitivity
    return (y < -edge + sensitivity / 2.0) | (y > edge + sensitivity / 2.0)


def audit_mechanism(sigma: float, sensitivity: float, t: float, epsilon: float, n_samples: int,
                    rng: np.random.Generator, delta: float | None = None) -> AuditResult:
    """Monte-Carlo mass of the violation regions under the idealised
    truncated Gaussian mechanism."""
    if n_samples < 10_000:
        raise InvalidArgument(f"audit needs at least 10^4 samples, got {n_samples}")
    y = truncated_gaussian_array(sigma, t, n_samples, rng)
    frac = float(np.mean(_violations(y, sigma, sensitivity, epsilon)))
    return AuditResult(frac, math.sqrt(frac * (1.0 - frac) / n_samples), n_samples, delta)


def audit_protocol_noise(budget: PrivacyBudget, N: int, n_polys: int, rng: np.random.Generator) -> AuditResult:
    """Same audit on the real part of the combined noise actually produced by
    jointly resampled share polynomials (one scalar secret, all N points)."""
    if n_polys < 1:
        raise InvalidArgument("need at least one polynomial")
    zero = np.zeros((1, 1))
    samples = np.empty((n_polys, N))
    for k in range(n_polys):
        poly = make_share_polynomial(zero, budget.T, N, budget.sigma_s, budget.t, rng)
        samples[k] = poly.combined_noise().real.ravel()
    y = samples.ravel()
    frac = float(np.mean(_violations(y, budget.sigma, budget.sensitivity, budget.epsilon)))
    return AuditResult(frac, math.sqrt(frac * (1.0 - frac) / y.size), y.size, budget.delta)
