"""Analog secret sharing at complex roots of unity.

A secret matrix ``X`` is hidden in a degree-``T`` polynomial
``S(s) = X + sum_k s^k N_k`` with real Gaussian coefficient matrices; client
``i`` receives ``S(omega_i)``. Any ``T+1`` evaluations determine ``X`` through
a Vandermonde solve, while ``T`` of them leave it undetermined.
"""

from __future__ import annotations

import functools
import json
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientShares,
    InvalidArgument,
    NumericalDegradationWarning,
    TruncationInfeasible,
)
from .numerics import eval_values

MAX_REDRAWS = 1_000
IMAG_TOLERANCE = 1e-6
DEFAULT_PRECISION_BITS = 52

_MAGIC = b"AMPS"
_HEADER = struct.Struct("<4sBH")
_DIMS = struct.Struct("<IIIII")


def as_matrix(x) -> np.ndarray:
    """Scalars become 1x1, vectors become columns."""
    a = np.asarray(x)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    if a.ndim != 2:
        raise InvalidArgument(f"expected a matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Share:
    """Evaluation of one secret's polynomial at ``omega_index``."""

    secret_id: str
    index: int
    value: np.ndarray
    T: int
    N: int

    def __post_init__(self):
        v = np.array(as_matrix(self.value), dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "value", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def with_value(self, value, secret_id: str | None = None) -> "Share":
        return Share(secret_id or self.secret_id, self.index, value, self.T, self.N)

    def to_dict(self) -> dict:
        rows, cols = self.shape
        return {
            "secret_id": self.secret_id,
            "eval_index": self.index,
            "T": self.T,
            "N": self.N,
            "rows": rows,
            "cols": cols,
            "data": np.ascontiguousarray(self.value).view(np.float64).ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Share":
        data = np.asarray(d["data"], dtype=np.float64)
        rows, cols = int(d["rows"]), int(d["cols"])
        if data.size != 2 * rows * cols:
            raise InvalidArgument("share record data length does not match rows*cols")
        value = data.view(np.complex128).reshape(rows, cols)
        return cls(str(d["secret_id"]), int(d["eval_index"]), value, int(d["T"]), int(d["N"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Share":
        return cls.from_dict(json.loads(text))

    def to_bytes(self) -> bytes:
        sid = self.secret_id.encode("utf-8")
        rows, cols = self.shape
        return b"".join(
            (
                _HEADER.pack(_MAGIC, 1, len(sid)),
                sid,
                _DIMS.pack(self.index, self.T, self.N, rows, cols),
                np.ascontiguousarray(self.value, dtype="<c16").tobytes(),
            )
        )

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Share":
        magic, version, n = _HEADER.unpack_from(buf, 0)
        if magic != _MAGIC or version != 1:
            raise InvalidArgument("not a share record")
        off = _HEADER.size
        sid = buf[off : off + n].decode("utf-8")
        off += n
        index, T, N, rows, cols = _DIMS.unpack_from(buf, off)
        off += _DIMS.size
        value = np.frombuffer(buf, dtype="<c16", count=rows * cols, offset=off).reshape(rows, cols)
        return cls(sid, index, value, T, N)


@dataclass(frozen=True)
class SharePolynomial:
    secret: np.ndarray
    noise_coeffs: np.ndarray  # (T, m, n)
    T: int
    N: int
    t: float
    sigma_s: float
    secret_id: str = "secret"

    def __call__(self, s: complex) -> np.ndarray:
        """Horner evaluation at an arbitrary point."""
        acc = np.zeros(self.secret.shape, dtype=complex)
        for coeff in self.noise_coeffs[::-1]:
            acc = (acc + coeff) * s
        return acc + self.secret

    def combined_noise(self) -> np.ndarray:
        """Noise added at every evaluation point, shape (N, m, n)."""
        return np.tensordot(_power_matrix(self.N, self.T), self.noise_coeffs, axes=(1, 0))


@functools.lru_cache(maxsize=256)
def _power_matrix(N: int, T: int) -> np.ndarray:
    w = eval_values(range(1, N + 1), N)
    out = w[:, None] ** np.arange(1, T + 1)[None, :]
    out.setflags(write=False)
    return out


def _check_params(T, N, sigma_s, t):
    if T < 1 or N < T + 1:
        raise InvalidArgument(f"need 1 <= T <= N-1, got T={T}, N={N}")
    if sigma_s < 0 or t <= 0:
        raise InvalidArgument(f"need sigma_s >= 0 and t > 0 (sigma_s={sigma_s}, t={t})")


def make_share_polynomial(
    secret,
    T: int,
    N: int,
    sigma_s: float,
    t: float,
    rng: np.random.Generator,
    secret_id: str = "secret",
    max_redraws: int = MAX_REDRAWS,
) -> SharePolynomial:
    """Draw the T coefficient matrices jointly until the combined noise has
    real and imaginary parts inside [-t, t] at all N evaluation points.

    ``sigma_s == 0`` yields an exactly noiseless polynomial; it exists so the
    protocol can be compared against plaintext arithmetic.
    """
    _check_params(T, N, sigma_s, t)
    secret = as_matrix(secret)
    if not np.all(np.isfinite(secret)):
        raise InvalidArgument("secret has non-finite entries")
    shape = (T,) + secret.shape
    if sigma_s == 0:
        return SharePolynomial(secret, np.zeros(shape), T, N, t, 0.0, secret_id)
    W = _power_matrix(N, T)
    for _ in range(max_redraws):
        coeffs = rng.normal(0.0, sigma_s, size=shape)
        combined = np.tensordot(W, coeffs, axes=(1, 0))
        if np.abs(combined.real).max() <= t and np.abs(combined.imag).max() <= t:
            return SharePolynomial(secret, coeffs, T, N, t, sigma_s, secret_id)
    # Estimate how rarely a single redraw succeeds, for the error report.
    trials = 200
    hits = 0
    for _ in range(trials):
        combined = np.tensordot(W, rng.normal(0.0, sigma_s, size=shape), axes=(1, 0))
        hits += bool(np.abs(combined.real).max() <= t and np.abs(combined.imag).max() <= t)
    raise TruncationInfeasible(
        f"combined noise never fell inside [-{t}, {t}] in {max_redraws} joint redraws "
        f"(sigma_s={sigma_s}, T={T}, N={N}, entries={secret.size}); "
        f"empirical acceptance rate {hits / trials:.3g}",
        rejection_rate=1.0 - hits / trials,
    )


def evaluate_shares(poly: SharePolynomial) -> list[Share]:
    values = poly.secret[None, :, :] + poly.combined_noise()
    return [Share(poly.secret_id, i + 1, values[i], poly.T, poly.N) for i in range(poly.N)]


@functools.lru_cache(maxsize=1024)
def recovery_vector(indices: tuple[int, ...], N: int, T: int) -> np.ndarray:
    """First row of the inverse Vandermonde matrix on ``indices``."""
    w = eval_values(indices, N)
    G = w[:, None] ** np.arange(T + 1)[None, :]
    e0 = np.zeros(T + 1, dtype=complex)
    e0[0] = 1.0
    g = np.linalg.solve(G.T, e0)
    g.setflags(write=False)
    return g


def select_shares(shares, T: int | None = None) -> list[Share]:
    """First T+1 distinct-index shares in ascending index order."""
    shares = list(shares)
    if not shares:
        raise InsufficientShares("no shares given")
    ref = shares[0]
    T = ref.T if T is None else T
    by_index: dict[int, Share] = {}
    for s in shares:
        if (s.shape, s.T, s.N) != (ref.shape, ref.T, ref.N):
            raise InvalidArgument(
                f"share {s.secret_id}@{s.index} has (shape, T, N)={(s.shape, s.T, s.N)}, "
                f"expected {(ref.shape, ref.T, ref.N)}"
            )
        by_index.setdefault(s.index, s)
    if len(by_index) < T + 1:
        raise InsufficientShares(f"need {T + 1} distinct evaluation indices, got {len(by_index)}")
    return [by_index[i] for i in sorted(by_index)[: T + 1]]


def interpolate(shares) -> np.ndarray:
    """Complex constant term recovered from the first T+1 shares."""
    chosen = select_shares(shares)
    ref = chosen[0]
    g = recovery_vector(tuple(s.index for s in chosen), ref.N, ref.T)
    stacked = np.stack([s.value for s in chosen])
    return np.tensordot(g, stacked, axes=(0, 0))


def reconstruct(shares, imag_tol: float = IMAG_TOLERANCE, return_residual: bool = False):
    z0 = interpolate(shares)
    residual = float(np.abs(z0.imag).max()) if z0.size else 0.0
    if residual > imag_tol:
        warnings.warn(
            f"reconstructed secret has imaginary residual {residual:.3g} > {imag_tol:g}",
            NumericalDegradationWarning,
            stacklevel=2,
        )
    if return_residual:
        return z0.real.copy(), residual
    return z0.real.copy()


@dataclass(frozen=True)
class PerturbationBoundInputs:
    c: float
    T: int
    t: float
    r: float
    kappa: float
    lambda_min: float
    precision_bits: int = DEFAULT_PRECISION_BITS

    def __post_init__(self):
        if min(self.c, self.t, self.r, self.kappa, self.lambda_min) <= 0 or self.T < 1:
            raise InvalidArgument("perturbation bound inputs must be positive")
        if self.t * self.T + self.r < 1:
            raise InvalidArgument(f"bound requires tT + r >= 1, got {self.t * self.T + self.r}")


def perturbation_bound(inp: PerturbationBoundInputs) -> float:
    """Worst-case error of recovering a linear combination of secrets with
    coefficient mass ``c`` under ``precision_bits`` of mantissa."""
    return (
        inp.c
        * math.sqrt(inp.T + 1)
        * (inp.r + inp.t * inp.T)
        * (inp.kappa / inp.lambda_min)
        * 2.0 ** (-inp.precision_bits)
    )


def underdetermination_witness(shares, reference=None, offset: float = 1.0) -> SharePolynomial:
    """Degree-T polynomial through exactly T shares whose constant term is
    ``reference + offset`` (entrywise), i.e. an alternative secret that the
    holders of these shares cannot rule out."""
    shares = list(shares)
    if not shares:
        raise InvalidArgument("need at least one share")
    T, N = shares[0].T, shares[0].N
    indices = [s.index for s in shares]
    if len(shares) != T or len(set(indices)) != T:
        raise InvalidArgument(f"need exactly T={T} shares with distinct indices")
    shape = shares[0].shape
    reference = np.zeros(shape) if reference is None else as_matrix(reference)
    z0 = reference + offset
    w = eval_values(indices, N)
    M = w[:, None] ** np.arange(1, T + 1)[None, :]
    rhs = np.stack([s.value - z0 for s in shares]).reshape(T, -1)
    coeffs = np.linalg.solve(M, rhs).reshape((T,) + shape)
    return SharePolynomial(z0, coeffs, T, N, math.inf, math.nan, "witness")
