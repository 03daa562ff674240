"""Collaborative logistic and linear regression over analog shares.

Every iteration each client secret-shares a mini-batch, the clients compute
``X w`` and ``X^T e`` with :func:`private_mul`, and each applies the gradient
step to its own share of ``w``. Nothing but shares and opened Beaver
differences ever leaves a client.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteAggregation, InvalidArgument, NumericalDivergence
from .mpc import (
    NoiseConfig,
    TripleDealer,
    add_public,
    beaver_multiply_many,
    open_to,
    scale_share,
    share_inputs,
    sub_shares,
    transpose_share,
)
from .network import STREAM_INIT, STREAM_SCHEDULE, Network
from .numerics import client_rng
from .sharing import Share, reconstruct

TASKS = ("logistic", "linear")


@dataclass
class Dataset:
    """One client's rows. ``labels`` is a flat vector."""

    features: np.ndarray
    labels: np.ndarray
    record_bound: float = 1.0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise InvalidArgument(
                f"features {self.features.shape} and labels ({self.labels.size},) disagree"
            )

    @property
    def m(self) -> int:
        return self.features.shape[0]


@dataclass
class TrainConfig:
    task: str
    gamma: float
    iterations: int
    batch: int
    sigma_s: float
    t: float
    seed: int = 0
    triple_sigma: float | None = None
    init_scale: float = 0.01

    def __post_init__(self):
        if self.task not in TASKS:
            raise InvalidArgument(f"task must be one of {TASKS}, got {self.task!r}")
        if self.gamma <= 0 or self.iterations < 0 or self.batch < 1:
            raise InvalidArgument("need gamma > 0, iterations >= 0, batch >= 1")

    @property
    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.sigma_s, self.t, self.triple_sigma)


@dataclass
class TrainResult:
    weights: np.ndarray
    history: list = field(default_factory=list)  # w^(0), ..., w^(J)
    wall_ms: list = field(default_factory=list)


def sigmoid_approx(x):
    """Degree-1 surrogate of the logistic function, 1/2 + x/4 (unclamped)."""
    return 0.5 + np.asarray(x) / 4.0


def accuracy(w, X, y) -> float:
    pred = sigmoid_approx(np.asarray(X) @ np.ravel(w)) >= 0.5
    return float(np.mean(pred == (np.ravel(y) >= 0.5)))


def relative_error(y, y_hat) -> float:
    y = np.ravel(y)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise InvalidArgument("relative error undefined for an all-zero target")
    return float(np.linalg.norm(y - np.ravel(y_hat)) / norm)


def with_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.hstack([np.ones((X.shape[0], 1)), X])


def design(task: str, X) -> np.ndarray:
    return with_intercept(X) if task == "linear" else np.asarray(X, dtype=float)


def batch_schedule(seed: int, sizes, batch: int, iterations: int) -> np.ndarray:
    """Row indices per (iteration, client): uniform without replacement
    within an epoch, reshuffled when a client runs out of rows."""
    sizes = list(sizes)
    if any(batch > m for m in sizes):
        raise InvalidArgument(f"batch {batch} exceeds the smallest client dataset {min(sizes)}")
    out = np.empty((iterations, len(sizes), batch), dtype=np.int64)
    for j, m in enumerate(sizes):
        rng = client_rng(seed, STREAM_SCHEDULE, j + 1)
        perm, pos = rng.permutation(m), 0
        for it in range(iterations):
            if pos + batch > m:
                perm, pos = rng.permutation(m), 0
            out[it, j] = perm[pos : pos + batch]
            pos += batch
    return out


def initial_weights(seed: int, n: int, scale: float) -> np.ndarray:
    return client_rng(seed, STREAM_INIT).uniform(-scale, scale, size=(n, 1))


def private_mul(net: Network, u_shares: dict[int, Share], v_shares: dict[int, Share],
                dealer: TripleDealer, noise: NoiseConfig, label: str) -> dict[int, Share]:
    """Shares of ``U V`` from per-client shares of ``U`` and ``V``.

    Client ``k`` ends with the average over all ``(i, j)`` of its share of
    ``[U]_i [V]_j``; the average is a share of ``U V`` because the mean of
    the shares of a degree-(N-1) polynomial over all N roots of unity is
    its constant term.
    """
    ids = list(net.ids)
    pairs = [(i, j) for i in ids for j in ids if i != j]
    dims = u_shares[ids[0]].shape + v_shares[ids[0]].shape
    triples = dealer.deal([dims] * len(pairs), [f"{label}.T{i}.{j}" for i, j in pairs])

    items = []
    with np.errstate(over="ignore", invalid="ignore"):
        for i in ids:
            items.append((i, f"{label}.U{i}", u_shares[i].value))
            items.append((i, f"{label}.V{i}", v_shares[i].value))
            items.append((i, f"{label}.P{i}.{i}", u_shares[i].value @ v_shares[i].value))
    if not all(np.all(np.isfinite(x)) for _, _, x in items):
        raise NumericalDivergence(f"{label}: share values overflowed double precision")
    shared = share_inputs(net, items, noise)

    jobs = [
        (shared[f"{label}.U{i}"], shared[f"{label}.V{j}"], tr, f"{label}.P{i}.{j}")
        for (i, j), tr in zip(pairs, triples)
    ]
    terms = {f"{label}.P{i}.{i}": shared[f"{label}.P{i}.{i}"] for i in ids}
    with np.errstate(over="ignore", invalid="ignore"):
        for (_, _, _, name), out in zip(jobs, beaver_multiply_many(net, jobs)):
            terms[name] = out
        result = aggregate_products(net, terms, label)
    if not all(np.all(np.isfinite(s.value)) for s in result.values()):
        raise NumericalDivergence(f"{label}: product shares overflowed double precision")
    return result


def aggregate_products(net: Network, terms: dict[str, dict[int, Share]], label: str) -> dict[int, Share]:
    ids = list(net.ids)
    missing = [f"({i},{j})" for i in ids for j in ids if f"{label}.P{i}.{j}" not in terms]
    if missing:
        raise IncompleteAggregation(f"{label}: missing products {', '.join(missing)}")
    scale = 1.0 / net.N**2
    out = {}
    for k in ids:
        acc = sum(terms[f"{label}.P{i}.{j}"][k].value for i in ids for j in ids)
        out[k] = Share(label, k, scale * acc, net.T, net.N)
    return out


def _observe(shares: dict[int, Share]) -> np.ndarray:
    """Harness-side reconstruction for monitoring; sends no messages."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return reconstruct(shares.values())


def train(net: Network, datasets, config: TrainConfig, schedule=None, w0=None) -> TrainResult:
    """Decentralised training; ``datasets[j-1]`` belongs to client ``j``.
    ``w0`` overrides the seeded random initialisation."""
    if len(datasets) != net.N:
        raise InvalidArgument(f"{len(datasets)} datasets for {net.N} clients")
    if config.task == "logistic":
        for d in datasets:
            if not np.all(np.isin(d.labels, (0.0, 1.0))):
                raise InvalidArgument("logistic regression needs labels in {0, 1}")
    Xs = [design(config.task, d.features) for d in datasets]
    ys = [d.labels.reshape(-1, 1) for d in datasets]
    n = Xs[0].shape[1]
    B, N = config.batch, net.N
    if schedule is None:
        schedule = batch_schedule(config.seed, [X.shape[0] for X in Xs], B, config.iterations)
    noise = config.noise
    dealer = TripleDealer(net, noise)
    step = config.gamma / (N * B)

    if w0 is None:
        w0 = initial_weights(config.seed, n, config.init_scale)
    w = share_inputs(net, [(1, "w0", np.reshape(w0, (n, 1)))], noise)["w0"]
    result = TrainResult(None, [_observe(w)])
    for it in range(config.iterations):
        start = time.perf_counter()
        items = []
        for j in range(N):
            idx = schedule[it, j]
            items.append((j + 1, f"it{it}.X{j + 1}", Xs[j][idx]))
            items.append((j + 1, f"it{it}.y{j + 1}", ys[j][idx]))
        shared = share_inputs(net, items, noise)
        X = {}
        y = {}
        for i in net.ids:
            X[i] = Share(f"it{it}.X", i, np.vstack([shared[f"it{it}.X{j}"][i].value for j in net.ids]), net.T, N)
            y[i] = Share(f"it{it}.y", i, np.vstack([shared[f"it{it}.y{j}"][i].value for j in net.ids]), net.T, N)

        try:
            xw = private_mul(net, X, w, dealer, noise, f"it{it}.Xw")
            if config.task == "logistic":
                pred = {i: add_public(scale_share(0.25, xw[i]), 0.5) for i in net.ids}
            else:
                pred = xw
            err = {i: sub_shares(pred[i], y[i]) for i in net.ids}
            grad = private_mul(net, {i: transpose_share(X[i]) for i in net.ids}, err, dealer, noise, f"it{it}.XTe")
            with np.errstate(over="ignore", invalid="ignore"):
                w = {i: w[i].with_value(w[i].value - step * grad[i].value, "w") for i in net.ids}
            if not all(np.all(np.isfinite(s.value)) for s in w.values()):
                raise NumericalDivergence("weight shares overflowed double precision")
        except NumericalDivergence as e:
            raise NumericalDivergence(
                f"iteration {it + 1}: {e}; share noise compounds through every Beaver product, "
                f"so lower sigma_s or the iteration count"
            ) from None
        result.history.append(_observe(w))
        result.wall_ms.append((time.perf_counter() - start) * 1e3)

    final = open_to(net, w, list(net.ids), "w.final")
    result.weights = final[1]
    return result


def train_logistic(net: Network, datasets, config: TrainConfig, schedule=None, w0=None) -> TrainResult:
    if config.task != "logistic":
        raise InvalidArgument("config.task must be 'logistic'")
    return train(net, datasets, config, schedule, w0)


def train_linear(net: Network, datasets, config: TrainConfig, schedule=None, w0=None) -> TrainResult:
    if config.task != "linear":
        raise InvalidArgument("config.task must be 'linear'")
    return train(net, datasets, config, schedule, w0)


def centralized_baseline(datasets, config: TrainConfig, schedule=None, w0=None) -> TrainResult:
    """Plaintext mini-batch descent on the pooled data with the same batches,
    initial weights, step size and sigmoid surrogate as :func:`train`."""
    Xs = [design(config.task, d.features) for d in datasets]
    ys = [d.labels.reshape(-1, 1) for d in datasets]
    N, B = len(Xs), config.batch
    if schedule is None:
        schedule = batch_schedule(config.seed, [X.shape[0] for X in Xs], B, config.iterations)
    n = Xs[0].shape[1]
    w = initial_weights(config.seed, n, config.init_scale) if w0 is None else np.reshape(np.asarray(w0, float), (n, 1))
    result = TrainResult(None, [w.copy()])
    step = config.gamma / (N * B)
    for it in range(config.iterations):
        start = time.perf_counter()
        Xb = np.vstack([Xs[j][schedule[it, j]] for j in range(N)])
        yb = np.vstack([ys[j][schedule[it, j]] for j in range(N)])
        out = Xb @ w
        if config.task == "logistic":
            out = sigmoid_approx(out)
        w = w - step * (Xb.T @ (out - yb))
        result.history.append(w.copy())
        result.wall_ms.append((time.perf_counter() - start) * 1e3)
    result.weights = w
    return result


def evaluate(task: str, w, X, y) -> float:
    """Accuracy for logistic, relative error for linear."""
    Xd = design(task, X)
    if task == "logistic":
        return accuracy(w, Xd, y)
    return relative_error(y, Xd @ np.ravel(w))
