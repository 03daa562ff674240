"""``ampc`` command-line interface.

Exit codes: 0 success, 2 infeasible privacy budget, 64 usage or input error,
70 protocol violation or other internal failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as data_mod
from .errors import AmpcError, InfeasibleBudget, InvalidArgument
from .learn import TrainConfig, batch_schedule, centralized_baseline, evaluate, train
from .mpc import NoiseConfig, Program, beaver_multiply, orchestrate, share_inputs, TripleDealer
from .network import Network
from .numerics import client_rng
from .privacy import PrivacyBudget, audit_mechanism, audit_protocol_noise, calibrate, compute_sensitivity
from .sharing import reconstruct

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64
EXIT_INTERNAL = 70

COMPOSITION_NOTE = (
    "note: (epsilon, delta) holds for each individual share release; a training run makes "
    "many releases (every iteration, to every recipient) and no composition is accounted for"
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(x) -> str:
    return format(float(x), ".9g")


def _dump(obj) -> str:
    """JSON with every float printed to 9 significant digits."""

    def conv(v):
        if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
            return v
        if isinstance(v, float):
            return float(fmt(v)) if math.isfinite(v) else fmt(v)
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, np.ndarray):
            return conv(v.tolist())
        if isinstance(v, np.generic):
            return conv(v.item())
        return v

    return json.dumps(conv(obj), indent=2)


# -- experiment config ---------------------------------------------------------


@dataclass
class ExperimentConfig:
    n_clients: int
    t_colluders: int
    epsilon: float
    delta: float
    trunc_t: float
    task: str
    gamma: float
    iterations: int
    batch: int
    dataset_path: str
    label_column: str
    seed: int = 0
    record_bound: float | None = None
    delta_sensitivity: float | None = None
    test_fraction: float = 0.2
    noise_multiplier: float = 1.0

    _INT = ("n_clients", "t_colluders", "iterations", "batch", "seed")
    _STR = ("task", "dataset_path", "label_column")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise InvalidArgument("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {unknown}")
        required = [f.name for f in dataclasses.fields(cls) if f.default is dataclasses.MISSING]
        missing = [k for k in required if k not in doc]
        if missing:
            raise InvalidArgument(f"missing config keys: {missing}")
        vals = {}
        for k, v in doc.items():
            if k in cls._STR:
                if not isinstance(v, str):
                    raise InvalidArgument(f"{k} must be a string")
                vals[k] = v
            elif v is None and k in ("record_bound", "delta_sensitivity"):
                vals[k] = None
            elif k in cls._INT:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise InvalidArgument(f"{k} must be an integer")
                vals[k] = v
            else:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise InvalidArgument(f"{k} must be a number")
                vals[k] = float(v)
        cfg = cls(**vals)
        if base_dir is not None and not os.path.isabs(cfg.dataset_path):
            cfg.dataset_path = str(base_dir / cfg.dataset_path)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise InvalidArgument(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise InvalidArgument(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(doc, path.parent)

    def validate(self):
        if self.n_clients < 2:
            raise InvalidArgument("n_clients must be at least 2")
        if not 1 <= self.t_colluders <= self.n_clients - 1:
            raise InvalidArgument(f"t_colluders must lie in [1, n_clients-1], got {self.t_colluders}")
        if self.task not in ("logistic", "linear"):
            raise InvalidArgument(f"task must be 'logistic' or 'linear', got {self.task!r}")
        if (self.record_bound is None) == (self.delta_sensitivity is None):
            raise InvalidArgument("give exactly one of record_bound and delta_sensitivity")
        if self.noise_multiplier < 0:
            raise InvalidArgument("noise_multiplier must be non-negative")
        if self.iterations < 1 or self.batch < 1 or self.gamma <= 0:
            raise InvalidArgument("need iterations >= 1, batch >= 1, gamma > 0")

    @property
    def sensitivity(self) -> float:
        return compute_sensitivity(self.record_bound, self.delta_sensitivity)

    @property
    def bound(self) -> float:
        """Row-norm bound used for clipping."""
        return self.record_bound if self.record_bound is not None else self.delta_sensitivity / 2.0


# -- commands ----------------------------------------------------------------------


def cmd_calibrate(args) -> int:
    sens = compute_sensitivity(args.record_bound, args.sensitivity)
    budget = calibrate(args.epsilon, args.delta, args.trunc_t, sens, args.t_colluders)
    print(_dump(budget.to_dict()))
    return EXIT_OK


def _metric_rows(task, history, wall_ms, train_xy, test_xy, sigma_s, wall_clock):
    rows = []
    for it in range(1, len(history)):
        w = history[it]
        rows.append([
            str(it),
            fmt(evaluate(task, w, *train_xy)),
            fmt(evaluate(task, w, *test_xy)),
            fmt(sigma_s),
            fmt(wall_ms[it - 1]) if wall_clock else "",
        ])
    return rows


def _write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "train_metric", "test_metric", "sigma_s", "wall_ms"])
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig, out_dir, dump_transcript=None, wall_clock=False) -> dict:
    """Decentralised run plus centralised baseline; writes the four output files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    budget = calibrate(cfg.epsilon, cfg.delta, cfg.trunc_t, cfg.sensitivity, cfg.t_colluders)
    sigma_s = budget.sigma_s * cfg.noise_multiplier

    table = data_mod.load_csv(cfg.dataset_path, cfg.label_column)
    (Xtr, ytr), (Xte, yte) = data_mod.train_test_split(table, cfg.test_fraction, cfg.seed)
    parts = data_mod.split_clients(Xtr, ytr, cfg.n_clients)
    datasets, norm = data_mod.prepare_clients(parts, cfg.bound)
    train_xy = (np.vstack([d.features for d in datasets]), np.concatenate([d.labels for d in datasets]))
    test_xy = (norm(Xte), yte) if len(yte) else train_xy

    tc = TrainConfig(cfg.task, cfg.gamma, cfg.iterations, cfg.batch, sigma_s, cfg.trunc_t, seed=cfg.seed)
    schedule = batch_schedule(cfg.seed, [d.m for d in datasets], cfg.batch, cfg.iterations)
    net = Network(cfg.n_clients, cfg.t_colluders, cfg.seed, record_payloads=dump_transcript is not None)
    dec = train(net, datasets, tc, schedule)
    cen = centralized_baseline(datasets, tc, schedule)
    if dump_transcript is not None:
        net.dump_transcript(dump_transcript, with_payloads=True)

    _write_metrics(out_dir / "metrics_decentralized.csv",
                   _metric_rows(cfg.task, dec.history, dec.wall_ms, train_xy, test_xy, sigma_s, wall_clock))
    _write_metrics(out_dir / "metrics_centralized.csv",
                   _metric_rows(cfg.task, cen.history, cen.wall_ms, train_xy, test_xy, 0.0, wall_clock))
    (out_dir / "weights.json").write_text(_dump(np.ravel(dec.weights)) + "\n")
    (out_dir / "budget.json").write_text(_dump(budget.to_dict()) + "\n")
    return {
        "task": cfg.task,
        "metric": "accuracy" if cfg.task == "logistic" else "relative_error",
        "decentralized": evaluate(cfg.task, dec.weights, *test_xy),
        "centralized": evaluate(cfg.task, cen.weights, *test_xy),
        "sigma_s": sigma_s,
        "rounds": net.round,
    }


def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if os.environ.get("AMPC_SEED"):
        try:
            cfg.seed = int(os.environ["AMPC_SEED"])
        except ValueError:
            raise InvalidArgument(f"AMPC_SEED must be an integer, got {os.environ['AMPC_SEED']!r}") from None
    if args.noise_multiplier is not None:
        cfg.noise_multiplier = args.noise_multiplier
        cfg.validate()
    print(COMPOSITION_NOTE, file=sys.stderr)
    summary = run_experiment(cfg, args.out, args.dump_transcript, args.wall_clock)
    print(_dump(summary))
    return EXIT_OK


def cmd_audit(args) -> int:
    if args.samples < 10_000:
        raise UsageError(f"--samples must be at least 10000, got {args.samples}")
    if args.from_budget:
        budget = PrivacyBudget.from_dict(json.loads(Path(args.from_budget).read_text()))
        sigma, sens, t, eps, delta = budget.sigma, budget.sensitivity, budget.t, budget.epsilon, budget.delta
    else:
        missing = [f for f in ("sigma", "epsilon", "trunc_t") if getattr(args, f) is None]
        if missing or (args.sensitivity is None and args.record_bound is None):
            raise UsageError("without --from-budget, give --sigma, --epsilon, --trunc-t and --sensitivity or --record-bound")
        sigma, eps, t, delta = args.sigma, args.epsilon, args.trunc_t, args.delta
        sens = compute_sensitivity(args.record_bound, args.sensitivity)
        budget = None
    if args.multiplier is not None:
        sigma *= args.multiplier
    rng = client_rng(args.seed, 9)
    if args.protocol_noise:
        if budget is None:
            raise UsageError("--protocol-noise needs --from-budget")
        polys = max(1, args.samples // args.n)
        res = audit_protocol_noise(budget.scaled(args.multiplier or 1.0), args.n, polys, rng)
    else:
        res = audit_mechanism(sigma, sens, t, eps, args.samples, rng, delta)
    print(_dump(res.to_dict()))
    return EXIT_OK


def _fmt_complex(z) -> str:
    return f"{fmt(z.real)}{'+' if z.imag >= 0 else '-'}{fmt(abs(z.imag))}i"


def cmd_demo(args) -> int:
    N, T = args.n, args.t_colluders
    net = Network(N, T, args.seed)
    noise = NoiseConfig(args.sigma_s, args.trunc_t)
    shares = share_inputs(net, [(1, "x", args.secret)], noise)["x"]
    print(f"secret {fmt(args.secret)} shared by client 1 among {N} clients (T={T})")
    for i in net.ids:
        print(f"  share {i}: {_fmt_complex(shares[i].value[0, 0])}")
    value = reconstruct(shares.values())[0, 0]
    print(f"reconstructed: {value:.6f}")
    if args.multiply is not None:
        u, v = args.multiply
        sh = share_inputs(net, [(1, "u", u), (min(2, N), "v", v)], noise)
        triple = TripleDealer(net, noise).deal([(1, 1, 1, 1)], ["demo"])[0]
        prod = beaver_multiply(net, sh["u"], sh["v"], triple, "uv")
        print(f"beaver product {fmt(u)} * {fmt(v)} = {reconstruct(prod.values())[0, 0]:.6f}")
    return EXIT_OK


def cmd_run_program(args) -> int:
    try:
        doc = json.loads(Path(args.program).read_text())
    except FileNotFoundError:
        raise InvalidArgument(f"program file not found: {args.program}") from None
    except json.JSONDecodeError as e:
        raise InvalidArgument(f"{args.program}: invalid JSON ({e})") from None
    prog = Program.from_dict(doc, args.n)
    values = dict(prog.values or {})
    if args.values:
        values.update(json.loads(Path(args.values).read_text()))
    net = Network(args.n, args.t_colluders, args.seed, record_payloads=args.dump_transcript is not None)
    results = orchestrate(net, prog, values, NoiseConfig(args.sigma_s, args.trunc_t), args.triple_budget)
    if args.dump_transcript is not None:
        net.dump_transcript(args.dump_transcript, with_payloads=True)
    print(_dump({str(i): {k: v.tolist() for k, v in r.items()} for i, r in results.items() if r}))
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ampc", description="Analog secret-sharing MPC with local differential privacy.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("calibrate", help="noise level for an (epsilon, delta) budget")
    c.add_argument("--epsilon", type=_positive(float), required=True)
    c.add_argument("--delta", type=_positive(float), required=True)
    c.add_argument("--trunc-t", type=_positive(float), required=True)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--sensitivity", type=_positive(float))
    g.add_argument("--record-bound", type=_positive(float))
    c.add_argument("--t-colluders", type=_positive(int), default=1)
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("train", help="decentralised training plus centralised baseline")
    t.add_argument("config")
    t.add_argument("--out", default="results")
    t.add_argument("--noise-multiplier", type=float)
    t.add_argument("--dump-transcript", metavar="PATH")
    t.add_argument("--wall-clock", action="store_true", help="fill the wall_ms column (breaks byte-identical reruns)")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("audit", help="Monte-Carlo check of the violation probability")
    a.add_argument("--from-budget", metavar="BUDGET_JSON")
    a.add_argument("--sigma", type=_positive(float))
    a.add_argument("--epsilon", type=_positive(float))
    a.add_argument("--delta", type=_positive(float))
    a.add_argument("--trunc-t", type=_positive(float))
    g = a.add_mutually_exclusive_group()
    g.add_argument("--sensitivity", type=_positive(float))
    g.add_argument("--record-bound", type=_positive(float))
    a.add_argument("--samples", type=int, default=1_000_000)
    a.add_argument("--multiplier", type=_positive(float), help="scale sigma before auditing")
    a.add_argument("--protocol-noise", action="store_true", help="audit noise from real share polynomials")
    a.add_argument("--n", type=_positive(int), default=4, help="clients for --protocol-noise")
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_audit)

    d = sub.add_parser("demo", help="share, reconstruct and multiply a scalar")
    d.add_argument("--secret", type=float, default=3.0)
    d.add_argument("--n", type=_positive(int), default=2)
    d.add_argument("--t-colluders", type=_positive(int), default=1)
    d.add_argument("--multiply", type=float, nargs=2, metavar=("U", "V"))
    d.add_argument("--sigma-s", type=float, default=1.0)
    d.add_argument("--trunc-t", type=_positive(float), default=10.0)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_demo)

    r = sub.add_parser("run-program", help="evaluate an arithmetic DAG over shares")
    r.add_argument("program")
    r.add_argument("--values", metavar="JSON", help="input values (overrides those in the program)")
    r.add_argument("--n", type=_positive(int), required=True)
    r.add_argument("--t-colluders", type=_positive(int), default=1)
    r.add_argument("--sigma-s", type=float, default=1.0)
    r.add_argument("--trunc-t", type=_positive(float), default=10.0)
    r.add_argument("--triple-budget", type=int)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--dump-transcript", metavar="PATH")
    r.set_defaults(func=cmd_run_program)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleBudget as e:
        print(f"infeasible budget: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidArgument as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AmpcError as e:
        print(f"protocol failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
