"""Sweep the noise multiplier on a bundled config and print the final metric.

Runs the decentralised trainer and the centralised baseline once per
multiplier; per-run outputs land under --out/<multiplier>/.
"""

import argparse
import tempfile
from pathlib import Path

from ampc.cli import ExperimentConfig, run_experiment
from ampc.errors import AmpcError


def main():
    root = Path(__file__).resolve().parent.parent
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", default=str(root / "configs" / "synthetic_separable.json"))
    p.add_argument("--multipliers", type=float, nargs="+", default=[1e-9, 1, 3, 10, 30, 100])
    p.add_argument("--out", default=None)
    args = p.parse_args()
    out = Path(args.out or tempfile.mkdtemp(prefix="ampc-sweep-"))

    cfg = ExperimentConfig.load(args.config)
    print(f"{'multiplier':>12} {'sigma_s':>14} {'decentralized':>14} {'centralized':>12}")
    for m in args.multipliers:
        cfg.noise_multiplier = m
        try:
            r = run_experiment(cfg, out / f"{m:g}")
        except AmpcError as e:
            print(f"{m:>12g} {'':>14} {type(e).__name__:>14}")
            continue
        print(f"{m:>12g} {r['sigma_s']:>14.6g} {r['decentralized']:>14.6g} {r['centralized']:>12.6g}")
    print(f"outputs under {out}")


if __name__ == "__main__":
    main()
