"""Regenerate the bundled synthetic datasets in data/."""

import argparse
from pathlib import Path

from ampc.data import make_linear, make_separable, write_csv


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    p.add_argument("--rows", type=int, default=500)
    p.add_argument("--features", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    X, y = make_separable(args.rows, args.features, args.seed)
    write_csv(out / "synthetic_separable.csv", X, y)
    X, y, w = make_linear(args.rows, args.features, args.seed, noise=0.05)
    write_csv(out / "synthetic_linear.csv", X, y, label_column="target")
    print(f"wrote {args.rows} rows each to {out} (linear weights with intercept first: {w.round(4).tolist()})")


if __name__ == "__main__":
    main()
