"""Learning curve over training-set fractions on a synthetic setup.

    python scripts/learning_curve.py single_evidence --fractions 0.1,0.5,1.0 --seeds 1,2,3 --out lc.csv
"""

import argparse
from dataclasses import replace
from pathlib import Path

from sentsel.cli import learning_curve
from sentsel.experiments import SETUPS


def main():
    p = argparse.ArgumentParser()
    p.add_argument("setup", choices=list(SETUPS))
    p.add_argument("--fractions", default="0.1,0.25,0.5,1.0")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    args = p.parse_args()

    setup = SETUPS[args.setup]
    cfg = setup.train if args.epochs is None else replace(setup.train, epochs=args.epochs)
    tr, va = setup.datasets()
    text = learning_curve(tr, va, [float(x) for x in args.fractions.split(",")],
                          [int(x) for x in args.seeds.split(",")], cfg)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")


if __name__ == "__main__":
    main()
