"""Train the reference synthetic setups and print their validation metrics.

    python scripts/run_synthetic.py                      # all three setups
    python scripts/run_synthetic.py two_hop --h 1        # override a TrainConfig field
    python scripts/run_synthetic.py discussion --supervised
"""

import argparse
import json
import logging
import time

from sentsel.experiments import SETUPS, run


def main():
    p = argparse.ArgumentParser()
    p.add_argument("setups", nargs="*", default=list(SETUPS), choices=list(SETUPS))
    p.add_argument("--h", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--supervised", action="store_true", default=None)
    p.add_argument("--tau", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    overrides = {k: v for k, v in vars(args).items()
                 if k in ("h", "epochs", "seed", "supervised", "tau") and v is not None}
    for name in args.setups:
        t0 = time.perf_counter()
        _, history, report, _ = run(SETUPS[name], **overrides)
        out = report.to_json() | {"best_step": history.best_step, "seconds": round(time.perf_counter() - t0, 1)}
        print(name, json.dumps(out, sort_keys=True))


if __name__ == "__main__":
    main()
