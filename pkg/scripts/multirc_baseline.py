"""Overlap baseline on ERASER MultiRC.

Expects ``<root>/docs/`` and ``<root>/{train,val,test}.jsonl`` as distributed
by ERASER. Converted splits and the report land in ``--work``.

    python scripts/multirc_baseline.py /data/multirc --work runs/multirc
"""

import argparse
import json
from pathlib import Path

from sentsel.cli import dispatch


def main():
    p = argparse.ArgumentParser()
    p.add_argument("root", type=Path)
    p.add_argument("--work", type=Path, default=Path("runs/multirc"))
    args = p.parse_args()
    args.work.mkdir(parents=True, exist_ok=True)

    for split in ("train", "val", "test"):
        code = dispatch(["import-eraser", "--docs", str(args.root / "docs"),
                         "--annotations", str(args.root / f"{split}.jsonl"), "--labels", "False,True",
                         "--out", str(args.work / f"{split}.jsonl")])
        if code:
            raise SystemExit(code)
    report = args.work / "baseline.json"
    code = dispatch(["baseline", *(f"--{s}={args.work / f'{s}.jsonl'}" for s in ("train", "val", "test")),
                     "--out", str(report)])
    if code:
        raise SystemExit(code)
    out = json.loads(report.read_text())
    print(json.dumps(out["config"]), {s: round(out[s]["f1a"], 4) for s in ("train", "val", "test")})


if __name__ == "__main__":
    main()
