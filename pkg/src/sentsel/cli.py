"""Command-line entry point: ``sentsel <subcommand> ...``.

Config files are flat ``key = value`` text (``#`` comments). Keys are the
fields of TrainConfig plus the objective keys ``tau``, ``lambda_rationale``,
``supervised`` and ``stop_grad_weights``; ``gen-synthetic`` takes SynthConfig
keys instead. ``--set key=value`` overrides the file. Unknown keys are errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, baseline
from .corpus import Dataset, corpus_stats, import_eraser, read_native, write_native
from .encoder import load_checkpoint, save_checkpoint
from .evalmetrics import PredictionRecord, evaluate_records
from .objective import ObjectiveConfig
from .synthgen import SynthConfig, generate
from .trainer import Model, TrainConfig, subsample, train, train_and_evaluate

OBJECTIVE_KEYS = tuple(f.name for f in fields(ObjectiveConfig))


class ConfigError(ValueError):
    pass


# -- config plumbing --------------------------------------------------------------

def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if default is None:
            return None if raw.lower() == "none" else int(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}") from None


def _apply(cls, base, kv: dict[str, str]):
    known = {f.name: getattr(base, f.name) for f in fields(cls)}
    unknown = sorted(set(kv) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return replace(base, **{k: _convert(v, known[k], k) for k, v in kv.items()})


def train_config_from(kv: dict[str, str]) -> TrainConfig:
    obj = {k: v for k, v in kv.items() if k in OBJECTIVE_KEYS}
    rest = {k: v for k, v in kv.items() if k not in OBJECTIVE_KEYS}
    if "objective" in rest:
        raise ConfigError("set objective keys directly (tau, lambda_rationale, ...)")
    cfg = _apply(TrainConfig, TrainConfig(), rest)
    return replace(cfg, objective=_apply(ObjectiveConfig, ObjectiveConfig(), obj))


def dump_train_config(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(TrainConfig):
        if f.name == "objective":
            continue
        lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    for f in fields(ObjectiveConfig):
        lines.append(f"{f.name} = {getattr(cfg.objective, f.name)}")
    return "\n".join(lines) + "\n"


def _load_kv(args) -> dict[str, str]:
    kv = parse_kv(Path(args.config).read_text(encoding="utf-8")) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip()] = v.strip()
    return kv


def _resolve_train_config(args) -> TrainConfig:
    cfg = train_config_from(_load_kv(args))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _sidecar(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


# -- subcommands --------------------------------------------------------------------

def cmd_gen_synthetic(args) -> None:
    kv = _load_kv(args)
    kv["family"] = args.family
    if args.num_samples is not None:
        kv["num_samples"] = str(args.num_samples)
    if args.seed is not None:
        kv["seed"] = str(args.seed)
    cfg = _apply(SynthConfig, SynthConfig(), kv)
    write_native(generate(cfg), args.out)


def cmd_import_eraser(args) -> None:
    names = [x for x in args.labels.split(",") if x]
    ds = import_eraser(args.docs, args.annotations, {n: i for i, n in enumerate(names)})
    write_native(ds, args.out)


def cmd_train(args) -> None:
    cfg = _resolve_train_config(args)
    train_set = read_native(args.train)
    val_set = read_native(args.val, train_set.labels)
    params, history = train(train_set, val_set, None, cfg)
    enc = cfg.encoder_config(len(train_set.vocab), train_set.num_labels)
    out = Path(args.out)
    save_checkpoint(out, params, enc, train_set.vocab, train_set.labels)
    report, _ = Model(params, enc, train_set.vocab, train_set.labels).evaluate(
        val_set.with_vocab(train_set.vocab), cfg.objective.tau)
    files = {
        "config": _sidecar(out, ".config.txt"),
        "history": _sidecar(out, ".history.csv"),
        "report": _sidecar(out, ".report.json"),
    }
    files["config"].write_text(dump_train_config(cfg), encoding="utf-8")
    files["history"].write_text(history.to_csv(), encoding="utf-8")
    _write_json(files["report"], report.to_json())
    manifest = {
        "inputs": {"train": _sha256(Path(args.train)), "val": _sha256(Path(args.val))},
        "outputs": {k: p.name for k, p in files.items()} | {"checkpoint": out.name},
        "sha256": {p.name: _sha256(p) for p in [out, *files.values()]},
        "best_step": history.best_step,
    }
    _write_json(_sidecar(out, ".manifest.json"), manifest)


def _load_for_checkpoint(args):
    params, enc, vocab, labels = load_checkpoint(args.checkpoint)
    data = read_native(args.data, labels)
    known = sum(t in vocab.stoi for s in data.samples for sent in s.document for t in sent.tokens)
    if data.samples and known == 0:
        raise ConfigError(f"{args.data}: no token is in the checkpoint vocabulary")
    return Model(params, enc, vocab, labels), data.with_vocab(vocab)


def cmd_eval(args) -> None:
    model, data = _load_for_checkpoint(args)
    records = model.predict_records(data, args.tau)
    report = evaluate_records(records, data.samples, data.num_labels, all_gold=args.all_gold)
    out = Path(args.out)
    _write_json(out, report.to_json())
    rows = []
    for s, r in zip(data.samples, records):
        rows.append((s.id, data.labels[s.label], data.labels[r.predicted_label],
                     " ".join(map(str, r.selected_candidate)), _fmt(r.weights[r.selected_index])))
    _sidecar(out, ".samples.csv").write_text(
        analysis.to_csv(("id", "gold", "predicted", "rationale", "weight"), rows), encoding="utf-8")


def cmd_predict(args) -> None:
    model, data = _load_for_checkpoint(args)
    records = model.predict_records(data, args.tau)
    Path(args.out).write_text("".join(json.dumps(r.to_json()) + "\n" for r in records), encoding="utf-8")


def cmd_baseline(args) -> None:
    tr = read_native(args.train)
    va = read_native(args.val, tr.labels)
    te = read_native(args.test, tr.labels)
    if tr.num_labels != 2:
        raise ConfigError("the overlap baseline is binary")
    stop = baseline.load_stopwords(args.stopwords)
    best = baseline.grid_search(tr, va, stoplist=stop)
    report = {"config": {"w_q": best.w_q, "w_a": best.w_a, "mode": best.mode},
              "model": best.model.to_json()}
    for name, ds in (("train", tr), ("val", va), ("test", te)):
        report[name] = baseline.evaluate_split(best.model, ds.samples, stop)
    _write_json(Path(args.out), report)


def learning_curve(train_set: Dataset, val_set: Dataset, fractions: Sequence[float],
                   seeds: Sequence[int], config: TrainConfig) -> str:
    """CSV of (fraction, seed, f1a, acc, rationale_f1) plus one mean row per fraction."""
    for f in fractions:
        if not 0 < f <= 1:
            raise ConfigError(f"fraction {f} outside (0, 1]")
    rows = []
    for f in fractions:
        group = []
        for seed in seeds:
            sub = train_set if f == 1.0 else subsample(train_set, f, seed)
            _, _, rep, _ = train_and_evaluate(sub, val_set, replace(config, seed=seed))
            vals = (rep.f1a, rep.accuracy, rep.rationale_f1)
            group.append(vals)
            rows.append((repr(f), str(seed), *map(_fmt, vals)))
        rows.append((repr(f), "mean", *map(_fmt, np.mean(group, axis=0))))
    return analysis.to_csv(("fraction", "seed", "f1a", "acc", "rationale_f1"), rows)


def cmd_learning_curve(args) -> None:
    cfg = _resolve_train_config(args)
    tr = read_native(args.train)
    va = read_native(args.val, tr.labels)
    fractions = [float(x) for x in args.fractions.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")]
    Path(args.out).write_text(learning_curve(tr, va, fractions, seeds, cfg), encoding="utf-8")
    Path(args.out).with_suffix(".config.txt").write_text(dump_train_config(cfg), encoding="utf-8")


def _read_records(path) -> list[PredictionRecord]:
    with open(path, encoding="utf-8") as fh:
        return [PredictionRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def cmd_analyze(args) -> None:
    data = read_native(args.data)
    runs = [_read_records(p) for p in args.records]
    recs = runs[0]
    if args.what == "logits":
        text = analysis.logits_csv(analysis.normalized_logits(recs, data.samples))
    elif args.what == "overlap":
        stop = baseline.load_stopwords(args.stopwords)
        text = analysis.overlap_csv(analysis.overlap_distribution(recs, data.samples, stop))
    elif args.what == "split":
        evaluated = _read_records(args.evaluated) if args.evaluated else None
        vecs = [analysis.correctness_vector(r, data.samples) for r in runs]
        text = analysis.split_csv(analysis.solvability_split(vecs, data.samples, evaluated, data.num_labels))
    else:
        if not args.reference:
            raise ConfigError("--what stability needs --reference (single-sentence records)")
        table = analysis.pair_stability(recs, _read_records(args.reference), data.samples)
        text = analysis.stability_csv(table)
    Path(args.out).write_text(text, encoding="utf-8")


def cmd_stats(args) -> None:
    text = corpus_stats(read_native(args.data)).format() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)

    p = argparse.ArgumentParser(prog="sentsel", description="Faithful sentence-selection classifier.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, out_required=True, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.add_argument("--out", required=out_required)
        sp.set_defaults(func=func)
        return sp

    sp = add("gen-synthetic", cmd_gen_synthetic, help="write a synthetic corpus")
    sp.add_argument("--family", required=True, choices=("single_evidence", "two_hop", "discussion"))
    sp.add_argument("--num-samples", type=int)
    sp.add_argument("--config")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")

    sp = add("import-eraser", cmd_import_eraser, help="convert ERASER data to the native format")
    sp.add_argument("--docs", required=True)
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--labels", required=True, help="comma-separated class names in id order")

    for name, func in (("train", cmd_train), ("learning-curve", cmd_learning_curve)):
        sp = add(name, func)
        sp.add_argument("--config")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE")
        sp.add_argument("--train", required=True)
        sp.add_argument("--val", required=True)
        if name == "learning-curve":
            sp.add_argument("--fractions", default="0.1,0.25,0.5,1.0")
            sp.add_argument("--seeds", default="1,2,3")

    for name, func in (("eval", cmd_eval), ("predict", cmd_predict)):
        sp = add(name, func)
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--data", required=True)
        sp.add_argument("--tau", type=float, default=1.0)
        if name == "eval":
            sp.add_argument("--all-gold", action="store_true")

    sp = add("baseline", cmd_baseline)
    sp.add_argument("--train", required=True)
    sp.add_argument("--val", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--stopwords")

    sp = add("analyze", cmd_analyze)
    sp.add_argument("--records", required=True, nargs="+")
    sp.add_argument("--data", required=True)
    sp.add_argument("--what", required=True, choices=("logits", "overlap", "split", "stability"))
    sp.add_argument("--reference", help="single-sentence records (stability)")
    sp.add_argument("--evaluated", help="records of the model to report per group (split)")
    sp.add_argument("--stopwords")

    sp = add("stats", cmd_stats, out_required=False)
    sp.add_argument("--data", required=True)
    return p


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"error: {args.command}: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
