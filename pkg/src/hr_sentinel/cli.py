"""``hr-sentinel`` command line: gen-data, prepare, train, grid-search, eval, stream."""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path
from typing import Sequence

from hr_sentinel import metrics, synth
from hr_sentinel.config import ConfigError, RunConfig
from hr_sentinel.estimator import CheckpointError, grid_search, load_model, save_model, train
from hr_sentinel.ingest import IngestError, LagSearchError, parse_series, synchronize_with_counts, write_synced
from hr_sentinel.stream import SKIP, STRICT, line_sink, run_stream
from hr_sentinel.windowing import TEST, TRAIN, DatasetFormatError, load_dataset, save_dataset, split_by_subject

logger = logging.getLogger("hr_sentinel")

_PAIR = re.compile(r"^(?P<sid>.+)_(?P<sensor>ppg|ecg)\.csv$")


def _err(msg: str) -> None:
    print(f"hr-sentinel: {msg}", file=sys.stderr)


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.set("synth.seed", str(args.seed))
        cfg.set("estimator.seed", str(args.seed))
    if args.tau_a is not None:
        cfg.set("filter.tau_a", str(args.tau_a))
    if args.tau_b is not None:
        cfg.set("filter.tau_b", str(args.tau_b))
    if args.taus is not None:
        cfg.set("eval.taus", args.taus)
    if args.train_fraction is not None:
        cfg.set("split.train_fraction", str(args.train_fraction))
    if args.policy is not None:
        cfg.set("stream.policy", args.policy)
    for key in ("subjects", "duration"):
        value = getattr(args, key, None)
        if value is not None:
            cfg.set({"subjects": "synth.n_subjects", "duration": "synth.duration_s"}[key], str(value))
    max_epochs = getattr(args, "max_epochs", None)
    if max_epochs is not None and args.command == "train":
        cfg.set("estimator.max_epochs", str(max_epochs))
    cfg.validate()
    return cfg


def cmd_gen_data(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = Path(args.out)
    try:
        subjects = synth.generate(cfg.synth, out)
    except OSError as exc:
        _err(f"cannot write to {out}: {exc}")
        return 1
    for s in subjects:
        print(
            f"{s.subject_id}: {out / (s.subject_id + '_ppg.csv')} {out / (s.subject_id + '_ecg.csv')} "
            f"lag={s.lag_s:+d}s bursts={len(s.bursts)}"
        )
    return 0


def discover_pairs(raw_dir: Path) -> dict[str, dict[str, Path]]:
    pairs: dict[str, dict[str, Path]] = {}
    for path in sorted(raw_dir.glob("*.csv")):
        m = _PAIR.match(path.name)
        if m:
            pairs.setdefault(m["sid"], {})[m["sensor"]] = path
    return pairs


def cmd_prepare(args: argparse.Namespace, cfg: RunConfig) -> int:
    raw = Path(args.raw)
    pairs = discover_pairs(raw)
    strict = cfg.stream.policy == STRICT
    synced, failures = [], 0
    synced_dir = Path(args.synced_dir) if args.synced_dir else None
    if synced_dir:
        synced_dir.mkdir(parents=True, exist_ok=True)
    for sid, files in pairs.items():
        if set(files) != {"ppg", "ecg"}:
            _err(f"{sid}: missing {'ppg' if 'ppg' not in files else 'ecg'} file")
            failures += 1
            continue
        try:
            ppg = parse_series(files["ppg"], "ppg", sid)
            ecg = parse_series(files["ecg"], "ecg", sid)
            series, counts = synchronize_with_counts(ppg, ecg, cfg.ingest)
        except (IngestError, LagSearchError, ValueError) as exc:
            _err(f"{sid}: {exc}")
            failures += 1
            continue
        if synced_dir:
            write_synced(series, synced_dir / f"{sid}_synced.csv", counts)
        synced.append(series)
    if failures and strict:
        _err(f"{failures} subject(s) failed; aborting (use --skip-errors to continue)")
        return 1
    try:
        ds = split_by_subject(synced, cfg.split.train_fraction, cfg.window)
    except ValueError as exc:
        _err(str(exc))
        return 1
    save_dataset(ds, args.out)
    per_subject = ds.counts_by_subject()
    lags = {s.subject_id: s.applied_lag_s for s in synced}
    for sid in ds.subjects:
        print(f"{sid}: split={ds.split_manifest[sid]} windows={per_subject[sid]} lag={lags[sid]:+d}s")
    n_train = sum(per_subject[s] for s in ds.subjects_in(TRAIN))
    n_test = sum(per_subject[s] for s in ds.subjects_in(TEST))
    print(
        f"train: {len(ds.subjects_in(TRAIN))} subjects, {n_train} windows; "
        f"test: {len(ds.subjects_in(TEST))} subjects, {n_test} windows"
    )
    return 1 if failures and strict else 0


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    ds = load_dataset(args.dataset)
    model, log = train(ds, cfg.estimator)
    save_model(model, args.out)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.csv")
    log.write_csv(log_path)
    print(
        f"epochs={len(log.epochs)} best_epoch={log.best_epoch} "
        f"best_val_loss={model.metadata['best_validation_loss']:.4f} model={args.out} log={log_path}"
    )
    return 0


def _parse_grid(items: Sequence[str]) -> dict[str, list]:
    scratch = RunConfig()
    grid: dict[str, list] = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep:
            raise ConfigError(f"grid entry {item!r} must look like key=v1|v2")
        parsed = []
        for raw in values.split("|"):
            scratch.set(f"estimator.{key.strip()}", raw)
            parsed.append(scratch.values["estimator"][key.strip()])
        grid[key.strip()] = parsed
    return grid


def cmd_grid_search(args: argparse.Namespace, cfg: RunConfig) -> int:
    ds = load_dataset(args.dataset)
    grid = _parse_grid(args.grid)
    result = grid_search(ds, cfg.estimator, grid, max_cells=args.max_cells, max_epochs=args.max_epochs)
    save_model(result.best_model, args.out)
    Path(str(args.out) + ".grid.csv").write_text(result.to_csv(), encoding="utf-8")
    sys.stdout.write(result.to_csv())
    best = next(c for c in result.cells if c.config == result.best_config)
    print(f"best cell #{best.index} {best.overrides} val_loss={best.validation_loss:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    ds = load_dataset(args.dataset)
    test = ds.split(TEST)
    if len(test) == 0:
        _err("test split has no windows")
        return 1
    model = metrics.OraclePredictor() if args.oracle else load_model(args.model)
    ev = cfg.eval
    rows = metrics.threshold_sweep(model, test, ev.taus)
    grid = metrics.tolerance_table(model, test, ev.gt_thresholds, ev.tolerances)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "threshold_sweep.csv").write_text(metrics.sweep_csv(rows), encoding="utf-8")
    (out / "threshold_sweep.txt").write_text(metrics.sweep_text(rows), encoding="utf-8")
    (out / "tolerance_table.csv").write_text(metrics.tolerance_csv(grid), encoding="utf-8")
    (out / "tolerance_table.txt").write_text(metrics.tolerance_text(grid), encoding="utf-8")
    extra = {"n_test_windows": len(test), "predictor": "oracle" if args.oracle else Path(args.model).name}
    doc = metrics.report_json(rows, grid, extra)
    (out / "report.json").write_text(doc, encoding="utf-8")
    if args.json:
        sys.stdout.write(doc)
    else:
        sys.stdout.write(metrics.sweep_text(rows) + "\n" + metrics.tolerance_text(grid))
    return 0


def cmd_stream(args: argparse.Namespace, cfg: RunConfig) -> int:
    model = load_model(args.model)
    sc = cfg.stream
    human = args.human
    if not human:
        print("timestamp,hr_bpm,diff_pred,label", flush=True)
    sink = line_sink(sys.stdout, human=human)
    if args.input in (None, "-"):
        summary = run_stream(sys.stdin, sink, model, cfg.thresholds, sc.policy, sc.gap_reset_s)
    else:
        with open(args.input, encoding="utf-8", newline="") as fh:
            summary = run_stream(fh, sink, model, cfg.thresholds, sc.policy, sc.gap_reset_s)
    print(json.dumps(summary.as_dict(), sort_keys=True), file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--tau-a", type=float, dest="tau_a")
    common.add_argument("--tau-b", type=float, dest="tau_b")
    common.add_argument("--taus", help="comma-separated threshold list for eval")
    common.add_argument("--train-fraction", type=float, dest="train_fraction")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="policy", action="store_const", const=STRICT)
    mode.add_argument("--skip-errors", dest="policy", action="store_const", const=SKIP)
    common.add_argument("--json", action="store_true", help="emit structured output")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="hr-sentinel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write synthetic PPG/ECG subjects")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int)
    p.add_argument("--duration", type=int, help="seconds per subject")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("prepare", parents=[common], help="align raw CSVs into a windowed dataset")
    p.add_argument("--raw", required=True, help="directory of <subject>_ppg.csv / <subject>_ecg.csv")
    p.add_argument("--out", required=True, help="dataset file")
    p.add_argument("--synced-dir", help="also write synchronized series here")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train the error estimator")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model checkpoint")
    p.add_argument("--log", help="training log CSV (default <out>.log.csv)")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", parents=[common], help="search estimator hyperparameters")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", action="append", required=True, help="key=v1|v2, repeatable")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--max-cells", type=int, default=64, dest="max_cells")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("eval", parents=[common], help="threshold sweep and tolerance table")
    p.add_argument("--model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--oracle", action="store_true", help="use diff_true as the prediction (harness check)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", parents=[common], help="label a live HR stream")
    p.add_argument("--model", required=True)
    p.add_argument("--input", help="ingest-format CSV, '-' for stdin (default)")
    p.add_argument("--human", action="store_true", help="colour-coded text instead of CSV lines")
    p.set_defaults(func=cmd_stream)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "eval" and not args.oracle and not args.model:
        parser.error("eval needs --model or --oracle")
    try:
        cfg = _run_config(args)
        return args.func(args, cfg)
    except BrokenPipeError:
        # downstream reader went away (e.g. `| head`)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (ConfigError, CheckpointError, DatasetFormatError, IngestError, LagSearchError) as exc:
        _err(str(exc))
        return 1
    except FileNotFoundError as exc:
        _err(f"{exc.filename}: no such file")
        return 1
    except ValueError as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
