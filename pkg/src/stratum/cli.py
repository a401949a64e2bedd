"""Command-line entry point: ``stratum <command> ...``.

Exit codes: 0 success, 1 domain/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, dump_config, load_config
from .data import SyntheticSpec, generate_synthetic, load_features, load_recording, save_features
from .errors import StratumError
from .experiment import METHODS, append_aggregate, atomic_write, predict_with, run_experiment
from .features import extract_position_features
from .kernels import KernelSpec
from .metrics import accuracy, confusion_matrix, f1_macro
from .sat import run_sat
from .sds import rank_sources_global, select_source

log = logging.getLogger("stratum")


class UsageError(Exception):
    pass


class StageError(StratumError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage} failed: {exc}")


def _require(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"input path does not exist: {p}")


def _config(args) -> RunConfig:
    _require(getattr(args, "config", None))
    cfg = load_config(getattr(args, "config", None))
    overrides = {}
    for flag, key in (
        ("window_seconds", "window_seconds"),
        ("overlap", "overlap_fraction"),
        ("label_rule", "label_rule"),
        ("m", "num_dims"),
        ("lam", "lam"),
        ("kernel", "kernel"),
        ("bandwidth", "bandwidth"),
        ("iters", "max_iterations"),
        ("voters", "voters"),
        ("annotator", "annotator"),
        ("seed", "seed"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_standardize", False):
        overrides["standardize"] = False
    return replace(cfg, **overrides).validate()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_labels(path) -> np.ndarray:
    """The ``label`` column of any canonical CSV (predictions, features, recordings)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "label" not in reader.fieldnames:
            raise StratumError(f"{path}: no 'label' column")
        out = []
        for row in reader:
            try:
                out.append(int(float(row["label"])))
            except ValueError:
                raise StratumError(f"{path}: line {reader.line_num}: bad label {row['label']!r}") from None
    return np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    _require(args.recording)
    cfg = _config(args)
    rec = load_recording(args.recording, args.channels, sample_rate=args.sample_rate, position_id=args.position)
    domain = extract_position_features(rec, cfg.windowing())
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_features(domain, out)
    meta = {
        "source": str(args.recording),
        "channels": list(args.channels),
        "sample_rate": rec.sample_rate,
        "window_seconds": cfg.window_seconds,
        "overlap_fraction": cfg.overlap_fraction,
        "label_rule": cfg.label_rule,
        "rows": domain.n,
        "columns": domain.dim,
    }
    atomic_write(out.with_name(out.name + ".meta.json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"rows={domain.n} columns={domain.dim}")
    return 0


def cmd_synth(args) -> int:
    cfg = _config(args)
    spec = SyntheticSpec(
        num_classes=args.classes,
        dim=args.dim,
        samples_per_class=args.samples,
        domain_shifts=tuple(args.shifts),
        noise_scale=args.noise,
        seed=cfg.seed,
        independent_noise=args.independent_noise,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, domain in enumerate(generate_synthetic(spec)):
        path = out / f"domain{k}.csv"
        save_features(domain, path)
        print(f"{path} rows={domain.n} columns={domain.dim}")
    return 0


def cmd_select_source(args) -> int:
    _require(args.target, *args.source)
    cfg = _config(args)
    target = load_features(args.target).unlabeled()
    sources = [load_features(p, position_id=Path(p).stem) for p in args.source]
    spec = cfg.sds_kernel_spec() if args.sds_kernel is None else KernelSpec(args.sds_kernel)
    gd = rank_sources_global(sources, target, spec, cfg.standardize)
    if args.distance == "global":
        ranking = gd
        sd_values = [None] * len(sources)
    else:
        ranking = select_source(sources, target, cfg.voter_configs(), spec, cfg.standardize)
        sd_values = list(ranking.distances)
    rows = []
    print(f"{'#':>3}  {'source':<30} {'SD':>14} {'GD':>14}")
    for i, path in enumerate(args.source):
        mark = "*" if i == ranking.selected else " "
        sd = "" if sd_values[i] is None else f"{sd_values[i]:.8g}"
        print(f"{i:>3}{mark} {Path(path).name:<30} {sd:>14} {gd.distances[i]:>14.8g}")
        rows.append({"index": i, "source": str(path), "sd": sd_values[i], "gd": gd.distances[i]})
    print(f"selected: {ranking.selected} ({args.source[ranking.selected]})")
    if args.report:
        report = {
            "distance": args.distance,
            "kernel": str(spec),
            "selected": ranking.selected,
            "ranking": ranking.order,
            "sources": rows,
            "seed": cfg.seed,
        }
        atomic_write(args.report, json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    return 0


def _transfer_one(job) -> str:
    target_path, source_path, method, cfg, out_dir = job
    stage = "loading"
    try:
        source = load_features(source_path, position_id=Path(source_path).stem)
        target = load_features(target_path, position_id=Path(target_path).stem)
        truth = target.labels
        stem = Path(target_path).stem
        out_dir = Path(out_dir)
        stage = method
        sat_cfg = cfg.sat_config()
        if method == "stl-sat":
            result = run_sat(source, target.unlabeled(), cfg.voter_configs(), sat_cfg, truth=truth)
            labels = result.labels
            trace = result.trace_rows()
            atomic_write(
                out_dir / f"{stem}.trace.csv",
                _csv_text(
                    ["iteration", "labels_changed", "objective", "accuracy"],
                    [[r["iteration"], r["labels_changed"], repr(r["objective"]), r["accuracy"]] for r in trace],
                ),
            )
        else:
            labels = predict_with(method, source, target.unlabeled(), sat_cfg, cfg.seed)
        stage = "writing"
        atomic_write(out_dir / f"{stem}.predictions.csv", _csv_text(["label"], [[int(v)] for v in labels]))
    except StratumError as exc:
        raise StageError(stage, exc) from exc
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(stage, exc) from exc
    return f"{target_path}: {len(labels)} labels -> {out_dir / (stem + '.predictions.csv')}"


def cmd_transfer(args) -> int:
    _require(args.source, *args.target)
    cfg = _config(args)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(t, args.source, args.method, cfg, args.out_dir) for t in args.target]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            messages = list(pool.map(_transfer_one, jobs))
    else:
        messages = [_transfer_one(j) for j in jobs]
    for msg in messages:
        print(msg)
    return 0


def _evaluate_one(job) -> dict:
    pred_path, truth, task, method, seed = job
    pred = _read_labels(pred_path)
    if pred.shape != truth.shape:
        raise StratumError(f"{pred_path}: {pred.size} predictions for {truth.size} ground-truth labels")
    M, classes = confusion_matrix(truth, pred)
    return {
        "task_id": task or Path(pred_path).stem,
        "method": method,
        "accuracy": accuracy(truth, pred),
        "f1_macro": f1_macro(truth, pred),
        "f1_averaging": "macro",
        "confusion": M.tolist(),
        "classes": classes,
        "seed": seed,
        "predictions": str(pred_path),
    }


def cmd_evaluate(args) -> int:
    _require(args.truth, *args.pred)
    truth = _read_labels(args.truth)
    jobs = [(p, truth, args.task, args.method, args.seed) for p in args.pred]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_evaluate_one, jobs))
    else:
        results = [_evaluate_one(j) for j in jobs]
    for res in results:
        print(f"{res['predictions']}: accuracy={res['accuracy']:.6f} f1_macro={res['f1_macro']:.6f}")
        width = max(len(str(c)) for c in res["classes"]) + 1
        print("confusion (rows=truth, cols=predicted):")
        print(" " * width + "".join(f"{c:>{width + 5}}" for c in res["classes"]))
        for c, row in zip(res["classes"], res["confusion"]):
            print(f"{c:>{width}}" + "".join(f"{v:>{width + 5}}" for v in row))
        if args.emit:
            with open(args.emit, "a", newline="") as fh:
                new = fh.tell() == 0
                w = csv.writer(fh, lineterminator="\n")
                if new:
                    w.writerow(["task", "method", "accuracy", "f1", "seed", "wall_time"])
                w.writerow(
                    [res["task_id"], res["method"], repr(res["accuracy"]), repr(res["f1_macro"]), res["seed"], ""]
                )
    if args.report:
        payload = results[0] if len(results) == 1 else results
        atomic_write(args.report, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    if args.synthetic is not None:
        from .benchmarks import TRANSFER_SAT, transfer_task

        source, target = transfer_task(args.synthetic)
        sat_cfg = cfg.sat_config()
        if args.m is None:
            sat_cfg = replace(sat_cfg, num_dims=TRANSFER_SAT.num_dims)
        task = f"synthetic-{args.synthetic}"
    else:
        if args.source is None or args.target is None:
            raise UsageError("give --source and --target, or --synthetic SEED")
        _require(args.source, args.target)
        source = load_features(args.source, position_id=Path(args.source).stem)
        target = load_features(args.target, position_id=Path(args.target).stem)
        if target.labels is None:
            raise StratumError("the target file needs a label column for scoring")
        sat_cfg = cfg.sat_config()
        task = f"{source.position_id}->{target.position_id}"
    out = Path(args.report_dir)
    out.mkdir(parents=True, exist_ok=True)
    for method in args.methods:
        report = run_experiment(source, target, method, sat_cfg, cfg.seed, task, timing=not args.no_timing)
        atomic_write(out / f"{task}.{method}.json", report.to_json())
        if args.emit:
            append_aggregate(args.emit, report)
        print(f"{task:<24} {method:<16} accuracy={report.accuracy:.4f} f1_macro={report.f1_macro:.4f}")
    return 0


def cmd_config(args) -> int:
    _require(args.config)
    cfg = _config(args)
    sys.stdout.write(dump_config(cfg))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="overrides the config file and $STRATUM_SEED")
    p.add_argument("--no-standardize", action="store_true", help="skip source-statistics z-scoring")


def _add_transfer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, help="embedding dimension (default 30)")
    p.add_argument("--lambda", dest="lam", type=float, help="regularization weight (default 1.0)")
    p.add_argument("--kernel", choices=["linear", "rbf"], help="transfer kernel (default linear)")
    p.add_argument("--bandwidth", help="rbf bandwidth or 'median-heuristic'")
    p.add_argument("--iters", type=int, help="maximum refinement iterations (default 10)")
    p.add_argument("--voters", help="e.g. knn:3,forest:30,svm:100")
    p.add_argument("--annotator", help="classifier for second annotation, e.g. knn:1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="windowed features from a recording CSV")
    p.add_argument("recording")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--channels", nargs="+", default=["acc", "gyro", "mag"])
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--position", default="")
    p.add_argument("--window-seconds", type=float)
    p.add_argument("--overlap", type=float)
    p.add_argument("--label-rule", choices=["majority-label", "center-label"])
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="write seeded synthetic domains as feature CSVs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--samples", type=int, default=60, help="samples per class")
    p.add_argument("--shifts", type=float, nargs="+", default=[0.0, 12.0])
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--independent-noise", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select-source", help="rank candidate sources for a target")
    p.add_argument("--target", required=True)
    p.add_argument("--source", nargs="+", required=True)
    p.add_argument("--distance", choices=["stratified", "global"], default="stratified")
    p.add_argument("--sds-kernel", choices=["linear", "rbf"])
    p.add_argument("--voters")
    p.add_argument("--report", help="JSON report path")
    _add_common(p)
    p.set_defaults(func=cmd_select_source)

    p = sub.add_parser("transfer", help="label target rows from a labeled source")
    p.add_argument("--source", required=True)
    p.add_argument("--target", nargs="+", required=True)
    p.add_argument("--method", choices=METHODS, default="stl-sat")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_transfer_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("evaluate", help="score prediction files against ground truth")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--emit", help="append an aggregate row to this CSV table")
    p.add_argument("--task", default="")
    p.add_argument("--method", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run methods end to end and write reports")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--synthetic", type=int, metavar="SEED", help="use the built-in 3-class shift task")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--report-dir", required=True)
    p.add_argument("--emit", help="aggregate CSV table")
    p.add_argument("--no-timing", action="store_true", help="record wall_time as 0 for byte-stable reports")
    _add_transfer_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("config", help="configuration utilities")
    csub = p.add_subparsers(dest="config_command", required=True)
    d = csub.add_parser("dump", help="print the effective configuration")
    _add_common(d)
    d.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"stratum: error: {exc}", file=sys.stderr)
        return 2
    except (StratumError, OSError, ValueError) as exc:
        print(f"stratum: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
