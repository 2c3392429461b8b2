"""
cli/commands.py
The five subcommands (train, transform, evaluate, sweep, report) and the
argument parser that dispatches to them.

Every command overwrites its outputs, so rerunning with the same config and
seed reproduces them.
"""

import argparse
import glob
import json
import os
import sys
import time
from collections import defaultdict
from typing import Dict, List, Optional, Sequence

import pandas as pd

from config.app_config import ABOUT_APP, APP_NAME, CODE_VERSION
from data.dataset import write_csv
from metrics.diagnostics import UPSTREAM
from metrics.report import FairnessReport, aggregate_reports
from metrics.tradeoff import TradeoffPoint, consistency_scores, hypervolume_2d, risk_spread, scale_fairness
from preprocess.trainer import TrainedPreprocessor, measure_constraints, train
from cli.experiment_config import ExperimentConfig
from cli.runner import RunResult, evaluate_baseline, evaluate_models, load_experiment_data, run_budgets
from utils.errors import FairPrepError, InputError
from utils.file_handler import read_json, write_json, write_table
from utils.logger import Logger, get_logger
from utils.path_utils import PathResolver

logger = get_logger(__name__)

BASELINE_METHOD = "original"
BUNDLE_DIR = "bundle"
REPORTS_DIR = "reports"
SWEEP_COLUMNS = (
    "method", "budget", "delta_x", "delta_y", "lambda_f", "run", "model",
    "auc", "sp", "eo", "ks_sp", "ks_eo", "hgr_hat", "loss", "mean_gap",
)
CONSISTENCY_METRICS = ("auc", "sp", "eo", "loss")


def _output_dir(config: ExperimentConfig, out: Optional[str]) -> str:
    directory = PathResolver.get_writable_path(out or config.output_dir)
    PathResolver.ensure_directory(directory)
    return directory


def _budget_of(pp_config) -> dict:
    delta_x = pp_config.delta_x
    return {
        "delta_x": list(delta_x) if isinstance(delta_x, tuple) else delta_x,
        "delta_y": pp_config.delta_y,
        "lambda_f": pp_config.lambda_f,
    }


def report_filename(method: str, budget: Optional[int], run: int, model: str) -> str:
    tag = "baseline" if budget is None else f"budget{budget}"
    return PathResolver.sanitize_filename(f"{method}_{tag}_run{run}_{model}.json")


def _write_reports(
    directory: str,
    method: str,
    budget_index: Optional[int],
    budget: Optional[dict],
    run: int,
    result: RunResult,
    config: dict,
) -> List[str]:
    paths = []
    for model, report in sorted(result.reports.items()):
        content = {
            "method": method,
            "budget": budget,
            "budget_index": budget_index,
            "run": run,
            "model": model,
            "report": report.to_dict(),
        }
        path = os.path.join(directory, report_filename(method, budget_index, run, model))
        paths.append(write_json(path, content, config))
    return paths


# ----------------------------------------------------------------------
# train / transform
# ----------------------------------------------------------------------
def cmd_train(config: ExperimentConfig, out: Optional[str] = None) -> str:
    """Train one preprocessor on run 0's training split and write its bundle."""
    directory = _output_dir(config, out)
    train_data, _ = load_experiment_data(config.dataset, 0)
    pp = train(train_data, config.preprocessor)
    return pp.save(os.path.join(directory, BUNDLE_DIR))


def cmd_transform(config: ExperimentConfig, bundle: str, out: Optional[str] = None) -> Dict[str, str]:
    """Apply a saved preprocessor to both splits and write D~ as CSV."""
    directory = _output_dir(config, out)
    pp = TrainedPreprocessor.load(bundle)
    train_data, test_data = load_experiment_data(config.dataset, 0)
    paths = {}
    constraints = {}
    for name, dataset in (("train", train_data), ("test", test_data)):
        path = os.path.join(directory, f"transformed_{name}.csv")
        write_csv(pp.transform(dataset), path)
        paths[name] = path
        constraints[name] = measure_constraints(pp, dataset).to_dict()
    paths["summary"] = write_json(
        os.path.join(directory, "transform.json"),
        {"bundle": bundle, "files": {k: os.path.basename(v) for k, v in paths.items()}, "constraints": constraints},
        config.to_dict(),
    )
    logger.info(f"Transformed data written to {directory}")
    return paths


# ----------------------------------------------------------------------
# evaluate / report
# ----------------------------------------------------------------------
def cmd_evaluate(config: ExperimentConfig, out: Optional[str] = None, bundle: Optional[str] = None) -> str:
    """Per-model reports for every run plus their mean +/- 2 SE.

    Without a bundle the identity transform is evaluated (the original-data baseline).
    """
    directory = _output_dir(config, out)
    reports_dir = os.path.join(directory, REPORTS_DIR)
    echo = config.to_dict()
    pp = TrainedPreprocessor.load(bundle) if bundle else None
    method = config.method if pp is not None else BASELINE_METHOD
    budget = _budget_of(pp.config) if pp is not None else None
    budget_index = 0 if pp is not None else None

    per_model = defaultdict(list)
    for run in range(config.runs):
        seed = config.preprocessor.seed + run
        train_data, test_data = load_experiment_data(config.dataset, run)
        if pp is None:
            result, _ = evaluate_baseline(train_data, test_data, config, seed)
        else:
            result = evaluate_models(pp, train_data, test_data, config, seed)
        _write_reports(reports_dir, method, budget_index, budget, run, result, echo)
        for model, report in result.reports.items():
            per_model[model].append(report)

    summary = {model: aggregate_reports(reports) for model, reports in sorted(per_model.items())}
    return write_json(
        os.path.join(directory, "summary.json"),
        {"method": method, "budget": budget, "runs": config.runs, "summary": summary},
        echo,
    )


def cmd_report(reports_dir: str, out: str) -> str:
    """Aggregate ``reports/*.json`` by (method, budget, model) into summary.json."""
    paths = sorted(glob.glob(os.path.join(reports_dir, "*.json")))
    if not paths:
        raise InputError(f"no report files found in '{reports_dir}'")
    groups = defaultdict(list)
    budgets = {}
    config = {}
    for path in paths:
        doc = read_json(path)
        if "report" not in doc:
            logger.warning(f"Skipping {path}: not a report file")
            continue
        config = config or doc.get("config", {})
        key = (doc.get("method"), json.dumps(doc.get("budget"), sort_keys=True), doc.get("model"))
        budgets[key] = doc.get("budget")
        groups[key].append(FairnessReport.from_dict(doc["report"]))
    if not groups:
        raise InputError(f"'{reports_dir}' holds no report documents")

    entries = [
        {
            "method": method,
            "budget": budgets[(method, budget_key, model)],
            "model": model,
            "runs": len(reports),
            "summary": aggregate_reports(reports),
        }
        for (method, budget_key, model), reports in sorted(groups.items(), key=lambda kv: tuple(map(str, kv[0])))
    ]
    PathResolver.ensure_directory(out)
    return write_json(os.path.join(out, "summary.json"), {"entries": entries}, config)


# ----------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------
def _sweep_row(method, budget_index, budget, run, model, report: FairnessReport) -> dict:
    row = {
        "method": method,
        "budget": budget_index,
        "delta_x": json.dumps(budget["delta_x"]),
        "delta_y": budget["delta_y"],
        "lambda_f": budget["lambda_f"],
        "run": run,
        "model": model,
    }
    row.update({name: getattr(report, name) for name in SWEEP_COLUMNS[7:]})
    return row


def _consistency_row(method, budget_index, run, result: RunResult) -> dict:
    """Spread of each metric across the downstream zoo (upstream excluded)."""
    downstream = [r for name, r in sorted(result.reports.items()) if name != UPSTREAM]
    row = {"method": method, "budget": budget_index, "run": run, "models": len(downstream)}
    for name in CONSISTENCY_METRICS:
        values = [getattr(r, name) for r in downstream if getattr(r, name) is not None]
        row[f"{name}_consistency"] = consistency_scores(values) if len(values) >= 2 else None
    losses = [r.loss for r in downstream]
    spread = risk_spread(losses)
    row.update({f"loss_{k}": v for k, v in spread.items()})
    return row


def hypervolume_table(sweep: pd.DataFrame) -> pd.DataFrame:
    """HV of (1 - AUC, scaled SP) and (1 - AUC, scaled EO) per (method, run, model).

    SP and EO are scaled by their largest value over the whole sweep; the caps are
    carried on every row.
    """
    frame = sweep.dropna(subset=["auc", "sp", "eo"]).copy()
    if frame.empty:
        return pd.DataFrame(columns=["method", "run", "model", "points", "hv_sp", "hv_eo", "sp_cap", "eo_cap"])
    sp_scaled, sp_cap = scale_fairness(frame["sp"].to_numpy())
    eo_scaled, eo_cap = scale_fairness(frame["eo"].to_numpy())
    frame["sp_scaled"] = sp_scaled
    frame["eo_scaled"] = eo_scaled
    rows = []
    for (method, run, model), group in frame.groupby(["method", "run", "model"], sort=True):
        hv = {}
        for metric in ("sp", "eo"):
            points = [
                TradeoffPoint(float(1.0 - r.auc), float(getattr(r, f"{metric}_scaled")), (method, r.budget, run))
                for r in group.itertuples()
            ]
            hv[metric] = hypervolume_2d(points)
        rows.append({
            "method": method,
            "run": run,
            "model": model,
            "points": len(group),
            "hv_sp": hv["sp"],
            "hv_eo": hv["eo"],
            "sp_cap": sp_cap,
            "eo_cap": eo_cap,
        })
    return pd.DataFrame(rows)


def cmd_sweep(config: ExperimentConfig, out: Optional[str] = None) -> Dict[str, str]:
    """Train one preprocessor per budget and run, evaluate the zoo on each.

    Writes sweep.csv (one row per method, budget, run and model, upstream
    included), hv.csv, consistency.csv, per-model reports, diagnostics and
    summary.json.
    """
    directory = _output_dir(config, out)
    reports_dir = os.path.join(directory, REPORTS_DIR)
    echo = config.to_dict()
    method = config.method

    sweep_rows, consistency_rows, diagnostics = [], [], []
    summaries = defaultdict(list)
    for run in range(config.runs):
        baseline, outcomes = run_budgets(config, run)
        _write_reports(reports_dir, BASELINE_METHOD, None, None, run, baseline, echo)
        for model, report in baseline.reports.items():
            summaries[(BASELINE_METHOD, -1, model)].append(report)
        for index, (budget, pp, result) in enumerate(outcomes):
            _write_reports(reports_dir, method, index, budget, run, result, echo)
            for model, report in sorted(result.reports.items()):
                sweep_rows.append(_sweep_row(method, index, budget, run, model, report))
                summaries[(method, index, model)].append(report)
            consistency_rows.append(_consistency_row(method, index, run, result))
            diagnostics.append({
                "budget": index,
                "run": run,
                "constraints": result.constraints,
                "multiplier_trace": pp.trace.multiplier_trace,
                "improvement": None if result.diagnostics is None else result.diagnostics.to_dict(),
            })

    sweep = pd.DataFrame(sweep_rows, columns=list(SWEEP_COLUMNS))
    paths = {
        "sweep": write_table(os.path.join(directory, "sweep.csv"), sweep, echo),
        "consistency": write_table(os.path.join(directory, "consistency.csv"), pd.DataFrame(consistency_rows), echo),
        "diagnostics": write_json(os.path.join(directory, "diagnostics.json"), {"entries": diagnostics}, echo),
    }
    hv = hypervolume_table(sweep)
    if hv.empty:
        logger.info("No AUC/SP/EO values in the sweep; hv.csv left empty")
    paths["hv"] = write_table(os.path.join(directory, "hv.csv"), hv, echo)

    entries = [
        {"method": m, "budget": None if b < 0 else b, "model": k, "runs": len(r), "summary": aggregate_reports(r)}
        for (m, b, k), r in sorted(summaries.items())
    ]
    paths["summary"] = write_json(os.path.join(directory, "summary.json"), {"entries": entries}, echo)
    logger.info(f"Sweep of {config.sweep.size} budget(s) x {config.runs} run(s) written to {directory}")
    return paths


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME.lower().replace(" ", "-"), description=ABOUT_APP)
    parser.add_argument("--version", action="version", version=CODE_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (default: the config's output_dir)")
        p.add_argument("--seed", type=int, help="overrides preprocessor.seed and dataset.seed")
        p.add_argument("--runs", type=int, help="overrides runs")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="patch the config, e.g. sweep.lambda_f=[1,4] (repeatable)",
        )
        return p

    common(sub.add_parser("train", help="train a preprocessor and write its bundle"))
    common(sub.add_parser("transform", help="write the transformed train/test data")).add_argument(
        "--bundle", required=True, help="bundle directory written by 'train'"
    )
    common(sub.add_parser("evaluate", help="evaluate the zoo on a bundle (or the original data)")).add_argument(
        "--bundle", help="bundle directory; omit to evaluate the original data"
    )
    common(sub.add_parser("sweep", help="train and evaluate every budget of the sweep"))
    report = sub.add_parser("report", help="aggregate report files into summary.json")
    report.add_argument("--reports", required=True, help="directory of report JSON files")
    report.add_argument("--out", required=True, help="directory for summary.json")
    return parser


def _load_config(args) -> ExperimentConfig:
    overrides = list(args.override)
    if args.seed is not None:
        overrides += [f"preprocessor.seed={args.seed}", f"dataset.seed={args.seed}"]
    if args.runs is not None:
        overrides.append(f"runs={args.runs}")
    return ExperimentConfig.load(args.config, overrides)


def _dispatch(args) -> None:
    if args.command == "report":
        cmd_report(args.reports, args.out)
        return
    config = _load_config(args)
    if args.command == "train":
        cmd_train(config, args.out)
    elif args.command == "transform":
        cmd_transform(config, args.bundle, args.out)
    elif args.command == "evaluate":
        cmd_evaluate(config, args.out, args.bundle)
    elif args.command == "sweep":
        cmd_sweep(config, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    app_logger = Logger()
    app_logger.log_run_start(args.command, getattr(args, "config", None) or getattr(args, "reports", None))
    start = time.time()
    try:
        _dispatch(args)
    except FairPrepError as e:
        app_logger.log_error(str(e))
        print(f"error: {e}", file=sys.stderr)
        app_logger.log_run_finish(args.command, False, time.time() - start)
        return 1
    except Exception as e:
        app_logger.log_exception(e)
        print(f"unexpected error: {e}", file=sys.stderr)
        app_logger.log_run_finish(args.command, False, time.time() - start)
        return 3
    app_logger.log_run_finish(args.command, True, time.time() - start)
    return 0
