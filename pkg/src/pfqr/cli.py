"""Command-line entry point.

Subcommands:

* ``simulate --config cfg.json --out DIR [--threads N] [--seed S]``
  runs a benchmark campaign and writes report.csv, report.txt, and one
  SVG chart per (design, metric).
* ``fit --config task.json --out DIR`` fits one model from CSV data and
  writes model.json plus the coefficient function as gamma.csv.
* ``predict --model model.json --curves curves.csv --out pred.csv``.
* ``report --in DIR`` re-renders report.txt and charts from report.csv.

Exit codes: 0 ok, 2 configuration/schema problem, 3 benchmark finished
with failed cells (report still written), 4 grid/dimension mismatch.
The PFQR_THREADS environment variable overrides --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch, GridMismatch, PfqrError
from .evalbench import (
    METHOD_NAMES,
    BenchmarkConfig,
    CsvTask,
    report_charts,
    reports_from_csv,
    reports_to_csv,
    reports_to_text,
    run_campaign,
)
from .extract import ExtractionConfig, fpc_extraction, run_extraction
from .fgrid import FunctionalSample
from .ioutil import (
    atomic_write_text,
    curves_csv_text,
    matrix_csv_text,
    read_column_csv,
    read_curves_csv,
    read_matrix_csv,
)
from .model import (
    fit_model,
    model_from_json,
    model_to_json,
    point_predictions,
    predict,
)
from .qsolve import CheckLossSpec
from .simgen import Sim1Design, Sim2Design

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_MISMATCH = 4


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top-level JSON object expected")
    return doc


def _as_list(v) -> list:
    return v if isinstance(v, list) else [v]


def _expand_designs(doc: dict) -> list:
    kind = doc.get("kind")
    if kind == "sim1":
        return [
            Sim1Design(n=int(n), error=str(err))
            for n in _as_list(doc.get("n", 100))
            for err in _as_list(doc.get("error", "gaussian"))
        ]
    if kind == "sim2":
        designs = []
        for case in _as_list(doc.get("case", "i")):
            for err in _as_list(doc.get("error", "gaussian")):
                designs.append(
                    Sim2Design(
                        case=str(case),
                        n=int(doc.get("n", 400)),
                        error=str(err),
                        source_path=doc.get("source_path"),
                        source_seed=doc.get("source_seed", 2024),
                        scale_multiplier=float(
                            doc.get("scale_multiplier", np.sqrt(5.0))
                        ),
                    )
                )
        return designs
    if kind == "csv":
        for key in ("curves", "responses"):
            if key not in doc:
                raise ConfigError(f"csv design needs a {key!r} path")
        return [
            CsvTask(
                curves_path=doc["curves"],
                responses_path=doc["responses"],
                responses_column=doc.get("responses_column"),
                scalars_path=doc.get("scalars"),
                holdout_fraction=float(doc.get("holdout_fraction", 0.25)),
            )
        ]
    raise ConfigError(f"design.kind must be sim1, sim2, or csv (got {kind!r})")


def _benchmark_configs(doc: dict, threads: int, seed_override) -> list[BenchmarkConfig]:
    if "design" not in doc:
        raise ConfigError("config needs a 'design' object")
    try:
        designs = _expand_designs(doc["design"])
        seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)
        return [
            BenchmarkConfig(
                design=d,
                methods=tuple(doc.get("methods", list(METHOD_NAMES))),
                k_values=tuple(doc.get("k_values", [1, 2, 3])),
                replications=int(doc.get("replications", 100)),
                tau=float(doc.get("tau", 0.5)),
                cqr_levels=tuple(
                    doc.get("cqr_levels", [l / 10 for l in range(1, 10)])
                ),
                seed=seed,
                threads=threads,
                mse_modes=tuple(
                    doc.get("mse_modes", ["in-sample", "out-of-sample"])
                ),
                cqr_pick=str(doc.get("cqr_pick", "median")),
            )
            for d in designs
        ]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from None


def _write_reports(reports, outdir: Path, timings: bool):
    atomic_write_text(outdir / "report.csv", reports_to_csv(reports))
    atomic_write_text(outdir / "report.txt", reports_to_text(reports))
    for name, svg in report_charts(reports).items():
        atomic_write_text(outdir / name, svg)
    if timings:
        lines = ["design,method,k,wall_seconds"]
        for rep in reports:
            for c in rep.cells:
                lines.append(f"{rep.label},{c.method},{c.k},{c.wall:.3f}")
        atomic_write_text(outdir / "timings.csv", "\n".join(lines) + "\n")


def cmd_simulate(args) -> int:
    doc = _load_json(args.config)
    threads = int(os.environ.get("PFQR_THREADS", args.threads))
    configs = _benchmark_configs(doc, threads, args.seed)
    reports = run_campaign(configs)
    outdir = Path(args.out)
    _write_reports(reports, outdir, args.timings)
    failures = sum(c.failures for rep in reports for c in rep.cells)
    if failures:
        print(f"completed with {failures} failed cells; see {outdir / 'report.txt'}")
        return EXIT_PARTIAL
    print(f"report written to {outdir}")
    return EXIT_OK


def _loss_from_task(doc: dict) -> CheckLossSpec:
    method = doc.get("method", "pqr")
    tau = float(doc.get("tau", 0.5))
    levels = doc.get("levels", [l / 10 for l in range(1, 10)])
    if method in ("fpc", "pls"):
        kind = doc.get("loss", "ls")
    elif method == "pqr":
        kind = doc.get("loss", "qr")
    elif method == "pcqr":
        kind = doc.get("loss", "cqr")
    else:
        raise ConfigError(f"unknown method {method!r}")
    if kind == "ls":
        return CheckLossSpec.ls()
    if kind == "qr":
        return CheckLossSpec.qr(tau)
    if kind == "cqr":
        return CheckLossSpec.cqr(levels)
    raise ConfigError(f"unknown loss {kind!r}")


def _load_fit_sample(doc: dict) -> FunctionalSample:
    for key in ("curves", "responses"):
        if key not in doc:
            raise ConfigError(f"fit task needs a {key!r} path")
    grid, curves = read_curves_csv(doc["curves"])
    y = read_column_csv(doc["responses"], doc.get("responses_column"))
    scalars = None
    if doc.get("scalars"):
        _, scalars = read_matrix_csv(doc["scalars"])
    try:
        return FunctionalSample(grid=grid, curves=curves, scalars=scalars, responses=y)
    except (DimensionMismatch, GridMismatch):
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None


def cmd_fit(args) -> int:
    doc = _load_json(args.config)
    sample = _load_fit_sample(doc)
    method = doc.get("method", "pqr")
    loss = _loss_from_task(doc)
    kspec = doc.get("k", 2)
    seed = int(doc.get("seed", 0))
    if method == "fpc":
        if isinstance(kspec, dict):
            raise ConfigError("selection rules apply to extraction methods only")
        ext = fpc_extraction(sample, int(kspec))
    else:
        ext_loss = loss if loss.kind != "ls" else CheckLossSpec.ls()
        if isinstance(kspec, dict):
            rule = kspec.get("rule", "cv")
            cfg = ExtractionConfig(
                method=method,
                loss=ext_loss,
                k_max=int(kspec.get("k_max", 5)),
                stop=rule,
                cv_folds=int(kspec.get("folds", 5)),
                seed=seed,
            )
        else:
            cfg = ExtractionConfig(method=method, loss=ext_loss, k_max=int(kspec))
        ext = run_extraction(sample, cfg)
    fit = fit_model(sample, ext, loss)
    outdir = Path(args.out)
    atomic_write_text(outdir / "model.json", model_to_json(fit) + "\n")
    atomic_write_text(
        outdir / "gamma.csv", curves_csv_text(fit.grid, fit.gamma_fn[None, :])
    )
    fitted = point_predictions(fit, sample)
    atomic_write_text(
        outdir / "fitted.csv", matrix_csv_text(["pred"], fitted[:, None])
    )
    print(f"model written to {outdir / 'model.json'} (K={fit.k})")
    return EXIT_OK


def cmd_predict(args) -> int:
    p = Path(args.model)
    if not p.exists():
        raise ConfigError(f"model file not found: {p}")
    fit = model_from_json(p.read_text(encoding="utf-8"))
    grid, curves = read_curves_csv(args.curves)
    scalars = None
    if args.scalars:
        _, scalars = read_matrix_csv(args.scalars)
    if grid.m != fit.grid.m or not fit.grid.matches(grid):
        raise GridMismatch(
            f"model grid has {fit.grid.m} points, curves have {grid.m}"
        )
    sample = FunctionalSample(grid=grid, curves=curves, scalars=scalars)
    preds = predict(fit, sample)
    point = point_predictions(fit, sample)
    if preds.ndim == 2:
        names = ["pred"] + [f"pred_tau{t:g}" for t in fit.loss.levels]
        table = np.column_stack([point, preds])
    else:
        names, table = ["pred"], point[:, None]
    atomic_write_text(Path(args.out), matrix_csv_text(names, table))
    print(f"predictions written to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    indir = Path(getattr(args, "in"))
    csv_path = indir / "report.csv"
    if not csv_path.exists():
        raise ConfigError(f"no report.csv in {indir}")
    reports = reports_from_csv(csv_path.read_text(encoding="utf-8"))
    _write_reports(reports, indir, timings=False)
    print(f"re-rendered report in {indir}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pfqr",
        description="Partial functional linear quantile regression toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a benchmark campaign")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--timings", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit one model from CSV data")
    fit.add_argument("--config", required=True)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    prd = sub.add_parser("predict", help="predict from a saved model")
    prd.add_argument("--model", required=True)
    prd.add_argument("--curves", required=True)
    prd.add_argument("--scalars", default=None)
    prd.add_argument("--out", required=True)
    prd.set_defaults(func=cmd_predict)

    rep = sub.add_parser("report", help="re-render tables and charts")
    rep.add_argument("--in", required=True)
    rep.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridMismatch, DimensionMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except PfqrError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def run():  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
