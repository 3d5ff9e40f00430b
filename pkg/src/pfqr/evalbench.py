"""Monte-Carlo benchmark harness.

Runs S independent replications of a simulation design, fits every
requested (method, basis-count) pair on each replication, and aggregates
the coefficient-function error decomposition plus in/out-of-sample
prediction error.  Replications use disjoint seed streams derived as
(master_seed, replication_index, role) where role 0 is the training set
and role 1 the test set; aggregation folds results in replication order,
so reports are identical at any parallelism degree.

The squared-error decomposition is computed on the grid-normalized
representation of the coefficient functions (values scaled by sqrt(dt)),
so the plain sums over grid points below approximate the integrated
squared error; this keeps the magnitudes on the scale of the function
space rather than growing with grid resolution.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .errors import ConfigError, PfqrError
from .extract import (
    FPC,
    PCQR,
    PLS,
    PQR,
    ExtractionConfig,
    ExtractionResult,
    fpc_extraction,
    run_extraction,
)
from .fgrid import FunctionalSample
from .ioutil import read_column_csv, read_curves_csv, read_matrix_csv
from .model import fit_model, point_predictions
from .qsolve import CheckLossSpec
from .simgen import Sim1Design, Sim2Design, SimData, gen_sim1, gen_sim2
from .svgplot import line_chart

METHOD_NAMES = ("fpc", "qr_fpc", "cqr_fpc", "pls", "pqr", "pcqr")

IN_SAMPLE = "in-sample"
OUT_OF_SAMPLE = "out-of-sample"

OVERFLOW_LIMIT = 100.0


@dataclass
class CsvTask:
    """External data task: curves + responses from CSV, optional scalar
    covariates; a deterministic holdout split stands in for a test set.
    No ground-truth coefficient function, so only prediction error is
    reported."""

    curves_path: str
    responses_path: str
    responses_column: str | None = None
    scalars_path: str | None = None
    holdout_fraction: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must be in [0, 1)")


@dataclass
class BenchmarkConfig:
    design: object  # Sim1Design | Sim2Design | CsvTask
    methods: tuple[str, ...] = METHOD_NAMES
    k_values: tuple[int, ...] = (1, 2, 3)
    replications: int = 100
    tau: float = 0.5
    cqr_levels: tuple[float, ...] = tuple(l / 10.0 for l in range(1, 10))
    seed: int = 0
    threads: int = 1
    mse_modes: tuple[str, ...] = (IN_SAMPLE, OUT_OF_SAMPLE)
    cqr_pick: str = "median"

    def __post_init__(self):
        if not isinstance(self.design, (Sim1Design, Sim2Design, CsvTask)):
            raise ConfigError("design must be Sim1Design, Sim2Design, or CsvTask")
        self.methods = tuple(self.methods)
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise ConfigError(f"unknown method {m!r}")
        self.k_values = tuple(int(k) for k in self.k_values)
        if not self.k_values or any(k < 0 for k in self.k_values):
            raise ConfigError("k_values must be nonempty and nonnegative")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if isinstance(self.design, CsvTask) and self.replications != 1:
            raise ConfigError("CSV tasks are deterministic; use replications=1")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError("tau must be in (0, 1)")
        self.cqr_levels = tuple(float(t) for t in self.cqr_levels)
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for mode in self.mse_modes:
            if mode not in (IN_SAMPLE, OUT_OF_SAMPLE):
                raise ConfigError(f"unknown mse mode {mode!r}")


@dataclass
class EvalCell:
    method: str
    k: int
    bias2: float
    var: float
    mise: float
    mse_in: float
    mse_out: float
    reps: int
    failures: int
    wall: float = 0.0


@dataclass
class EvalReport:
    design_kind: str
    n: int
    error_law: str | None
    case: str | None
    seed: int
    replications: int
    backend: str
    cells: list[EvalCell] = field(default_factory=list)

    @property
    def label(self) -> str:
        bits = [self.design_kind, f"n={self.n}"]
        if self.error_law:
            bits.append(self.error_law)
        if self.case:
            bits.append(f"case={self.case}")
        return "[" + ",".join(bits) + "]"

    def cell(self, method: str, k: int) -> EvalCell:
        for c in self.cells:
            if c.method == method and c.k == k:
                return c
        raise KeyError(f"no cell for ({method}, {k})")


def method_losses(
    name: str, tau: float, levels: tuple[float, ...]
) -> tuple[str, CheckLossSpec]:
    """Map a benchmark method name to (basis route, model loss)."""
    if name == "fpc":
        return FPC, CheckLossSpec.ls()
    if name == "qr_fpc":
        return FPC, CheckLossSpec.qr(tau)
    if name == "cqr_fpc":
        return FPC, CheckLossSpec.cqr(levels)
    if name == "pls":
        return PLS, CheckLossSpec.ls()
    if name == "pqr":
        return PQR, CheckLossSpec.qr(tau)
    if name == "pcqr":
        return PCQR, CheckLossSpec.cqr(levels)
    raise ConfigError(f"unknown method {name!r}")


def mise_decomposition(
    gamma_hats: np.ndarray, gamma_true: np.ndarray
) -> tuple[float, float, float]:
    """Grid-summed error decomposition across replications.

    bias2 = sum_j (mean_s gh[s, j] - g[j])^2,
    var   = (1/S) sum_s sum_j (gh[s, j] - mean_s gh[s, j])^2,
    mise  = (1/S) sum_s sum_j (gh[s, j] - g[j])^2  (= bias2 + var).
    """
    gh = np.atleast_2d(np.asarray(gamma_hats, dtype=float))
    g = np.asarray(gamma_true, dtype=float)
    S = gh.shape[0]
    mean = gh.mean(axis=0)
    bias2 = float(np.sum((mean - g) ** 2))
    var = float(np.sum((gh - mean) ** 2)) / S
    mise = float(np.sum((gh - g) ** 2)) / S
    return bias2, var, mise


def _gen(design, seed) -> SimData:
    if isinstance(design, Sim1Design):
        return gen_sim1(replace(design, seed=seed))
    if isinstance(design, Sim2Design):
        return gen_sim2(replace(design, seed=seed))
    raise TypeError("not a generative design")


def _extract_for(
    route: str, sample: FunctionalSample, k_max: int, config: BenchmarkConfig
) -> ExtractionResult:
    cap = min(sample.n - 1, sample.grid.m)
    if k_max > cap:
        raise ConfigError(f"k={k_max} exceeds min(n-1, m)={cap}")
    if route == FPC:
        return fpc_extraction(sample, k_max)
    if route == PQR:
        loss = CheckLossSpec.qr(config.tau)
    elif route == PCQR:
        loss = CheckLossSpec.cqr(config.cqr_levels)
    else:
        loss = CheckLossSpec.ls()
    return run_extraction(
        sample, ExtractionConfig(method=route, loss=loss, k_max=k_max)
    )


def _replicate(config: BenchmarkConfig, rep: int) -> dict:
    """One replication: per (method, k) the fitted coefficient function
    and prediction errors.  Failures are recorded, never raised."""
    train = _gen(config.design, (config.seed, rep, 0))
    test = None
    if OUT_OF_SAMPLE in config.mse_modes:
        test = _gen(config.design, (config.seed, rep, 1))
    m = train.sample.grid.m
    # extract as deep as the sample allows; cells beyond that fail per-K
    k_max = min(max(config.k_values), train.sample.n - 1, m)
    out: dict = {}
    for name in config.methods:
        route, loss = method_losses(name, config.tau, config.cqr_levels)
        t0 = time.perf_counter()
        gammas = np.full((len(config.k_values), m), np.nan)
        mse_in = np.full(len(config.k_values), np.nan)
        mse_out = np.full(len(config.k_values), np.nan)
        fail = np.zeros(len(config.k_values), dtype=bool)
        try:
            ext = _extract_for(route, train.sample, k_max, config)
        except PfqrError:
            ext = None
        for i, k in enumerate(config.k_values):
            if ext is None or k > ext.k:
                fail[i] = True
                continue
            try:
                fit = fit_model(train.sample, ext.truncated(k), loss)
                gammas[i] = fit.gamma_fn
                if IN_SAMPLE in config.mse_modes:
                    pred = point_predictions(fit, train.sample, config.cqr_pick)
                    r = train.sample.responses - pred
                    mse_in[i] = float(r @ r) / r.size
                if test is not None:
                    pred = point_predictions(fit, test.sample, config.cqr_pick)
                    r = test.sample.responses - pred
                    mse_out[i] = float(r @ r) / r.size
            except PfqrError:
                fail[i] = True
        out[name] = {
            "gamma": gammas,
            "mse_in": mse_in,
            "mse_out": mse_out,
            "fail": fail,
            "wall": time.perf_counter() - t0,
        }
    return out


def _replicate_star(args) -> dict:
    return _replicate(*args)


def run_benchmark(config: BenchmarkConfig) -> EvalReport:
    """Full campaign for one design; deterministic given the master seed
    and independent of the parallelism degree."""
    if isinstance(config.design, CsvTask):
        return _run_csv_task(config)

    jobs = [(config, rep) for rep in range(config.replications)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_replicate_star, jobs, chunksize=1))
    else:
        results = [_replicate(config, rep) for rep in range(config.replications)]

    truth = _gen(config.design, (config.seed, 0, 0))
    gamma_true = truth.gamma_true
    dt = truth.sample.grid.dt
    scale = math.sqrt(dt)

    report = _report_shell(config)
    for name in config.methods:
        walls = sum(r[name]["wall"] for r in results)
        for i, k in enumerate(config.k_values):
            ok = [r[name] for r in results if not r[name]["fail"][i]]
            failures = config.replications - len(ok)
            if ok:
                gh = np.vstack([r["gamma"][i] for r in ok]) * scale
                bias2, var, mise = mise_decomposition(gh, gamma_true * scale)
                mi = float(np.mean([r["mse_in"][i] for r in ok]))
                mo = float(np.mean([r["mse_out"][i] for r in ok]))
            else:
                bias2 = var = mise = mi = mo = float("nan")
            report.cells.append(
                EvalCell(
                    method=name,
                    k=k,
                    bias2=bias2,
                    var=var,
                    mise=mise,
                    mse_in=mi,
                    mse_out=mo,
                    reps=len(ok),
                    failures=failures,
                    wall=walls,
                )
            )
    return report


def _report_shell(config: BenchmarkConfig) -> EvalReport:
    d = config.design
    if isinstance(d, Sim1Design):
        kind, n, law, case = "sim1", d.n, d.error, None
    elif isinstance(d, Sim2Design):
        kind, n, law, case = "sim2", d.n, d.error, d.case
    else:
        kind, n, law, case = "csv", -1, None, None
    return EvalReport(
        design_kind=kind,
        n=n,
        error_law=law,
        case=case,
        seed=config.seed,
        replications=config.replications,
        backend=_backend.backend_name(),
    )


def _run_csv_task(config: BenchmarkConfig) -> EvalReport:
    task: CsvTask = config.design
    grid, curves = read_curves_csv(task.curves_path)
    y = read_column_csv(task.responses_path, task.responses_column)
    scalars = None
    if task.scalars_path:
        _, scalars = read_matrix_csv(task.scalars_path)
    n = curves.shape[0]
    if y.size != n:
        raise ConfigError(
            f"curves have {n} rows but responses have {y.size}"
        )
    rng = np.random.default_rng([config.seed, 0xC5])
    perm = rng.permutation(n)
    n_hold = int(round(task.holdout_fraction * n))
    hold, keep = perm[:n_hold], perm[n_hold:]
    train = FunctionalSample(
        grid=grid,
        curves=curves[keep],
        scalars=None if scalars is None else scalars[keep],
        responses=y[keep],
    )
    test = None
    if n_hold and OUT_OF_SAMPLE in config.mse_modes:
        test = FunctionalSample(
            grid=grid,
            curves=curves[hold],
            scalars=None if scalars is None else scalars[hold],
            responses=y[hold],
        )

    report = _report_shell(config)
    report.n = n
    k_max = min(max(config.k_values), train.n - 1, grid.m)
    for name in config.methods:
        route, loss = method_losses(name, config.tau, config.cqr_levels)
        t0 = time.perf_counter()
        try:
            ext = _extract_for(route, train, k_max, config)
        except PfqrError:
            ext = None
        for k in config.k_values:
            mi = mo = float("nan")
            failed = ext is None or k > ext.k
            if not failed:
                try:
                    fit = fit_model(train, ext.truncated(k), loss)
                    pred = point_predictions(fit, train, config.cqr_pick)
                    r = train.responses - pred
                    mi = float(r @ r) / r.size
                    if test is not None:
                        pred = point_predictions(fit, test, config.cqr_pick)
                        r = test.responses - pred
                        mo = float(r @ r) / r.size
                except PfqrError:
                    failed = True
            report.cells.append(
                EvalCell(
                    method=name,
                    k=k,
                    bias2=float("nan"),
                    var=float("nan"),
                    mise=float("nan"),
                    mse_in=mi,
                    mse_out=mo,
                    reps=0 if failed else 1,
                    failures=1 if failed else 0,
                    wall=time.perf_counter() - t0,
                )
            )
    return report


def run_campaign(configs: list[BenchmarkConfig]) -> list[EvalReport]:
    return [run_benchmark(c) for c in configs]


# ---------------------------------------------------------------------------
# report emission / ingestion

_CSV_HEADER = (
    "design,n,error,case,seed,replications,backend,"
    "method,k,reps,failures,bias2,var,mise,mse_in,mse_out"
)


def reports_to_csv(reports: list[EvalReport]) -> str:
    lines = [_CSV_HEADER]
    for rep in reports:
        for c in rep.cells:
            lines.append(
                ",".join(
                    [
                        rep.design_kind,
                        str(rep.n),
                        rep.error_law or "",
                        rep.case or "",
                        str(rep.seed),
                        str(rep.replications),
                        rep.backend,
                        c.method,
                        str(c.k),
                        str(c.reps),
                        str(c.failures),
                        repr(c.bias2),
                        repr(c.var),
                        repr(c.mise),
                        repr(c.mse_in),
                        repr(c.mse_out),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def reports_from_csv(text: str) -> list[EvalReport]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ConfigError("not a benchmark report CSV")
    out: dict[tuple, EvalReport] = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        key = tuple(parts[:7])
        if key not in out:
            out[key] = EvalReport(
                design_kind=parts[0],
                n=int(parts[1]),
                error_law=parts[2] or None,
                case=parts[3] or None,
                seed=int(parts[4]),
                replications=int(parts[5]),
                backend=parts[6],
            )
        out[key].cells.append(
            EvalCell(
                method=parts[7],
                k=int(parts[8]),
                reps=int(parts[9]),
                failures=int(parts[10]),
                bias2=float(parts[11]),
                var=float(parts[12]),
                mise=float(parts[13]),
                mse_in=float(parts[14]),
                mse_out=float(parts[15]),
            )
        )
    return list(out.values())


def _render(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if v > OVERFLOW_LIMIT:
        return ">100"
    return f"{v:.2f}"


def reports_to_text(reports: list[EvalReport]) -> str:
    """Human-readable table; cells above 100 render as '>100'."""
    lines = []
    for rep in reports:
        lines.append(f"design {rep.label}  S={rep.replications}  seed={rep.seed}")
        lines.append(
            f"{'method':>8} {'K':>3} {'Bias2':>8} {'Var':>8} {'MISE':>8}"
            f" {'MSE(in)':>9} {'MSE(out)':>9} {'fail':>5}"
        )
        for c in rep.cells:
            lines.append(
                f"{c.method:>8} {c.k:>3} {_render(c.bias2):>8} {_render(c.var):>8}"
                f" {_render(c.mise):>8} {_render(c.mse_in):>9}"
                f" {_render(c.mse_out):>9} {c.failures:>5}"
            )
        lines.append("")
    return "\n".join(lines)


def report_charts(reports: list[EvalReport]) -> dict[str, str]:
    """One SVG per (design, metric): metric vs K, one series per method."""
    charts: dict[str, str] = {}
    for rep in reports:
        tag = rep.design_kind + f"_n{rep.n}"
        if rep.error_law:
            tag += f"_{rep.error_law}"
        if rep.case:
            tag += f"_case{rep.case}"
        for metric in ("mise", "mse_in", "mse_out"):
            series: dict[str, list[tuple[float, float]]] = {}
            for c in rep.cells:
                series.setdefault(c.method, []).append(
                    (float(c.k), float(getattr(c, metric)))
                )
            if any(
                math.isfinite(y) for pts in series.values() for _, y in pts
            ):
                charts[f"{metric}_{tag}.svg"] = line_chart(
                    series,
                    title=f"{metric} {rep.label}",
                    xlabel="number of basis functions K",
                    ylabel=metric,
                )
    return charts
