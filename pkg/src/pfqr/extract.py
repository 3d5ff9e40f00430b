"""Sequential response-adapted basis extraction.

The greedy loop: center curve columns once, then repeatedly (1) score
every grid column by its covariance with the response under the
requested loss, normalize that profile into a direction, (2) project
curves onto the direction, (3) regress every column on the projection
and (4) keep the residuals.  Directions live in the deflated coordinates
of their step; for reporting and coefficient-function reconstruction
they are re-expressed in the original centered coordinates ("rotations",
as in SIMPLS).  Prediction on new data replays the training pipeline:
training means, training directions, training deflation regressions.

Column profiles are kept on the covariance scale: the loss-specific
slope is computed on the standardized probe (which keeps the solver
well-scaled and is exactly the covariance definition) and multiplied
back by the probe's standard deviation.  For squared loss this
reproduces the sample covariance identically, so the squared-loss route
is the classical SIMPLS; the quantile and composite routes are its
robust analogues on the same units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AllZeroDirection,
    ConfigError,
    DegenerateScore,
)
from .fgrid import (
    L2_WEIGHTED,
    BasisSet,
    ColumnStandardizer,
    FunctionalSample,
    ScoreMatrix,
    center_columns,
    fpc_basis,
)
from .qcov import composite_quantile_cov, partial_cov, quantile_cov
from .qsolve import CQR, LS, QR, CheckLossSpec, fit_cqr, fit_ls, fit_qr

PQR = "pqr"
PCQR = "pcqr"
PLS = "pls"
FPC = "fpc"

COV_FLOOR = 1e-12
SCORE_VARIANCE_FLOOR = 1e-12

_METHOD_LOSS = {PQR: QR, PCQR: CQR, PLS: LS}


@dataclass(frozen=True)
class ExtractionConfig:
    """How to run one extraction: method, loss, basis count, stop rule."""

    method: str
    loss: CheckLossSpec
    k_max: int
    stop: str = "fixed"  # fixed | cv | bic
    cv_folds: int = 5
    use_scalars_as_adjusters: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in (PQR, PCQR, PLS):
            raise ConfigError(f"unknown extraction method {self.method!r}")
        if self.method == PLS:
            # the loss field is ignored for PLS; pin it so records agree
            object.__setattr__(self, "loss", CheckLossSpec.ls())
        elif self.loss.kind != _METHOD_LOSS[self.method]:
            raise ConfigError(
                f"method {self.method!r} needs a {_METHOD_LOSS[self.method]!r} loss"
            )
        if self.k_max < 0:
            raise ConfigError("k_max must be nonnegative")
        if self.stop not in ("fixed", "cv", "bic"):
            raise ConfigError(f"unknown stop rule {self.stop!r}")
        if self.stop == "cv" and self.cv_folds < 2:
            raise ConfigError("cross validation needs at least 2 folds")


@dataclass
class StepRecord:
    """Everything needed to replay one extraction step on new curves."""

    direction: np.ndarray  # unit direction in that step's deflated coords
    slopes: np.ndarray  # per-column regression slope on the score
    intercepts: np.ndarray  # per-column regression intercept
    rotation: np.ndarray  # direction mapped to original standardized coords
    rotation_norm: float  # l2-weighted norm of the rotation


@dataclass
class ExtractionResult:
    """Extracted basis, scores, and the replay record."""

    method: str
    loss: CheckLossSpec
    basis: BasisSet
    scores: ScoreMatrix
    standardizer: ColumnStandardizer
    steps: list[StepRecord] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    stopped_early: bool = False
    requested_k: int = 0

    @property
    def k(self) -> int:
        return self.basis.k

    def truncated(self, k: int) -> "ExtractionResult":
        """View of the result keeping only the first k components.

        Valid because extraction is greedy: the first k steps of a longer
        run are exactly the k-step run.
        """
        if k > self.k:
            raise ValueError(f"cannot truncate to {k} > {self.k} components")
        basis = BasisSet(
            grid=self.basis.grid,
            functions=self.basis.functions[:k],
            method=self.basis.method,
            normalization=self.basis.normalization,
            eigenvalues=None
            if self.basis.eigenvalues is None
            else self.basis.eigenvalues[:k],
        )
        return ExtractionResult(
            method=self.method,
            loss=self.loss,
            basis=basis,
            scores=ScoreMatrix(
                self.scores.values[:, :k], basis, self.scores.convention
            ),
            standardizer=self.standardizer,
            steps=self.steps[:k],
            residual_norms=self.residual_norms[:k],
            stopped_early=self.stopped_early,
            requested_k=k,
        )

    def transform(self, curves: np.ndarray) -> np.ndarray:
        """Scores for new curves via the training replay."""
        dt = self.basis.grid.dt
        W = self.standardizer.apply(np.asarray(curves, dtype=float))
        if not self.steps:  # direct-projection basis (fPC route)
            return dt * (W @ self.basis.functions.T)
        cols = []
        for step in self.steps:
            t = dt * (W @ step.direction)
            cols.append(t / step.rotation_norm)
            W = W - np.outer(t, step.slopes) - step.intercepts[None, :]
        return np.column_stack(cols) if cols else np.empty((W.shape[0], 0))


def _column_covariance(y, col, loss: CheckLossSpec, adjusters) -> float:
    if loss.kind == QR:
        return quantile_cov(y, col, loss.tau, adjusters)
    if loss.kind == CQR:
        return composite_quantile_cov(y, col, loss.levels, adjusters)
    return partial_cov(y, col, adjusters)


def extract_one(
    sample: FunctionalSample,
    loss: CheckLossSpec,
    adjusters: np.ndarray | None = None,
) -> np.ndarray:
    """One direction: column-wise covariance-scale profiles with the
    response, rescaled to unit l2-weighted norm.

    Each column contributes (slope on the standardized column) times the
    column's standard deviation; for squared loss that is exactly the
    sample covariance.  Expects centered (or deflation-residual) curves.
    Columns whose variance has been exhausted contribute zero; if every
    column is exhausted or uninformative, raises AllZeroDirection.
    """
    if sample.responses is None:
        raise ValueError("sample has no responses")
    X = sample.curves
    y = sample.responses
    m = X.shape[1]
    c = np.zeros(m)
    col_sd = X.std(axis=0, ddof=1)
    for j in range(m):
        if col_sd[j] ** 2 < SCORE_VARIANCE_FLOOR:
            continue
        c[j] = col_sd[j] * _column_covariance(y, X[:, j], loss, adjusters)
    peak = float(np.max(np.abs(c)))
    if peak < COV_FLOOR:
        raise AllZeroDirection(
            f"all column covariances below {COV_FLOOR:g} (max {peak:.3e})"
        )
    norm = math.sqrt(sample.grid.dt * float(c @ c))
    return c / norm


def _deflate_matrix(X: np.ndarray, score: np.ndarray):
    """Residualize every column on the score (intercept + slope)."""
    sc = np.asarray(score, dtype=float)
    s_mean = sc.mean()
    s_center = sc - s_mean
    denom = float(s_center @ s_center)
    if denom / max(sc.size - 1, 1) < SCORE_VARIANCE_FLOOR:
        raise DegenerateScore("score column has (near-)zero variance")
    slopes = (s_center @ X) / denom
    col_means = X.mean(axis=0)
    intercepts = col_means - slopes * s_mean
    resid = X - np.outer(sc, slopes) - intercepts[None, :]
    return resid, slopes, intercepts


def deflate(sample: FunctionalSample, score: np.ndarray) -> FunctionalSample:
    """Public deflation: replace curves by their per-column residuals
    from a simple regression on the score."""
    resid, _, _ = _deflate_matrix(sample.curves, score)
    return FunctionalSample(
        grid=sample.grid,
        curves=resid,
        scalars=sample.scalars,
        responses=sample.responses,
    )


def run_extraction(sample: FunctionalSample, config: ExtractionConfig) -> ExtractionResult:
    """Full greedy extraction; K set by the configured stop rule."""
    if sample.responses is None:
        raise ValueError("extraction needs responses")
    n, m = sample.curves.shape
    if config.k_max > min(n - 1, m):
        raise ConfigError(f"k_max={config.k_max} exceeds min(n-1, m)={min(n - 1, m)}")
    if config.stop == "fixed":
        k = config.k_max
    else:
        k = select_k(sample, config)
    return _extract_fixed(sample, config, k)


def _extract_fixed(
    sample: FunctionalSample, config: ExtractionConfig, k: int
) -> ExtractionResult:
    grid = sample.grid
    dt = grid.dt
    std_sample, rec = center_columns(sample)
    adjusters = sample.scalars if config.use_scalars_as_adjusters else None
    W = std_sample.curves
    m = W.shape[1]
    T = np.eye(m)

    steps: list[StepRecord] = []
    raw_scores: list[np.ndarray] = []
    residual_norms: list[float] = []
    stopped = False
    work = std_sample
    for _ in range(k):
        try:
            d = extract_one(work, config.loss, adjusters)
        except AllZeroDirection:
            stopped = True
            break
        t = dt * (work.curves @ d)
        rot = T @ d
        try:
            resid, slopes, intercepts = _deflate_matrix(work.curves, t)
        except DegenerateScore:
            stopped = True
            break
        T = T - dt * np.outer(rot, slopes)
        steps.append(
            StepRecord(
                direction=d,
                slopes=slopes,
                intercepts=intercepts,
                rotation=rot,
                rotation_norm=math.sqrt(dt * float(rot @ rot)),
            )
        )
        raw_scores.append(t)
        residual_norms.append(float(np.linalg.norm(resid)))
        work = FunctionalSample(
            grid=grid, curves=resid, scalars=sample.scalars, responses=sample.responses
        )

    k_eff = len(steps)
    funcs = np.empty((k_eff, m))
    score_cols = np.empty((sample.n, k_eff))
    for i, step in enumerate(steps):
        funcs[i] = step.rotation / step.rotation_norm
        score_cols[:, i] = raw_scores[i] / step.rotation_norm
    basis = BasisSet(grid=grid, functions=funcs, method=config.method)
    return ExtractionResult(
        method=config.method,
        loss=config.loss,
        basis=basis,
        scores=ScoreMatrix(score_cols, basis, L2_WEIGHTED),
        standardizer=rec,
        steps=steps,
        residual_norms=residual_norms,
        stopped_early=stopped,
        requested_k=k,
    )


def fpc_extraction(sample: FunctionalSample, k: int) -> ExtractionResult:
    """Principal-component route packaged like an extraction so the
    model pipeline treats every basis family the same way.

    Curves are centered (not scaled); the basis is the top-k
    eigenfunctions; scores are l2-weighted projections of the centered
    curves.
    """
    centered, rec = center_columns(sample)
    basis = fpc_basis(sample, k)
    scores = centered.curves @ basis.functions.T * sample.grid.dt
    return ExtractionResult(
        method=FPC,
        loss=CheckLossSpec.ls(),
        basis=basis,
        scores=ScoreMatrix(scores, basis, L2_WEIGHTED),
        standardizer=rec,
        steps=[],
        residual_norms=[],
        stopped_early=bool(basis.truncated),
        requested_k=k,
    )


def _mean_heldout_loss(loss: CheckLossSpec, y: np.ndarray, pred) -> float:
    if loss.kind == LS:
        r = y - pred
        return float(r @ r) / y.size
    if loss.kind == QR:
        r = y - pred
        return float(np.sum(r * (loss.tau - (r < 0)))) / y.size
    # composite: pred is (n, L)
    levels = np.asarray(loss.levels)
    r = y[:, None] - pred
    return float(np.sum(r * (levels[None, :] - (r < 0)))) / r.size


def _fit_on_scores(loss: CheckLossSpec, scalars, scores, y):
    """Small helper used by the selection rules; returns a predictor."""
    X = (
        np.column_stack([scalars, scores])
        if scalars is not None
        else np.asarray(scores, dtype=float)
    )
    if loss.kind == CQR:
        fit = fit_cqr(X, y, loss.levels)
        alphas = fit.intercepts

        def predict(scal, sc):
            Z = np.column_stack([scal, sc]) if scal is not None else sc
            base = Z @ fit.slopes if Z.shape[1] else np.zeros(Z.shape[0])
            return base[:, None] + alphas[None, :]

        return fit, predict
    design = np.column_stack([np.ones(y.size), X])
    fit = fit_qr(design, y, loss.tau) if loss.kind == QR else fit_ls(design, y)

    def predict(scal, sc):
        Z = np.column_stack([scal, sc]) if scal is not None else sc
        base = Z @ fit.slopes if Z.shape[1] else np.zeros(Z.shape[0])
        return fit.intercepts[0] + base

    return fit, predict


def select_k(sample: FunctionalSample, config: ExtractionConfig) -> int:
    """Basis-count selection by cross validation or BIC; ties go to the
    smaller count."""
    if config.stop == "cv":
        return _select_k_cv(sample, config)
    if config.stop == "bic":
        return _select_k_bic(sample, config)
    raise ConfigError("select_k needs stop='cv' or 'bic'")


def _subset(sample: FunctionalSample, idx: np.ndarray) -> FunctionalSample:
    return FunctionalSample(
        grid=sample.grid,
        curves=sample.curves[idx],
        scalars=None if sample.scalars is None else sample.scalars[idx],
        responses=sample.responses[idx],
    )


def _select_k_cv(sample: FunctionalSample, config: ExtractionConfig) -> int:
    n = sample.n
    rng = np.random.default_rng([config.seed, 0xCF])
    perm = rng.permutation(n)
    folds = np.array_split(perm, config.cv_folds)
    k_cap = config.k_max
    losses = np.zeros(k_cap + 1)
    counts = np.zeros(k_cap + 1)
    for f, hold in enumerate(folds):
        train_idx = np.setdiff1d(perm, hold, assume_unique=True)
        train = _subset(sample, train_idx)
        test = _subset(sample, hold)
        res = _extract_fixed(train, replace(config, stop="fixed"), k_cap)
        test_scores = res.transform(test.curves)
        for k in range(0, res.k + 1):
            _, predict = _fit_on_scores(
                config.loss,
                train.scalars if config.use_scalars_as_adjusters else None,
                res.scores.values[:, :k],
                train.responses,
            )
            pred = predict(
                test.scalars if config.use_scalars_as_adjusters else None,
                test_scores[:, :k],
            )
            losses[k] += _mean_heldout_loss(config.loss, test.responses, pred)
            counts[k] += 1
    valid = counts == config.cv_folds
    mean_loss = np.where(valid, losses / np.maximum(counts, 1), np.inf)
    return int(np.argmin(mean_loss))  # first minimum = smallest K


def _select_k_bic(sample: FunctionalSample, config: ExtractionConfig) -> int:
    n = sample.n
    res = _extract_fixed(sample, replace(config, stop="fixed"), config.k_max)
    best_k, best_bic = 0, np.inf
    for k in range(0, res.k + 1):
        _, predict = _fit_on_scores(
            config.loss,
            sample.scalars if config.use_scalars_as_adjusters else None,
            res.scores.values[:, :k],
            sample.responses,
        )
        pred = predict(
            sample.scalars if config.use_scalars_as_adjusters else None,
            res.scores.values[:, :k],
        )
        mean_loss = _mean_heldout_loss(config.loss, sample.responses, pred)
        bic = n * math.log(max(mean_loss, 1e-300)) + k * math.log(n)
        if bic < best_bic:
            best_k, best_bic = k, bic
    return best_k
