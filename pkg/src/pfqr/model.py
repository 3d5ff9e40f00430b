"""Fit the finite-basis scalar-on-function model and predict.

After extraction, the basis coefficients are re-fit jointly (together
with the intercept(s) and scalar-covariate coefficients) under the
requested loss; per-step covariance values are never reused as final
coefficients.  The coefficient function is reconstructed on the grid on
the scale of the data-generating function: with l2-weighted scores and
column standardization, gamma_fn = (sum_k gamma_k * basis_k) / scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GridMismatch
from .extract import ExtractionResult, StepRecord
from .fgrid import (
    L2_WEIGHTED,
    BasisSet,
    ColumnStandardizer,
    FunctionalSample,
    Grid,
    ScoreMatrix,
)
from .qsolve import CQR, LS, QR, CheckLossSpec, LinearFit, fit_cqr, fit_ls, fit_qr

MODEL_SCHEMA = "pfqr-model-v1"


@dataclass
class ModelFit:
    """Fitted partial functional linear model."""

    loss: CheckLossSpec
    intercepts: np.ndarray  # 1 entry (LS/QR) or L entries (CQR)
    beta: np.ndarray  # scalar-covariate coefficients
    gamma: np.ndarray  # basis coefficients
    gamma_fn: np.ndarray  # coefficient function on the grid (true scale)
    functional_offset: float  # dt * sum_j mean_j * gamma_fn_j
    extraction: ExtractionResult
    solver: LinearFit

    @property
    def grid(self) -> Grid:
        return self.extraction.basis.grid

    @property
    def n_scalars(self) -> int:
        return self.beta.size

    @property
    def k(self) -> int:
        return self.gamma.size


def _design_for(loss: CheckLossSpec, scalars, scores, n: int):
    if scalars is not None and scalars.size:
        X = np.column_stack([scalars, scores])
    else:
        X = np.asarray(scores, dtype=float).reshape(n, -1)
    return X


def fit_model(
    sample: FunctionalSample, extraction: ExtractionResult, loss: CheckLossSpec
) -> ModelFit:
    """Joint fit of (intercepts, scalar coefficients, basis coefficients)
    with design [scalars | scores]."""
    if sample.responses is None:
        raise ValueError("sample has no responses")
    if extraction.scores.values.shape[0] != sample.n:
        raise DimensionMismatch("extraction scores do not match the sample")
    y = sample.responses
    n = sample.n
    p = sample.p
    scores = extraction.scores.values
    X = _design_for(loss, sample.scalars, scores, n)

    if loss.kind == CQR:
        fit = fit_cqr(X, y, loss.levels)
        intercepts = fit.intercepts
    else:
        design = np.column_stack([np.ones(n), X])
        fit = fit_qr(design, y, loss.tau) if loss.kind == QR else fit_ls(design, y)
        intercepts = fit.intercepts
    beta = fit.slopes[:p]
    gamma = fit.slopes[p:]

    basis = extraction.basis
    if gamma.size:
        gamma_fn = (basis.functions.T @ gamma) / extraction.standardizer.scale
    else:
        gamma_fn = np.zeros(basis.grid.m)
    dt = basis.grid.dt
    offset = float(dt * (extraction.standardizer.mean @ gamma_fn))
    return ModelFit(
        loss=loss,
        intercepts=np.asarray(intercepts, dtype=float),
        beta=np.asarray(beta, dtype=float),
        gamma=np.asarray(gamma, dtype=float),
        gamma_fn=gamma_fn,
        functional_offset=offset,
        extraction=extraction,
        solver=fit,
    )


def predict(fit: ModelFit, sample: FunctionalSample) -> np.ndarray:
    """Predictions for new curves on the training grid.

    Returns shape (n,) for LS/QR fits and (n, L) for CQR fits (one
    column per level; slopes shared, intercepts differ).
    """
    if not fit.grid.matches(sample.grid):
        raise GridMismatch("prediction curves are not on the training grid")
    if sample.p != fit.n_scalars:
        raise DimensionMismatch(
            f"model expects {fit.n_scalars} scalar covariates, got {sample.p}"
        )
    scores = fit.extraction.transform(sample.curves)
    base = scores @ fit.gamma if fit.k else np.zeros(sample.n)
    if fit.n_scalars:
        base = base + sample.scalars @ fit.beta
    if fit.loss.kind == CQR:
        return base[:, None] + fit.intercepts[None, :]
    return fit.intercepts[0] + base


def point_predictions(
    fit: ModelFit, sample: FunctionalSample, cqr_pick: str = "median"
) -> np.ndarray:
    """Single prediction per subject; CQR fits are represented by the
    median level (or the average over levels with cqr_pick='mean')."""
    pred = predict(fit, sample)
    if fit.loss.kind != CQR:
        return pred
    if cqr_pick == "median":
        return pred[:, (pred.shape[1] - 1) // 2]
    if cqr_pick == "mean":
        return pred.mean(axis=1)
    raise ValueError(f"unknown cqr_pick {cqr_pick!r}")


def functional_contribution(fit: ModelFit, sample: FunctionalSample) -> np.ndarray:
    """<z_i, gamma_fn> under the l2-weighted quadrature, minus the
    standardization offset; equals scores @ gamma up to solver noise."""
    dt = fit.grid.dt
    return sample.curves @ fit.gamma_fn * dt - fit.functional_offset


# ---------------------------------------------------------------------------
# JSON serialization


def _loss_to_dict(loss: CheckLossSpec) -> dict:
    return {
        "kind": loss.kind,
        "tau": loss.tau,
        "levels": None if loss.levels is None else list(loss.levels),
    }


def _loss_from_dict(d: dict) -> CheckLossSpec:
    if d["kind"] == QR:
        return CheckLossSpec.qr(d["tau"])
    if d["kind"] == CQR:
        return CheckLossSpec.cqr(d["levels"])
    return CheckLossSpec.ls()


def model_to_dict(fit: ModelFit) -> dict:
    ext = fit.extraction
    return {
        "schema": MODEL_SCHEMA,
        "loss": _loss_to_dict(fit.loss),
        "intercepts": fit.intercepts.tolist(),
        "beta": fit.beta.tolist(),
        "gamma": fit.gamma.tolist(),
        "gamma_fn": fit.gamma_fn.tolist(),
        "functional_offset": fit.functional_offset,
        "grid": ext.basis.grid.points.tolist(),
        "method": ext.method,
        "replay": {
            "mean": ext.standardizer.mean.tolist(),
            "scale": ext.standardizer.scale.tolist(),
            "basis": ext.basis.functions.tolist(),
            "steps": [
                {
                    "direction": s.direction.tolist(),
                    "slopes": s.slopes.tolist(),
                    "intercepts": s.intercepts.tolist(),
                    "rotation": s.rotation.tolist(),
                    "rotation_norm": s.rotation_norm,
                }
                for s in ext.steps
            ],
        },
    }


def model_from_dict(d: dict) -> ModelFit:
    if d.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unknown model schema {d.get('schema')!r}")
    loss = _loss_from_dict(d["loss"])
    grid = Grid(np.asarray(d["grid"], dtype=float))
    replay = d["replay"]
    basis = BasisSet(
        grid=grid,
        functions=np.asarray(replay["basis"], dtype=float).reshape(-1, grid.m),
        method=d["method"],
    )
    steps = [
        StepRecord(
            direction=np.asarray(s["direction"], dtype=float),
            slopes=np.asarray(s["slopes"], dtype=float),
            intercepts=np.asarray(s["intercepts"], dtype=float),
            rotation=np.asarray(s["rotation"], dtype=float),
            rotation_norm=float(s["rotation_norm"]),
        )
        for s in replay["steps"]
    ]
    standardizer = ColumnStandardizer(
        mean=np.asarray(replay["mean"], dtype=float),
        scale=np.asarray(replay["scale"], dtype=float),
    )
    extraction = ExtractionResult(
        method=d["method"],
        loss=loss,
        basis=basis,
        scores=ScoreMatrix(np.empty((0, basis.k)), basis, L2_WEIGHTED),
        standardizer=standardizer,
        steps=steps,
    )
    gamma = np.asarray(d["gamma"], dtype=float)
    solver = LinearFit(
        intercepts=np.asarray(d["intercepts"], dtype=float),
        slopes=np.concatenate([np.asarray(d["beta"], dtype=float), gamma]),
        objective=float("nan"),
        iterations=0,
        converged=True,
    )
    return ModelFit(
        loss=loss,
        intercepts=np.asarray(d["intercepts"], dtype=float),
        beta=np.asarray(d["beta"], dtype=float),
        gamma=gamma,
        gamma_fn=np.asarray(d["gamma_fn"], dtype=float),
        functional_offset=float(d["functional_offset"]),
        extraction=extraction,
        solver=solver,
    )


def model_to_json(fit: ModelFit) -> str:
    return json.dumps(model_to_dict(fit), indent=1, sort_keys=True)


def model_from_json(text: str) -> ModelFit:
    return model_from_dict(json.loads(text))
