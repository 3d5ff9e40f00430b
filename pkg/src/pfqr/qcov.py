"""Quantile, composite-quantile, and mean covariances between scalars.

Each covariance is the coefficient earned by a standardized probe
variable inside a regression of the response on (intercept(s), optional
adjusters, probe).  With no adjusters these are the plain quantile /
composite-quantile / ordinary covariances; with adjusters they become
the partial versions.  The probe is always standardized to mean zero,
variance one (ddof=1) first; the response never is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProbe
from .qsolve import CQR, LS, QR, CheckLossSpec, fit_cqr, fit_ls, fit_qr

PROBE_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class CovarianceRequest:
    """One covariance evaluation: response, probe, optional adjusters,
    and the loss that defines the flavor."""

    response: np.ndarray
    probe: np.ndarray
    loss: CheckLossSpec
    adjusters: np.ndarray | None = None


def _standardize_probe(probe: np.ndarray) -> np.ndarray:
    probe = np.asarray(probe, dtype=float).ravel()
    var = probe.var(ddof=1)
    if var < PROBE_VARIANCE_FLOOR:
        raise DegenerateProbe(f"probe variance {var:.3e} < 1e-12")
    return (probe - probe.mean()) / np.sqrt(var)


def _prep(response, probe, adjusters):
    y = np.asarray(response, dtype=float).ravel()
    z = _standardize_probe(probe)
    if y.size != z.size:
        raise ValueError("response and probe lengths differ")
    if adjusters is None:
        X = np.empty((y.size, 0))
    else:
        X = np.asarray(adjusters, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise ValueError("adjusters row count != response length")
    return y, z, X


def quantile_cov(response, probe, tau: float, adjusters=None) -> float:
    """Coefficient of the standardized probe in a quantile regression of
    the response on (intercept, adjusters, probe)."""
    y, z, X = _prep(response, probe, adjusters)
    design = np.column_stack([np.ones(y.size), X, z])
    fit = fit_qr(design, y, tau)
    return float(fit.slopes[-1])


def composite_quantile_cov(response, probe, levels, adjusters=None) -> float:
    """Shared-slope coefficient of the standardized probe in a composite
    quantile regression across the given levels."""
    y, z, X = _prep(response, probe, adjusters)
    design = np.column_stack([X, z])
    fit = fit_cqr(design, y, levels)
    return float(fit.slopes[-1])


def partial_cov(response, probe, adjusters=None) -> float:
    """Least-squares analogue: OLS coefficient of the standardized probe."""
    y, z, X = _prep(response, probe, adjusters)
    design = np.column_stack([np.ones(y.size), X, z])
    fit = fit_ls(design, y)
    return float(fit.slopes[-1])


def covariance(req: CovarianceRequest) -> float:
    """Dispatch a CovarianceRequest on its loss kind."""
    if req.loss.kind == QR:
        return quantile_cov(req.response, req.probe, req.loss.tau, req.adjusters)
    if req.loss.kind == CQR:
        return composite_quantile_cov(
            req.response, req.probe, req.loss.levels, req.adjusters
        )
    if req.loss.kind == LS:
        return partial_cov(req.response, req.probe, req.adjusters)
    raise ValueError(f"unknown loss kind {req.loss.kind!r}")
