"""Check-loss optimization on small dense designs.

Linear quantile regression, composite quantile regression with shared
slopes, and ordinary least squares.  The quantile solvers run a
primal-dual interior-point method (see the backend kernels); when it
stalls, a majorize-minimize pass on the smoothed check loss re-centers
the problem and the interior point is restarted from there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import RankDeficientDesign, SolverDiverged

TOL = 1e-8
MAX_ITER = 500

LS = "ls"
QR = "qr"
CQR = "cqr"


@dataclass(frozen=True)
class CheckLossSpec:
    """Loss selector: least squares, one quantile level, or a composite
    set of levels sharing slopes."""

    kind: str
    tau: float | None = None
    levels: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (LS, QR, CQR):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == QR:
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise ValueError("qr loss needs tau in (0, 1)")
        if self.kind == CQR:
            lv = self.levels
            if not lv or any(not 0.0 < t < 1.0 for t in lv):
                raise ValueError("cqr levels must lie strictly in (0, 1)")
            if any(b <= a for a, b in zip(lv, lv[1:])):
                raise ValueError("cqr levels must be strictly increasing")

    @staticmethod
    def ls() -> "CheckLossSpec":
        return CheckLossSpec(LS)

    @staticmethod
    def qr(tau: float) -> "CheckLossSpec":
        return CheckLossSpec(QR, tau=float(tau))

    @staticmethod
    def cqr(levels) -> "CheckLossSpec":
        return CheckLossSpec(CQR, levels=tuple(float(t) for t in levels))

    @property
    def n_intercepts(self) -> int:
        return len(self.levels) if self.kind == CQR else 1


@dataclass
class LinearFit:
    """Solution of one check-loss problem."""

    intercepts: np.ndarray  # one entry (LS/QR) or L entries (CQR); empty
    # when the caller fit without an intercept
    slopes: np.ndarray
    objective: float
    iterations: int
    converged: bool
    degenerate: bool = False
    used_fallback: bool = False
    gap: float = field(default=0.0, repr=False)

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([self.intercepts, self.slopes])


def check_loss(u, tau: float):
    """Pinball loss u * (tau - 1[u < 0]); vectorized in u."""
    u = np.asarray(u, dtype=float)
    val = u * (tau - (u < 0.0))
    return float(val) if val.ndim == 0 else val


def _validate_design(design: np.ndarray, y: np.ndarray, extra_cols: int = 0):
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if design.ndim != 2:
        raise ValueError("design must be 2-d")
    n, d = design.shape
    if y.size != n:
        raise ValueError("response length != design rows")
    if n <= d + extra_cols:
        raise RankDeficientDesign(f"need n > d ({n} rows, {d + extra_cols} params)")
    if d and np.linalg.matrix_rank(design) < d:
        raise RankDeficientDesign("design columns are linearly dependent")
    return design, y


def _count_degenerate(resid: np.ndarray, y: np.ndarray, d: int) -> bool:
    thresh = 1e-8 * (1.0 + float(np.mean(np.abs(y))))
    return int(np.sum(np.abs(resid) <= thresh)) > d


def _solve_plain(A: np.ndarray, y: np.ndarray, taus) -> tuple[np.ndarray, int, bool, bool]:
    """IP solve with MM + warm-restart rescue.  Returns
    (coef, iterations, converged, used_fallback)."""
    coef, it, gap, conv = _backend.qr_ip(A, y, taus, TOL, MAX_ITER)
    if conv and np.all(np.isfinite(coef)):
        return coef, it, True, False
    warm, it2, _ = _backend.smoothed_qr(A, y, taus)
    coef2, it3, gap2, conv2 = _backend.qr_ip(A, y, taus, TOL, MAX_ITER, warm)
    if conv2 and np.all(np.isfinite(coef2)):
        return coef2, it + it2 + it3, True, True
    # keep the better of the two candidates
    cands = [c for c in (coef, coef2, warm) if np.all(np.isfinite(c))]
    if not cands:
        raise SolverDiverged("interior point and smoothed fallback both failed")
    objs = [_objective_plain(A, y, taus, c) for c in cands]
    best = cands[int(np.argmin(objs))]
    return best, it + it2 + it3, False, True


def _objective_plain(A, y, taus, coef) -> float:
    u = y - A @ coef
    taus = np.broadcast_to(np.asarray(taus, dtype=float), u.shape)
    return float(np.sum(u * (taus - (u < 0.0))))


def fit_qr(design: np.ndarray, y: np.ndarray, tau: float, intercept: bool = True) -> LinearFit:
    """Quantile regression at level tau.

    The design must already contain an explicit intercept column when one
    is wanted; ``intercept=True`` declares that column 0 is it (this only
    affects how the solution is split into intercept and slopes).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    design, y = _validate_design(design, y)
    coef, it, conv, fb = _solve_plain(design, y, tau)
    if not conv:
        raise SolverDiverged(
            f"quantile regression did not reach tolerance in {MAX_ITER} iterations"
        )
    resid = y - design @ coef
    obj = _objective_plain(design, y, tau, coef)
    if intercept:
        inter, slopes = coef[:1], coef[1:]
    else:
        inter, slopes = np.zeros(0), coef
    return LinearFit(
        intercepts=inter,
        slopes=slopes,
        objective=obj,
        iterations=it,
        converged=conv,
        degenerate=_count_degenerate(resid, y, design.shape[1]),
        used_fallback=fb,
    )


def fit_cqr(design: np.ndarray, y: np.ndarray, levels) -> LinearFit:
    """Composite quantile regression: level-specific intercepts, one
    shared slope vector.

    ``design`` must NOT contain an intercept column; the per-level
    intercepts are internal.  A single level reduces exactly to
    ``fit_qr`` on the same data (identical stacked problem).  Levels may
    repeat (each repeat just doubles that level's loss term).
    """
    levels = np.asarray([float(t) for t in levels], dtype=float)
    if levels.size == 0 or np.any(levels <= 0.0) or np.any(levels >= 1.0):
        raise ValueError("cqr levels must lie strictly in (0, 1)")
    if np.any(np.diff(levels) < 0.0):
        raise ValueError("cqr levels must be nondecreasing")
    y = np.asarray(y, dtype=float).ravel()
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[:, None]
    if design.size == 0:
        design = design.reshape(y.size, 0)
    n, d = design.shape
    if y.size != n:
        raise ValueError("response length != design rows")
    if n <= d + 1:
        raise RankDeficientDesign(f"need n > d ({n} rows, {d} slopes + intercepts)")
    with_ones = np.hstack([np.ones((n, 1)), design])
    if np.linalg.matrix_rank(with_ones) < d + 1:
        raise RankDeficientDesign("design columns are linearly dependent")

    if levels.size == 1:
        # single level: same LP as plain quantile regression with an
        # explicit intercept column, solved through the same kernel so
        # the two entry points agree bit for bit
        fit = fit_qr(with_ones, y, float(levels[0]), intercept=True)
        return LinearFit(
            intercepts=fit.intercepts,
            slopes=fit.slopes,
            objective=fit.objective,
            iterations=fit.iterations,
            converged=fit.converged,
            degenerate=fit.degenerate,
            used_fallback=fit.used_fallback,
        )

    alphas, theta, it, gap, conv = _backend.cqr_ip(design, y, levels, TOL, MAX_ITER)
    fb = False
    if not (conv and np.all(np.isfinite(alphas)) and np.all(np.isfinite(theta))):
        # stacked fallback: materialize the (L*n)-row problem
        A_stk, y_stk, tau_stk = _stack_cqr(design, y, levels)
        coef, it2, conv, fb = _solve_plain(A_stk, y_stk, tau_stk)
        it += it2
        alphas, theta = coef[: levels.size], coef[levels.size :]
        if not conv:
            raise SolverDiverged(
                f"composite fit did not reach tolerance in {MAX_ITER} iterations"
            )
    obj = _cqr_objective(design, y, levels, alphas, theta)
    resid_med = y - design @ theta - np.median(alphas)
    return LinearFit(
        intercepts=np.asarray(alphas, dtype=float),
        slopes=np.asarray(theta, dtype=float),
        objective=obj,
        iterations=it,
        converged=conv,
        degenerate=_count_degenerate(resid_med, y, d + levels.size),
        used_fallback=fb,
    )


def _stack_cqr(design, y, levels):
    n, d = design.shape
    L = levels.size
    A = np.zeros((L * n, L + d))
    ys = np.empty(L * n)
    taus = np.empty(L * n)
    for l in range(L):
        A[l * n : (l + 1) * n, l] = 1.0
        A[l * n : (l + 1) * n, L:] = design
        ys[l * n : (l + 1) * n] = y
        taus[l * n : (l + 1) * n] = levels[l]
    return A, ys, taus


def _cqr_objective(design, y, levels, alphas, theta) -> float:
    resid = y[None, :] - np.asarray(alphas)[:, None] - (design @ theta)[None, :]
    taus = np.asarray(levels)[:, None]
    return float(np.sum(resid * (taus - (resid < 0.0))))


def cqr_objective(design, y, levels, alphas, theta) -> float:
    """Composite check-loss objective at a given parameter point."""
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[:, None]
    return _cqr_objective(
        design,
        np.asarray(y, dtype=float).ravel(),
        np.asarray(levels, dtype=float),
        np.asarray(alphas, dtype=float),
        np.asarray(theta, dtype=float),
    )


def fit_ls(design: np.ndarray, y: np.ndarray, intercept: bool = True) -> LinearFit:
    """Ordinary least squares through a numerically stable factorization."""
    design, y = _validate_design(design, y)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    if intercept:
        inter, slopes = coef[:1], coef[1:]
    else:
        inter, slopes = np.zeros(0), coef
    return LinearFit(
        intercepts=inter,
        slopes=slopes,
        objective=float(resid @ resid),
        iterations=1,
        converged=True,
        degenerate=False,
    )
