"""Grid-based functional numerics.

Curves are stored as dense matrices over a shared uniform grid on [0, 1].
Two inner-product conventions coexist throughout the package:

* ``grid-sum``    : <f, g> = sum_j f(t_j) g(t_j)
* ``l2-weighted`` : <f, g> = dt * sum_j f(t_j) g(t_j)  (a quadrature for
  the L2 inner product; dt = 1 / (m - 1))

All basis families produced here and by the extraction routines are
normalized under the ``l2-weighted`` convention so reconstructed
coefficient functions live on the scale of the underlying function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateColumn, DimensionMismatch, GridMismatch

GRID_SUM = "grid-sum"
L2_WEIGHTED = "l2-weighted"

_CONVENTIONS = (GRID_SUM, L2_WEIGHTED)

DEGENERATE_VARIANCE = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform sampling grid t_1 < ... < t_m inside [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if pts[0] < -1e-12 or pts[-1] > 1 + 1e-12:
            raise ValueError("grid endpoints must lie in [0, 1]")
        diffs = np.diff(pts)
        if np.any(diffs <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.max(np.abs(diffs - diffs[0])) > 1e-9 * max(diffs[0], 1e-30):
            raise ValueError("only uniform grids are supported")

    @property
    def m(self) -> int:
        return self.points.size

    @property
    def dt(self) -> float:
        return float(self.points[1] - self.points[0])

    def matches(self, other: "Grid") -> bool:
        return self.m == other.m and np.allclose(
            self.points, other.points, rtol=0.0, atol=1e-12
        )

    @staticmethod
    def regular(m: int) -> "Grid":
        """The canonical m-point grid 0, 1/(m-1), ..., 1."""
        return Grid(np.linspace(0.0, 1.0, m))


def _check_same_grid(a: Grid, b: Grid):
    if not a.matches(b):
        raise GridMismatch(
            f"grids differ: {a.m} points vs {b.m} points"
        )


@dataclass
class FunctionalSample:
    """n curves observed on a common grid, optionally with scalar
    covariates and responses."""

    grid: Grid
    curves: np.ndarray
    scalars: np.ndarray | None = None
    responses: np.ndarray | None = None

    def __post_init__(self):
        self.curves = np.asarray(self.curves, dtype=float)
        if self.curves.ndim != 2:
            raise DimensionMismatch("curves must be a 2-d array")
        n, m = self.curves.shape
        if n < 1:
            raise DimensionMismatch("need at least one curve")
        if m != self.grid.m:
            raise GridMismatch(
                f"curves have {m} columns but grid has {self.grid.m} points"
            )
        if not np.all(np.isfinite(self.curves)):
            raise ValueError("curves contain non-finite entries")
        if self.scalars is not None:
            self.scalars = np.asarray(self.scalars, dtype=float)
            if self.scalars.ndim == 1:
                self.scalars = self.scalars[:, None]
            if self.scalars.shape[0] != n:
                raise DimensionMismatch("scalars row count != curve count")
            if not np.all(np.isfinite(self.scalars)):
                raise ValueError("scalars contain non-finite entries")
        if self.responses is not None:
            self.responses = np.asarray(self.responses, dtype=float).ravel()
            if self.responses.size != n:
                raise DimensionMismatch("responses length != curve count")
            if not np.all(np.isfinite(self.responses)):
                raise ValueError("responses contain non-finite entries")

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def p(self) -> int:
        return 0 if self.scalars is None else self.scalars.shape[1]


@dataclass
class BasisSet:
    """K discretized basis functions, row per function."""

    grid: Grid
    functions: np.ndarray
    method: str
    normalization: str = L2_WEIGHTED
    eigenvalues: np.ndarray | None = None
    truncated: bool = False

    def __post_init__(self):
        self.functions = np.atleast_2d(np.asarray(self.functions, dtype=float))
        if self.functions.shape[0] and self.functions.shape[1] != self.grid.m:
            raise GridMismatch("basis rows do not match grid length")
        if self.normalization not in _CONVENTIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def k(self) -> int:
        return self.functions.shape[0]


@dataclass
class ScoreMatrix:
    """Projections of curves onto a basis, with provenance."""

    values: np.ndarray
    basis: BasisSet
    convention: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("scores must be 2-d")
        if self.values.shape[1] != self.basis.k:
            raise DimensionMismatch("score columns != basis size")


@dataclass
class ColumnStandardizer:
    """Per-column affine transform (x - mean) / scale fitted on a sample."""

    mean: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    def apply(self, curves: np.ndarray) -> np.ndarray:
        return (curves - self.mean) / self.scale


def standardize_columns(
    sample: FunctionalSample, on_degenerate: str = "raise"
) -> tuple[FunctionalSample, ColumnStandardizer]:
    """Center and scale every grid column to mean 0, variance 1 (ddof=1).

    ``on_degenerate`` controls columns with variance below 1e-12:
    ``"raise"`` (default) raises DegenerateColumn, ``"keep"`` centers the
    column but leaves it unscaled and records it in the transform.
    """
    X = sample.curves
    n = X.shape[0]
    if n < 2:
        raise DegenerateColumn("standardization needs at least two curves")
    mean = X.mean(axis=0)
    var = X.var(axis=0, ddof=1)
    bad = var < DEGENERATE_VARIANCE
    if bad.any():
        if on_degenerate == "raise":
            j = int(np.argmax(bad))
            raise DegenerateColumn(
                f"column {j} has variance {var[j]:.3e} < 1e-12"
            )
        if on_degenerate != "keep":
            raise ValueError(f"unknown on_degenerate policy {on_degenerate!r}")
    scale = np.sqrt(np.where(bad, 1.0, var))
    rec = ColumnStandardizer(mean=mean, scale=scale, degenerate=bad)
    out = FunctionalSample(
        grid=sample.grid,
        curves=rec.apply(X),
        scalars=sample.scalars,
        responses=sample.responses,
    )
    return out, rec


def center_columns(
    sample: FunctionalSample,
) -> tuple[FunctionalSample, ColumnStandardizer]:
    """Center columns without scaling (the fPC pipeline's transform)."""
    X = sample.curves
    mean = X.mean(axis=0)
    rec = ColumnStandardizer(
        mean=mean,
        scale=np.ones_like(mean),
        degenerate=np.zeros(mean.size, bool),
    )
    out = FunctionalSample(
        grid=sample.grid,
        curves=X - mean,
        scalars=sample.scalars,
        responses=sample.responses,
    )
    return out, rec


def inner_product(
    f: np.ndarray, g: np.ndarray, grid: Grid, convention: str = L2_WEIGHTED
) -> float:
    """Inner product of two grid functions under the given convention."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (grid.m,) or g.shape != (grid.m,):
        raise GridMismatch("functions do not live on the given grid")
    s = float(np.dot(f, g))
    if convention == GRID_SUM:
        return s
    if convention == L2_WEIGHTED:
        return grid.dt * s
    raise ValueError(f"unknown convention {convention!r}")


def function_norm(f: np.ndarray, grid: Grid, convention: str = L2_WEIGHTED) -> float:
    return float(np.sqrt(inner_product(f, f, grid, convention)))


def project(sample: FunctionalSample, basis: BasisSet) -> ScoreMatrix:
    """Project every curve onto every basis row under the basis's
    normalization convention."""
    _check_same_grid(sample.grid, basis.grid)
    raw = sample.curves @ basis.functions.T
    if basis.normalization == L2_WEIGHTED:
        raw = raw * sample.grid.dt
    return ScoreMatrix(values=raw, basis=basis, convention=basis.normalization)


def fpc_basis(sample: FunctionalSample, k: int) -> BasisSet:
    """Top-k eigenfunctions of the empirical covariance of the curves.

    Columns are centered before the decomposition.  Rows come back ordered
    by decreasing eigenvalue, unit-normalized under the l2-weighted
    convention, with the sign fixed so each row's largest-magnitude entry
    is positive.  If the sample supports fewer than k positive
    eigenvalues the basis is truncated and flagged.
    """
    n, m = sample.curves.shape
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > min(n - 1, m):
        raise ValueError(f"k={k} exceeds min(n-1, m)={min(n - 1, m)}")
    grid = sample.grid
    Xc = sample.curves - sample.curves.mean(axis=0)
    if k == 0:
        return BasisSet(
            grid=grid,
            functions=np.zeros((0, m)),
            method="fpc",
            eigenvalues=np.zeros(0),
        )
    if n < m:
        # dual Gram route: eigenvectors of Xc Xc' map to covariance
        # eigenvectors through Xc' u / ||Xc' u||
        G = Xc @ Xc.T
        evals, evecs = np.linalg.eigh(G)
    else:
        S = Xc.T @ Xc
        evals, evecs = np.linalg.eigh(S)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    tol = max(evals[0], 0.0) * 1e-12 + 1e-300
    n_pos = int(np.sum(evals > tol))
    k_eff = min(k, n_pos)
    funcs = np.empty((k_eff, m))
    for i in range(k_eff):
        if n < m:
            v = Xc.T @ evecs[:, i]
            v = v / np.linalg.norm(v)
        else:
            v = evecs[:, i]
        f = v / np.sqrt(grid.dt)  # unit l2-weighted norm
        j = int(np.argmax(np.abs(f)))
        if f[j] < 0:
            f = -f
        funcs[i] = f
    # operator eigenvalues: covariance matrix eigenvalues carry 1/(n-1)
    # and the quadrature weight
    op_evals = evals[:k_eff] / (n - 1) * grid.dt
    return BasisSet(
        grid=grid,
        functions=funcs,
        method="fpc",
        eigenvalues=op_evals,
        truncated=k_eff < k,
    )
