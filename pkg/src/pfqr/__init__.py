"""Partial functional linear quantile regression.

Response-adapted basis extraction for scalar-on-function regression
(quantile, composite-quantile, and least-squares flavors), the classical
fPC and functional-PLS baselines, and a Monte-Carlo benchmark harness.
"""

from ._backend import backend_name
from .errors import (
    AllZeroDirection,
    ConfigError,
    DegenerateColumn,
    DegenerateProbe,
    DegenerateScore,
    DimensionMismatch,
    GridMismatch,
    InsufficientRank,
    PfqrError,
    RankDeficientDesign,
    SolverDiverged,
)
from .fgrid import (
    GRID_SUM,
    L2_WEIGHTED,
    BasisSet,
    ColumnStandardizer,
    FunctionalSample,
    Grid,
    ScoreMatrix,
    center_columns,
    fpc_basis,
    inner_product,
    project,
    standardize_columns,
)
from .qsolve import CheckLossSpec, LinearFit, check_loss, fit_cqr, fit_ls, fit_qr

__version__ = "0.1.0"

__all__ = [
    "AllZeroDirection",
    "BasisSet",
    "CheckLossSpec",
    "ColumnStandardizer",
    "ConfigError",
    "DegenerateColumn",
    "DegenerateProbe",
    "DegenerateScore",
    "DimensionMismatch",
    "FunctionalSample",
    "GRID_SUM",
    "Grid",
    "GridMismatch",
    "InsufficientRank",
    "L2_WEIGHTED",
    "LinearFit",
    "PfqrError",
    "RankDeficientDesign",
    "ScoreMatrix",
    "SolverDiverged",
    "backend_name",
    "center_columns",
    "check_loss",
    "fit_cqr",
    "fit_ls",
    "fit_qr",
    "fpc_basis",
    "inner_product",
    "project",
    "standardize_columns",
]
