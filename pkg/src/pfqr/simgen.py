"""Synthetic designs with known ground truth.

Design one: curves built from 50 cosine harmonics with polynomially
decaying loadings and a cosine-series coefficient function, observed on
a fixed 201-point grid.  Design two: curves come from an external source
(or a smooth synthetic substitute), and the coefficient function is
built from a window of the source's own empirical eigenfunctions, which
makes the problem progressively hostile to principal-component bases as
the window moves deeper into the spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientRank
from .fgrid import FunctionalSample, Grid, fpc_basis
from .ioutil import read_curves_csv

SIM1_M = 201
SIM1_J = 50
SIM2_M = 256
SIM2_J = 20

GAUSSIAN = "gaussian"
CAUCHY = "cauchy"

SIM2_CASES = {"i": (1, 5), "ii": (6, 10), "iii": (11, 15), "iv": (16, 20)}


def sample_error(law: str, n: int, seed) -> np.ndarray:
    """n error draws; deterministic per seed."""
    return _sample_error_rng(law, n, np.random.default_rng(seed))


def _sample_error_rng(law: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if law == GAUSSIAN:
        return rng.standard_normal(n)
    if law == CAUCHY:
        u = rng.uniform(size=n)
        return np.tan(np.pi * (u - 0.5))
    raise ValueError(f"unknown error law {law!r}")


@dataclass
class Sim1Design:
    """First simulation design: n curves, Gaussian or Cauchy noise."""

    n: int
    error: str = GAUSSIAN
    seed: object = 0

    def __post_init__(self):
        if self.error not in (GAUSSIAN, CAUCHY):
            raise ValueError(f"unknown error law {self.error!r}")
        if self.n < 2:
            raise ValueError("n must be at least 2")


@dataclass
class SimData:
    """A generated sample plus everything the truth is made of."""

    sample: FunctionalSample
    gamma_true: np.ndarray
    noiseless: np.ndarray
    errors: np.ndarray
    error_scale: float = 1.0


def sim1_grid() -> Grid:
    return Grid.regular(SIM1_M)


def sim1_gamma_coefficients() -> np.ndarray:
    j = np.arange(1, SIM1_J + 1, dtype=float)
    g = (20.0 / 3.0) * ((-1.0) ** (j + 1)) * j**-2.0
    g[0] = 0.5
    return g


def sim1_basis(grid: Grid) -> np.ndarray:
    """Rows: sqrt(2) cos(j pi t) for j = 1..50."""
    j = np.arange(1, SIM1_J + 1, dtype=float)
    return math.sqrt(2.0) * np.cos(np.outer(j, np.pi * grid.points))


def sim1_gamma(grid: Grid) -> np.ndarray:
    return sim1_gamma_coefficients() @ sim1_basis(grid)


def gen_sim1(design: Sim1Design) -> SimData:
    """Curves Z_i = sum_j v_j U_ij phi_j, responses by the l2-weighted
    quadrature of the true coefficient function plus noise."""
    grid = sim1_grid()
    rng = np.random.default_rng(design.seed)
    j = np.arange(1, SIM1_J + 1, dtype=float)
    v = ((-1.0) ** (j + 1)) * j ** (-1.1 / 2.0)
    U = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(design.n, SIM1_J))
    phi = sim1_basis(grid)
    curves = (U * v) @ phi
    gamma = sim1_gamma(grid)
    noiseless = grid.dt * (curves @ gamma)
    errors = _sample_error_rng(design.error, design.n, rng)
    sample = FunctionalSample(grid=grid, curves=curves, responses=noiseless + errors)
    return SimData(
        sample=sample, gamma_true=gamma, noiseless=noiseless, errors=errors
    )


@dataclass
class Sim2Design:
    """Second simulation design: source curves plus an eigenfunction-
    window coefficient function.

    ``source_path`` supplies real curves as CSV; without it a smooth
    synthetic substitute is generated (sums of 30 damped cosines with
    exponentially decaying random amplitudes).  ``scale_multiplier``
    times the empirical sd of the true responses gives the error scale;
    the default follows the reference protocol.
    """

    case: str = "i"
    n: int = 400
    error: str = GAUSSIAN
    seed: object = 0
    source_path: str | None = None
    source_seed: object = 2024
    scale_multiplier: float = math.sqrt(5.0)
    source_curves: np.ndarray | None = field(default=None, repr=False)
    source_grid: Grid | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.case not in SIM2_CASES:
            raise ValueError(f"case must be one of {sorted(SIM2_CASES)}")
        if self.error not in (GAUSSIAN, CAUCHY):
            raise ValueError(f"unknown error law {self.error!r}")


def synthetic_source_curves(n: int, m: int, seed) -> np.ndarray:
    """Smooth stand-in curves: 30 damped cosines per subject with
    amplitude scales decaying geometrically in the harmonic index."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, m)
    h = np.arange(1, 31, dtype=float)
    comps = np.cos(np.outer(h, np.pi * grid)) * np.exp(-np.outer(h, grid) / 10.0)
    amps = rng.standard_normal(size=(n, 30)) * (0.85**h)
    return amps @ comps


def _load_source(design: Sim2Design) -> tuple[Grid, np.ndarray]:
    if design.source_curves is not None:
        grid = design.source_grid or Grid.regular(design.source_curves.shape[1])
        return grid, design.source_curves
    if design.source_path is not None:
        return read_curves_csv(design.source_path)
    curves = synthetic_source_curves(design.n, SIM2_M, design.source_seed)
    return Grid.regular(SIM2_M), curves


def gen_sim2(design: Sim2Design) -> SimData:
    """Responses from a coefficient function living on eigenfunctions
    lo..hi of the source curves; errors scaled to the true-response sd
    times the design multiplier."""
    grid, curves = _load_source(design)
    sample0 = FunctionalSample(grid=grid, curves=curves)
    basis = fpc_basis(sample0, SIM2_J)
    if basis.k < SIM2_J:
        raise InsufficientRank(
            f"source supports only {basis.k} positive eigenvalues, need {SIM2_J}"
        )
    lo, hi = SIM2_CASES[design.case]
    j = np.arange(1, SIM2_J + 1)
    a = ((-1.0) ** j) * ((j >= lo) & (j <= hi))
    gamma = a @ basis.functions
    noiseless = grid.dt * (curves @ gamma)
    scale = float(np.std(noiseless, ddof=1)) * design.scale_multiplier
    rng = np.random.default_rng(design.seed)
    errors = scale * _sample_error_rng(design.error, curves.shape[0], rng)
    sample = FunctionalSample(grid=grid, curves=curves, responses=noiseless + errors)
    return SimData(
        sample=sample,
        gamma_true=gamma,
        noiseless=noiseless,
        errors=errors,
        error_scale=scale,
    )
