"""Independent brute-force oracles used by the test suite.

These deliberately avoid the package's solver path: the LAD oracle
enumerates point-pair lines (every basic LP solution interpolates two
data points), the composite oracle scans a slope lattice with exact
per-level intercepts, and the least-squares oracle solves the normal
equations directly.
"""

import numpy as np


def check_loss_sum(u, tau):
    u = np.asarray(u, dtype=float)
    return float(np.sum(u * (tau - (u < 0))))


def lad_point_pair_oracle(x, y):
    """Best intercept+slope LAD fit by enumerating all point-pair lines.

    Valid for designs [1, x] with at least two distinct x values: some
    optimal vertex of the LAD linear program interpolates two points.
    Returns (intercept, slope, objective).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    best = (None, None, np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            if x[i] == x[j]:
                continue
            slope = (y[j] - y[i]) / (x[j] - x[i])
            inter = y[i] - slope * x[i]
            obj = check_loss_sum(y - inter - slope * x, 0.5)
            if obj < best[2]:
                best = (inter, slope, obj)
    return best


def median_vertex_slope_oracle(x, y):
    """Slope of the LAD-optimal point-pair line (for covariance checks)."""
    inter, slope, obj = lad_point_pair_oracle(x, y)
    return slope


def exact_level_intercepts(resid_grid, levels):
    """For residuals r (n, S) and each level, the exact 1-d check-loss
    minimizing intercept per slope column (an order statistic)."""
    return [
        np.quantile(resid_grid, t, axis=0, method="inverted_cdf") for t in levels
    ]


def cqr_lattice_oracle(x, y, levels, slope_lo, slope_hi, step=0.001):
    """Composite fit by scanning slopes on a lattice; intercepts decouple
    per level given the slope and are minimized exactly.

    Returns (best_objective, best_slope, best_intercepts).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float)
    slopes = np.arange(slope_lo, slope_hi + step / 2, step)
    R = y[:, None] - np.outer(x, slopes)  # (n, S)
    total = np.zeros(slopes.size)
    alphas = []
    for t in levels:
        a = np.quantile(R, t, axis=0, method="inverted_cdf")
        alphas.append(a)
        u = R - a[None, :]
        total += np.sum(u * (t - (u < 0)), axis=0)
    k = int(np.argmin(total))
    return float(total[k]), float(slopes[k]), [float(a[k]) for a in alphas]


def normal_equations_ls(design, y):
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.linalg.solve(design.T @ design, design.T @ y)
