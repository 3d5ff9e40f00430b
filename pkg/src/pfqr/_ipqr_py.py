"""Pure-numpy interior-point kernels for check-loss regression.

This is the fallback backend; ``pfqr._ipqr`` (Cython) implements the same
algorithm with typed loops.  Both solve

    min_theta  sum_r rho_{tau_r}(y_r - A_r . theta)

via a Mehrotra predictor-corrector method on the bounded-variable dual

    max  y'x   s.t.  A'x = A'(1 - tau),  0 <= x <= 1,

whose equality multipliers are the regression coefficients.  ``cqr_ip``
solves the composite problem with per-level intercepts and shared slopes
without materializing the (L*n)-row stacked design: the normal matrix is
an arrow (diagonal intercept block plus a dense border), solved by Schur
complement.
"""

from __future__ import annotations

import numpy as np

_ETA = 0.9995  # step damping toward the boundary
_STALL = 1e-14


def _spd_solve(M: np.ndarray, rhs: np.ndarray):
    """Solve the (small, SPD) normal system, with jitter retries.

    Returns None when M stays numerically singular.
    """
    d = M.shape[0]
    if d == 0:
        return np.zeros(0)
    base = float(np.trace(M)) / d
    jitter = 0.0
    eye = np.eye(d)
    for _ in range(4):
        try:
            return np.linalg.solve(M + jitter * eye, rhs)
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-13 * max(base, 1.0))
    return None


def _step_to_boundary(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha with v + alpha*dv >= 0 elementwise, capped at 1e12."""
    neg = dv < 0
    if not np.any(neg):
        return 1e12
    return float(np.min(v[neg] / -dv[neg]))


def check_loss_value(u: np.ndarray, taus) -> float:
    u = np.asarray(u, dtype=float)
    taus = np.broadcast_to(np.asarray(taus, dtype=float), u.shape)
    return float(np.sum(u * (taus - (u < 0))))


def qr_ip(
    A: np.ndarray,
    y: np.ndarray,
    taus,
    tol: float = 1e-8,
    max_iter: int = 500,
    nu0: np.ndarray | None = None,
):
    """Interior-point solve of the per-row-level check-loss regression.

    Returns (coef, iterations, gap, converged).
    """
    A = np.ascontiguousarray(A, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    taus = np.broadcast_to(np.asarray(taus, dtype=float), y.shape)
    n, d = A.shape

    x = (1.0 - taus).copy()
    s = 1.0 - x
    if nu0 is not None:
        nu = np.asarray(nu0, dtype=float).copy()
    else:
        nu, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ nu
    delta = 0.1 * (1.0 + float(np.mean(np.abs(r))))
    z = np.maximum(-r, 0.0) + delta
    w = np.maximum(r, 0.0) + delta

    it = 0
    gap = float(x @ z + s @ w)
    converged = False
    while it < max_iter:
        dual_obj = float(y @ (x - (1.0 - taus)))
        if gap < tol * (1.0 + abs(dual_obj)):
            converged = True
            break
        it += 1

        q = 1.0 / (z / x + w / s)
        M = A.T @ (A * q[:, None])

        # predictor (affine) direction
        g = w - z
        dnu = _spd_solve(M, A.T @ (q * g))
        if dnu is None:
            break
        dx = q * (g - A @ dnu)
        dz = -z - (z / x) * dx
        dw = -w + (w / s) * dx

        ap = min(1.0, _step_to_boundary(x, dx), _step_to_boundary(s, -dx))
        ad = min(1.0, _step_to_boundary(z, dz), _step_to_boundary(w, dw))

        mu = gap / (2.0 * n)
        mu_aff = (
            (x + ap * dx) @ (z + ad * dz) + (s - ap * dx) @ (w + ad * dw)
        ) / (2.0 * n)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        rc1 = -x * z + sigma * mu - dx * dz
        rc2 = -s * w + sigma * mu + dx * dw
        g = rc1 / x - rc2 / s
        dnu = _spd_solve(M, A.T @ (q * g))
        if dnu is None:
            break
        dx = q * (g - A @ dnu)
        dz = (rc1 - z * dx) / x
        dw = (rc2 + w * dx) / s

        ap = min(_step_to_boundary(x, dx), _step_to_boundary(s, -dx))
        ad = min(_step_to_boundary(z, dz), _step_to_boundary(w, dw))
        if ap <= _STALL or ad <= _STALL:
            break
        ap = min(1.0, _ETA * ap)
        ad = min(1.0, _ETA * ad)

        x = x + ap * dx
        s = s - ap * dx
        nu = nu + ad * dnu
        z = z + ad * dz
        w = w + ad * dw
        gap = float(x @ z + s @ w)

    if not converged:
        dual_obj = float(y @ (x - (1.0 - taus)))
        converged = gap < tol * (1.0 + abs(dual_obj))
    return nu, it, gap, converged


def cqr_ip(
    X: np.ndarray,
    y: np.ndarray,
    levels,
    tol: float = 1e-8,
    max_iter: int = 500,
):
    """Composite check-loss fit: per-level intercepts, shared slopes.

    Solves min over (alpha_1..alpha_L, theta) of
    sum_l sum_i rho_{tau_l}(y_i - alpha_l - x_i . theta) on the implicit
    (L*n)-row stacked design.  Returns (alphas, theta, iterations, gap,
    converged).
    """
    y = np.ascontiguousarray(y, dtype=float)
    n = y.size
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        X = X.reshape(n, -1)
    levels = np.asarray(levels, dtype=float)
    L_, dx = levels.size, X.shape[1]

    taus = levels[:, None]
    Y = np.broadcast_to(y, (L_, n))

    x = np.broadcast_to(1.0 - taus, (L_, n)).copy()
    s = 1.0 - x

    ones = np.ones((n, 1))
    ls_design = np.hstack([ones, X]) if dx else ones
    coef0, *_ = np.linalg.lstsq(ls_design, y, rcond=None)
    alphas = np.full(L_, coef0[0])
    theta = coef0[1:].copy()

    def a_dot(da: np.ndarray, dth: np.ndarray) -> np.ndarray:
        if dx:
            return da[:, None] + (X @ dth)[None, :]
        return np.repeat(da[:, None], n, axis=1)

    def at_dot(V: np.ndarray):
        return V.sum(axis=1), (X.T @ V.sum(axis=0) if dx else np.zeros(0))

    def solve_arrow(q: np.ndarray, r1: np.ndarray, r2: np.ndarray):
        Q1 = q.sum(axis=1)
        if np.any(Q1 <= 0.0):
            return None
        if dx:
            C = q @ X
            qc = q.sum(axis=0)
            S = X.T @ (X * qc[:, None])
            dth = _spd_solve(S - C.T @ (C / Q1[:, None]), r2 - C.T @ (r1 / Q1))
            if dth is None:
                return None
            da = (r1 - C @ dth) / Q1
        else:
            dth = np.zeros(0)
            da = r1 / Q1
        return da, dth

    r = Y - a_dot(alphas, theta)
    delta = 0.1 * (1.0 + float(np.mean(np.abs(r))))
    z = np.maximum(-r, 0.0) + delta
    w = np.maximum(r, 0.0) + delta

    N = L_ * n
    it = 0
    gap = float(np.sum(x * z) + np.sum(s * w))
    converged = False
    while it < max_iter:
        dual_obj = float(np.sum(Y * (x - (1.0 - taus))))
        if gap < tol * (1.0 + abs(dual_obj)):
            converged = True
            break
        it += 1

        q = 1.0 / (z / x + w / s)

        g = w - z
        r1, r2 = at_dot(q * g)
        sol = solve_arrow(q, r1, r2)
        if sol is None:
            break
        da, dth = sol
        dxm = q * (g - a_dot(da, dth))
        dz = -z - (z / x) * dxm
        dw = -w + (w / s) * dxm

        ap = min(
            1.0,
            _step_to_boundary(x.ravel(), dxm.ravel()),
            _step_to_boundary(s.ravel(), -dxm.ravel()),
        )
        ad = min(
            1.0,
            _step_to_boundary(z.ravel(), dz.ravel()),
            _step_to_boundary(w.ravel(), dw.ravel()),
        )

        mu = gap / (2.0 * N)
        mu_aff = (
            np.sum((x + ap * dxm) * (z + ad * dz))
            + np.sum((s - ap * dxm) * (w + ad * dw))
        ) / (2.0 * N)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        rc1 = -x * z + sigma * mu - dxm * dz
        rc2 = -s * w + sigma * mu + dxm * dw
        g = rc1 / x - rc2 / s
        r1, r2 = at_dot(q * g)
        sol = solve_arrow(q, r1, r2)
        if sol is None:
            break
        da, dth = sol
        dxm = q * (g - a_dot(da, dth))
        dz = (rc1 - z * dxm) / x
        dw = (rc2 + w * dxm) / s

        ap = min(
            _step_to_boundary(x.ravel(), dxm.ravel()),
            _step_to_boundary(s.ravel(), -dxm.ravel()),
        )
        ad = min(
            _step_to_boundary(z.ravel(), dz.ravel()),
            _step_to_boundary(w.ravel(), dw.ravel()),
        )
        if ap <= _STALL or ad <= _STALL:
            break
        ap = min(1.0, _ETA * ap)
        ad = min(1.0, _ETA * ad)

        x = x + ap * dxm
        s = s - ap * dxm
        alphas = alphas + ad * da
        if dx:
            theta = theta + ad * dth
        z = z + ad * dz
        w = w + ad * dw
        gap = float(np.sum(x * z) + np.sum(s * w))

    if not converged:
        dual_obj = float(np.sum(Y * (x - (1.0 - taus))))
        converged = gap < tol * (1.0 + abs(dual_obj))
    return alphas, theta, it, gap, converged


def smoothed_qr(
    A: np.ndarray,
    y: np.ndarray,
    taus,
    theta0: np.ndarray | None = None,
    eps_start: float = 1e-2,
    eps_end: float = 1e-8,
    inner_iter: int = 300,
):
    """Majorize-minimize fallback on the smoothed check loss.

    Iteratively reweighted least squares with |u| majorized by
    u^2 / (2(eps + |u_k|)) + const, annealing eps from eps_start down to
    eps_end (both relative to the residual scale) in factor-10 stages.
    Returns (coef, iterations, converged).
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    taus = np.broadcast_to(np.asarray(taus, dtype=float), y.shape)
    if theta0 is None:
        theta, *_ = np.linalg.lstsq(A, y, rcond=None)
    else:
        theta = np.asarray(theta0, dtype=float).copy()
    scale = 1.0 + float(np.median(np.abs(y - A @ theta)))
    it = 0
    converged = True
    eps = eps_start * scale
    eps_floor = eps_end * scale
    while True:
        stage_done = False
        for _ in range(inner_iter):
            it += 1
            u = y - A @ theta
            wts = 1.0 / (eps + np.abs(u))
            M = A.T @ (A * wts[:, None])
            new = _spd_solve(M, A.T @ (wts * y + (taus - 0.5)))
            if new is None:
                return theta, it, False
            step = float(np.max(np.abs(new - theta))) if theta.size else 0.0
            theta = new
            if step < 1e-6 * eps + 1e-12 * scale:
                stage_done = True
                break
        if not stage_done:
            converged = False
        if eps <= eps_floor:
            break
        eps = max(eps * 0.1, eps_floor)
    return theta, it, converged
