# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled interior-point kernels for check-loss regression.

Same algorithm as ``pfqr._ipqr_py`` (the numpy reference): a Mehrotra
predictor-corrector on the bounded-variable dual of the check-loss LP.
The composite solver exploits the arrow structure of the normal matrix
(diagonal intercept block plus dense border) so one iteration costs
O(L*n*dx^2) instead of O(L*n*(L+dx)^2).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double ETA = 0.9995
cdef double STALL = 1e-14


cdef int _chol_factor(double[:, ::1] M, int d) noexcept nogil:
    """In-place lower Cholesky; returns nonzero on failure."""
    cdef int i, j, k
    cdef double acc
    for j in range(d):
        acc = M[j, j]
        for k in range(j):
            acc -= M[j, k] * M[j, k]
        if acc <= 0.0:
            return 1
        M[j, j] = sqrt(acc)
        for i in range(j + 1, d):
            acc = M[i, j]
            for k in range(j):
                acc -= M[i, k] * M[j, k]
            M[i, j] = acc / M[j, j]
    return 0


cdef void _chol_solve(double[:, ::1] L, double[::1] b, double[::1] out, int d) noexcept nogil:
    cdef int i, k
    cdef double acc
    for i in range(d):
        acc = b[i]
        for k in range(i):
            acc -= L[i, k] * out[k]
        out[i] = acc / L[i, i]
    for i in range(d - 1, -1, -1):
        acc = out[i]
        for k in range(i + 1, d):
            acc -= L[k, i] * out[k]
        out[i] = acc / L[i, i]


cdef int _factor_with_jitter(double[:, ::1] M, double[:, ::1] F, int d) noexcept nogil:
    """Copy M into F and factor, retrying with escalating ridge."""
    cdef int i, j, attempt
    cdef double tr = 0.0, jitter = 0.0
    for i in range(d):
        tr += M[i, i]
    tr = tr / d if d > 0 else 1.0
    if tr < 1.0:
        tr = 1.0
    for attempt in range(4):
        for i in range(d):
            for j in range(d):
                F[i, j] = M[i, j]
            F[i, i] += jitter
        if _chol_factor(F, d) == 0:
            return 0
        jitter = jitter * 100.0 if jitter > 0.0 else 1e-13 * tr
    return 1


def qr_ip(A, y, taus, double tol=1e-8, int max_iter=500, nu0=None):
    """Per-row-level check-loss regression; returns (coef, it, gap, conv)."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] A_ = np.ascontiguousarray(A, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1, mode="c"] y_ = np.ascontiguousarray(y_arr)
    t_arr = np.broadcast_to(np.asarray(taus, dtype=np.float64), y_arr.shape)
    cdef cnp.ndarray[double, ndim=1, mode="c"] tau_ = np.ascontiguousarray(t_arr)
    cdef int n = A_.shape[0], d = A_.shape[1]

    cdef cnp.ndarray[double, ndim=1, mode="c"] nu_
    if nu0 is not None:
        nu_ = np.ascontiguousarray(np.asarray(nu0, dtype=np.float64).ravel())
    else:
        nu_ = np.empty(d)
        _normal_equations_init(A_, y_, nu_)

    x = np.empty(n); s = np.empty(n); z = np.empty(n); w = np.empty(n)
    q = np.empty(n); g = np.empty(n); dx = np.empty(n); dz = np.empty(n)
    dw = np.empty(n); rc1 = np.empty(n); rc2 = np.empty(n)
    M = np.empty((d, d)); F = np.empty((d, d))
    rhs = np.empty(d); dnu = np.empty(d); adnu = np.empty(n)

    cdef double[::1] xv = x, sv = s, zv = z, wv = w, qv = q, gv = g
    cdef double[::1] dxv = dx, dzv = dz, dwv = dw, rc1v = rc1, rc2v = rc2
    cdef double[::1] rhsv = rhs, dnuv = dnu, adnuv = adnu
    cdef double[:, ::1] Mv = M, Fv = F
    cdef double[:, ::1] Av = A_
    cdef double[::1] yv = y_, tv = tau_, nuv = nu_

    cdef int i, j, k, it = 0, converged = 0, fail = 0
    cdef double r, delta, gap, dual_obj, mu, mu_aff, sigma
    cdef double ap, ad, cand, acc

    delta = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += Av[i, j] * nuv[j]
        r = yv[i] - acc
        gv[i] = r  # reuse g as residual scratch
        delta += fabs(r)
    delta = 0.1 * (1.0 + delta / n)
    for i in range(n):
        r = gv[i]
        xv[i] = 1.0 - tv[i]
        sv[i] = tv[i]
        zv[i] = (-r if r < 0.0 else 0.0) + delta
        wv[i] = (r if r > 0.0 else 0.0) + delta

    gap = 0.0
    for i in range(n):
        gap += xv[i] * zv[i] + sv[i] * wv[i]

    while it < max_iter:
        dual_obj = 0.0
        for i in range(n):
            dual_obj += yv[i] * (xv[i] - (1.0 - tv[i]))
        if gap < tol * (1.0 + fabs(dual_obj)):
            converged = 1
            break
        it += 1

        for i in range(n):
            qv[i] = 1.0 / (zv[i] / xv[i] + wv[i] / sv[i])
        # M = A' diag(q) A (lower triangle then mirror)
        for j in range(d):
            for k in range(j + 1):
                Mv[j, k] = 0.0
        for i in range(n):
            for j in range(d):
                acc = qv[i] * Av[i, j]
                for k in range(j + 1):
                    Mv[j, k] += acc * Av[i, k]
        for j in range(d):
            for k in range(j):
                Mv[k, j] = Mv[j, k]
        if _factor_with_jitter(Mv, Fv, d):
            fail = 1
            break

        # predictor
        for i in range(n):
            gv[i] = wv[i] - zv[i]
        for j in range(d):
            acc = 0.0
            for i in range(n):
                acc += Av[i, j] * qv[i] * gv[i]
            rhsv[j] = acc
        _chol_solve(Fv, rhsv, dnuv, d)
        ap = 1e12
        ad = 1e12
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += Av[i, j] * dnuv[j]
            adnuv[i] = acc
            dxv[i] = qv[i] * (gv[i] - acc)
            dzv[i] = -zv[i] - (zv[i] / xv[i]) * dxv[i]
            dwv[i] = -wv[i] + (wv[i] / sv[i]) * dxv[i]
            if dxv[i] < 0.0:
                cand = xv[i] / -dxv[i]
                if cand < ap: ap = cand
            elif dxv[i] > 0.0:
                cand = sv[i] / dxv[i]
                if cand < ap: ap = cand
            if dzv[i] < 0.0:
                cand = zv[i] / -dzv[i]
                if cand < ad: ad = cand
            if dwv[i] < 0.0:
                cand = wv[i] / -dwv[i]
                if cand < ad: ad = cand
        if ap > 1.0: ap = 1.0
        if ad > 1.0: ad = 1.0

        mu = gap / (2.0 * n)
        mu_aff = 0.0
        for i in range(n):
            mu_aff += (xv[i] + ap * dxv[i]) * (zv[i] + ad * dzv[i])
            mu_aff += (sv[i] - ap * dxv[i]) * (wv[i] + ad * dwv[i])
        mu_aff /= 2.0 * n
        if mu > 0.0:
            sigma = (mu_aff / mu) ** 3
            if sigma > 1.0: sigma = 1.0
            if sigma < 0.0: sigma = 0.0
        else:
            sigma = 0.0

        # corrector (same factorization)
        for i in range(n):
            rc1v[i] = -xv[i] * zv[i] + sigma * mu - dxv[i] * dzv[i]
            rc2v[i] = -sv[i] * wv[i] + sigma * mu + dxv[i] * dwv[i]
            gv[i] = rc1v[i] / xv[i] - rc2v[i] / sv[i]
        for j in range(d):
            acc = 0.0
            for i in range(n):
                acc += Av[i, j] * qv[i] * gv[i]
            rhsv[j] = acc
        _chol_solve(Fv, rhsv, dnuv, d)
        ap = 1e12
        ad = 1e12
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += Av[i, j] * dnuv[j]
            dxv[i] = qv[i] * (gv[i] - acc)
            dzv[i] = (rc1v[i] - zv[i] * dxv[i]) / xv[i]
            dwv[i] = (rc2v[i] + wv[i] * dxv[i]) / sv[i]
            if dxv[i] < 0.0:
                cand = xv[i] / -dxv[i]
                if cand < ap: ap = cand
            elif dxv[i] > 0.0:
                cand = sv[i] / dxv[i]
                if cand < ap: ap = cand
            if dzv[i] < 0.0:
                cand = zv[i] / -dzv[i]
                if cand < ad: ad = cand
            if dwv[i] < 0.0:
                cand = wv[i] / -dwv[i]
                if cand < ad: ad = cand
        if ap <= STALL or ad <= STALL:
            break
        ap = ETA * ap
        if ap > 1.0: ap = 1.0
        ad = ETA * ad
        if ad > 1.0: ad = 1.0

        gap = 0.0
        for i in range(n):
            xv[i] += ap * dxv[i]
            sv[i] -= ap * dxv[i]
            zv[i] += ad * dzv[i]
            wv[i] += ad * dwv[i]
            gap += xv[i] * zv[i] + sv[i] * wv[i]
        for j in range(d):
            nuv[j] += ad * dnuv[j]

    if not converged and not fail:
        dual_obj = 0.0
        for i in range(n):
            dual_obj += yv[i] * (xv[i] - (1.0 - tv[i]))
        converged = gap < tol * (1.0 + fabs(dual_obj))
    return nu_, it, gap, bool(converged)


cdef void _normal_equations_init(double[:, ::1] A, double[::1] y, double[::1] out) noexcept:
    cdef int n = A.shape[0], d = A.shape[1]
    cdef int i, j, k
    M = np.zeros((d, d))
    F = np.empty((d, d))
    rhs = np.zeros(d)
    cdef double[:, ::1] Mv = M, Fv = F
    cdef double[::1] rhsv = rhs
    cdef double acc
    for i in range(n):
        for j in range(d):
            acc = A[i, j]
            for k in range(j + 1):
                Mv[j, k] += acc * A[i, k]
            rhsv[j] += acc * y[i]
    for j in range(d):
        for k in range(j):
            Mv[k, j] = Mv[j, k]
    if _factor_with_jitter(Mv, Fv, d):
        for j in range(d):
            out[j] = 0.0
        return
    _chol_solve(Fv, rhsv, out, d)


def cqr_ip(X, y, levels, double tol=1e-8, int max_iter=500):
    """Composite fit (per-level intercepts, shared slopes); returns
    (alphas, theta, it, gap, conv)."""
    cdef cnp.ndarray[double, ndim=1, mode="c"] y_ = np.ascontiguousarray(
        np.asarray(y, dtype=np.float64).ravel())
    cdef int n = y_.shape[0]
    X_arr = np.asarray(X, dtype=np.float64)
    if X_arr.ndim != 2:
        X_arr = X_arr.reshape(n, -1)
    cdef cnp.ndarray[double, ndim=2, mode="c"] X_ = np.ascontiguousarray(X_arr)
    cdef cnp.ndarray[double, ndim=1, mode="c"] lv_ = np.ascontiguousarray(
        np.asarray(levels, dtype=np.float64).ravel())
    cdef int L = lv_.shape[0], dx = X_.shape[1]
    cdef int N = L * n

    # initial point: least squares with a common intercept
    ones = np.ones((n, 1))
    ls_design = np.hstack([ones, X_]) if dx else ones
    coef0, *_ = np.linalg.lstsq(ls_design, y_, rcond=None)
    alphas = np.full(L, coef0[0])
    theta = np.ascontiguousarray(coef0[1:])

    x = np.empty((L, n)); s = np.empty((L, n)); z = np.empty((L, n))
    w = np.empty((L, n)); q = np.empty((L, n)); g = np.empty((L, n))
    dxm = np.empty((L, n)); dz = np.empty((L, n)); dw = np.empty((L, n))
    rc1 = np.empty((L, n)); rc2 = np.empty((L, n))
    xth = np.empty(n)       # X @ theta (current), then X @ dth scratch
    Q1 = np.empty(L); r1 = np.empty(L); da = np.empty(L)
    C = np.empty((L, dx)) if dx else np.empty((L, 0))
    qc = np.empty(n)
    S = np.empty((dx, dx)); F = np.empty((dx, dx))
    r2 = np.empty(dx); dth = np.empty(dx); rt = np.empty(dx)

    cdef double[:, ::1] xv = x, sv = s, zv = z, wv = w, qv = q, gv = g
    cdef double[:, ::1] dxv = dxm, dzv = dz, dwv = dw, rc1v = rc1, rc2v = rc2
    cdef double[:, ::1] Cv = C, Sv = S, Fv = F
    cdef double[::1] q1v = Q1, r1v = r1, dav = da, qcv = qc
    cdef double[::1] r2v = r2, dthv = dth, rtv = rt, xthv = xth
    cdef double[:, ::1] Xv = X_
    cdef double[::1] yv = y_, lv = lv_
    cdef double[::1] av = alphas, thv = theta

    cdef int i, j, k, l, it = 0, converged = 0, fail = 0
    cdef double r, delta, gap, dual_obj, mu, mu_aff, sigma
    cdef double ap, ad, cand, acc, tau

    for i in range(n):
        acc = 0.0
        for j in range(dx):
            acc += Xv[i, j] * thv[j]
        xthv[i] = acc
    delta = 0.0
    for l in range(L):
        for i in range(n):
            r = yv[i] - av[l] - xthv[i]
            gv[l, i] = r
            delta += fabs(r)
    delta = 0.1 * (1.0 + delta / N)
    for l in range(L):
        tau = lv[l]
        for i in range(n):
            r = gv[l, i]
            xv[l, i] = 1.0 - tau
            sv[l, i] = tau
            zv[l, i] = (-r if r < 0.0 else 0.0) + delta
            wv[l, i] = (r if r > 0.0 else 0.0) + delta

    gap = 0.0
    for l in range(L):
        for i in range(n):
            gap += xv[l, i] * zv[l, i] + sv[l, i] * wv[l, i]

    while it < max_iter:
        dual_obj = 0.0
        for l in range(L):
            tau = lv[l]
            for i in range(n):
                dual_obj += yv[i] * (xv[l, i] - (1.0 - tau))
        if gap < tol * (1.0 + fabs(dual_obj)):
            converged = 1
            break
        it += 1

        for l in range(L):
            for i in range(n):
                qv[l, i] = 1.0 / (zv[l, i] / xv[l, i] + wv[l, i] / sv[l, i])

        # ---- predictor ----
        for l in range(L):
            for i in range(n):
                gv[l, i] = wv[l, i] - zv[l, i]
        if _arrow_solve(Xv, qv, gv, qcv, q1v, Cv, Sv, Fv, r1v, r2v, rtv,
                        dav, dthv, xthv, L, n, dx):
            fail = 1
            break
        ap = 1e12
        ad = 1e12
        for l in range(L):
            for i in range(n):
                acc = dav[l] + xthv[i]  # xthv holds X @ dth from the solve
                dxv[l, i] = qv[l, i] * (gv[l, i] - acc)
                dzv[l, i] = -zv[l, i] - (zv[l, i] / xv[l, i]) * dxv[l, i]
                dwv[l, i] = -wv[l, i] + (wv[l, i] / sv[l, i]) * dxv[l, i]
                if dxv[l, i] < 0.0:
                    cand = xv[l, i] / -dxv[l, i]
                    if cand < ap: ap = cand
                elif dxv[l, i] > 0.0:
                    cand = sv[l, i] / dxv[l, i]
                    if cand < ap: ap = cand
                if dzv[l, i] < 0.0:
                    cand = zv[l, i] / -dzv[l, i]
                    if cand < ad: ad = cand
                if dwv[l, i] < 0.0:
                    cand = wv[l, i] / -dwv[l, i]
                    if cand < ad: ad = cand
        if ap > 1.0: ap = 1.0
        if ad > 1.0: ad = 1.0

        mu = gap / (2.0 * N)
        mu_aff = 0.0
        for l in range(L):
            for i in range(n):
                mu_aff += (xv[l, i] + ap * dxv[l, i]) * (zv[l, i] + ad * dzv[l, i])
                mu_aff += (sv[l, i] - ap * dxv[l, i]) * (wv[l, i] + ad * dwv[l, i])
        mu_aff /= 2.0 * N
        if mu > 0.0:
            sigma = (mu_aff / mu) ** 3
            if sigma > 1.0: sigma = 1.0
            if sigma < 0.0: sigma = 0.0
        else:
            sigma = 0.0

        # ---- corrector ----
        for l in range(L):
            for i in range(n):
                rc1v[l, i] = -xv[l, i] * zv[l, i] + sigma * mu - dxv[l, i] * dzv[l, i]
                rc2v[l, i] = -sv[l, i] * wv[l, i] + sigma * mu + dxv[l, i] * dwv[l, i]
                gv[l, i] = rc1v[l, i] / xv[l, i] - rc2v[l, i] / sv[l, i]
        if _arrow_solve(Xv, qv, gv, qcv, q1v, Cv, Sv, Fv, r1v, r2v, rtv,
                        dav, dthv, xthv, L, n, dx):
            fail = 1
            break
        ap = 1e12
        ad = 1e12
        for l in range(L):
            for i in range(n):
                acc = dav[l] + xthv[i]
                dxv[l, i] = qv[l, i] * (gv[l, i] - acc)
                dzv[l, i] = (rc1v[l, i] - zv[l, i] * dxv[l, i]) / xv[l, i]
                dwv[l, i] = (rc2v[l, i] + wv[l, i] * dxv[l, i]) / sv[l, i]
                if dxv[l, i] < 0.0:
                    cand = xv[l, i] / -dxv[l, i]
                    if cand < ap: ap = cand
                elif dxv[l, i] > 0.0:
                    cand = sv[l, i] / dxv[l, i]
                    if cand < ap: ap = cand
                if dzv[l, i] < 0.0:
                    cand = zv[l, i] / -dzv[l, i]
                    if cand < ad: ad = cand
                if dwv[l, i] < 0.0:
                    cand = wv[l, i] / -dwv[l, i]
                    if cand < ad: ad = cand
        if ap <= STALL or ad <= STALL:
            break
        ap = ETA * ap
        if ap > 1.0: ap = 1.0
        ad = ETA * ad
        if ad > 1.0: ad = 1.0

        gap = 0.0
        for l in range(L):
            for i in range(n):
                xv[l, i] += ap * dxv[l, i]
                sv[l, i] -= ap * dxv[l, i]
                zv[l, i] += ad * dzv[l, i]
                wv[l, i] += ad * dwv[l, i]
                gap += xv[l, i] * zv[l, i] + sv[l, i] * wv[l, i]
        for l in range(L):
            av[l] += ad * dav[l]
        for j in range(dx):
            thv[j] += ad * dthv[j]

    if not converged and not fail:
        dual_obj = 0.0
        for l in range(L):
            tau = lv[l]
            for i in range(n):
                dual_obj += yv[i] * (xv[l, i] - (1.0 - tau))
        converged = gap < tol * (1.0 + fabs(dual_obj))
    return alphas, theta, it, gap, bool(converged)


cdef int _arrow_solve(double[:, ::1] X, double[:, ::1] q, double[:, ::1] g,
                      double[::1] qc, double[::1] Q1,
                      double[:, ::1] C, double[:, ::1] S, double[:, ::1] F,
                      double[::1] r1, double[::1] r2, double[::1] rt,
                      double[::1] da, double[::1] dth, double[::1] xdth,
                      int L, int n, int dx) noexcept:
    """Solve the arrow system M [da; dth] = A'(q*g) and leave X @ dth in
    ``xdth``.  Returns nonzero on factorization failure."""
    cdef int i, j, k, l
    cdef double acc, vi
    for l in range(L):
        acc = 0.0
        for i in range(n):
            acc += q[l, i]
        Q1[l] = acc
        if acc <= 0.0:
            return 1
        acc = 0.0
        for i in range(n):
            acc += q[l, i] * g[l, i]
        r1[l] = acc
    if dx:
        for i in range(n):
            acc = 0.0
            vi = 0.0
            for l in range(L):
                acc += q[l, i]
                vi += q[l, i] * g[l, i]
            qc[i] = acc
            xdth[i] = vi  # reuse as weighted-row scratch
        for j in range(dx):
            acc = 0.0
            for i in range(n):
                acc += X[i, j] * xdth[i]
            r2[j] = acc
        for l in range(L):
            for j in range(dx):
                acc = 0.0
                for i in range(n):
                    acc += q[l, i] * X[i, j]
                C[l, j] = acc
        for j in range(dx):
            for k in range(j + 1):
                acc = 0.0
                for i in range(n):
                    acc += qc[i] * X[i, j] * X[i, k]
                S[j, k] = acc
        # Schur complement S - C' diag(1/Q1) C and reduced rhs
        for j in range(dx):
            for k in range(j + 1):
                acc = S[j, k]
                for l in range(L):
                    acc -= C[l, j] * C[l, k] / Q1[l]
                S[j, k] = acc
            acc = r2[j]
            for l in range(L):
                acc -= C[l, j] * r1[l] / Q1[l]
            rt[j] = acc
        for j in range(dx):
            for k in range(j):
                S[k, j] = S[j, k]
        if _factor_with_jitter(S, F, dx):
            return 1
        _chol_solve(F, rt, dth, dx)
        for l in range(L):
            acc = r1[l]
            for j in range(dx):
                acc -= C[l, j] * dth[j]
            da[l] = acc / Q1[l]
        for i in range(n):
            acc = 0.0
            for j in range(dx):
                acc += X[i, j] * dth[j]
            xdth[i] = acc
    else:
        for l in range(L):
            da[l] = r1[l] / Q1[l]
        for i in range(n):
            xdth[i] = 0.0
    return 0
