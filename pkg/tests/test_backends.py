"""Agreement between the compiled and pure-python solver backends, and
the smoothed-loss rescue path."""

import numpy as np
import pytest

from pfqr import _ipqr_py as py_kernels

cy_kernels = pytest.importorskip(
    "pfqr._ipqr", reason="compiled backend not built"
)


def test_qr_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n = int(rng.integers(10, 150))
        d = int(rng.integers(1, 5))
        A = np.column_stack([np.ones(n), rng.normal(size=(n, d - 1))])
        y = A @ rng.normal(size=d) + rng.standard_t(3, size=n)
        tau = float(rng.uniform(0.1, 0.9))
        c_py, _, _, ok_py = py_kernels.qr_ip(A, y, tau)
        c_cy, _, _, ok_cy = cy_kernels.qr_ip(A, y, tau)
        assert ok_py and ok_cy
        o_py = py_kernels.check_loss_value(y - A @ c_py, tau)
        o_cy = py_kernels.check_loss_value(y - A @ c_cy, tau)
        assert abs(o_py - o_cy) <= 1e-9 * (1.0 + abs(o_py))
        assert np.max(np.abs(c_py - c_cy)) < 1e-6


def test_cqr_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(10, 100))
        dx = int(rng.integers(0, 3))
        X = rng.normal(size=(n, dx))
        y = (X @ rng.normal(size=dx) if dx else 0.0) + rng.standard_normal(n)
        levels = np.unique(np.sort(rng.uniform(0.1, 0.9, size=int(rng.integers(2, 6)))))
        a_py, t_py, _, _, ok_py = py_kernels.cqr_ip(X, y, levels)
        a_cy, t_cy, _, _, ok_cy = cy_kernels.cqr_ip(X, y, levels)
        assert ok_py and ok_cy

        def obj(a, t):
            r = y[None, :] - a[:, None] - ((X @ t)[None, :] if dx else 0.0)
            return float(np.sum(r * (levels[:, None] - (r < 0))))

        assert abs(obj(a_py, t_py) - obj(a_cy, t_cy)) <= 1e-9 * (
            1.0 + abs(obj(a_py, t_py))
        )


def test_warm_start_accepted():
    rng = np.random.default_rng(2)
    n = 60
    A = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = A @ np.array([1.0, 2.0]) + rng.standard_normal(n)
    cold, *_ = py_kernels.qr_ip(A, y, 0.5)
    warm, it, gap, ok = py_kernels.qr_ip(A, y, 0.5, nu0=cold)
    assert ok
    o1 = py_kernels.check_loss_value(y - A @ cold, 0.5)
    o2 = py_kernels.check_loss_value(y - A @ warm, 0.5)
    assert abs(o1 - o2) <= 1e-8 * (1.0 + abs(o1))


def test_smoothed_rescue_quality():
    # the MM pass alone lands near the optimum; restarting the interior
    # point from it closes the gap to tolerance
    rng = np.random.default_rng(3)
    n = 50
    A = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = A @ np.array([0.5, -1.0, 2.0]) + rng.standard_t(2, size=n)
    tau = 0.3
    ip, *_ = py_kernels.qr_ip(A, y, tau)
    o_ip = py_kernels.check_loss_value(y - A @ ip, tau)
    mm, _, _ = py_kernels.smoothed_qr(A, y, tau)
    o_mm = py_kernels.check_loss_value(y - A @ mm, tau)
    assert o_mm <= o_ip * 1.25 + 1e-9  # MM gets close
    polished, _, _, ok = py_kernels.qr_ip(A, y, tau, nu0=mm)
    o_pol = py_kernels.check_loss_value(y - A @ polished, tau)
    assert ok
    assert abs(o_pol - o_ip) <= 1e-7 * (1.0 + abs(o_ip))
