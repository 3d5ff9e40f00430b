import numpy as np
import pytest

from oracles import (
    check_loss_sum,
    cqr_lattice_oracle,
    lad_point_pair_oracle,
    normal_equations_ls,
)
from pfqr.errors import RankDeficientDesign
from pfqr.qsolve import CheckLossSpec, check_loss, fit_cqr, fit_ls, fit_qr


def test_check_loss_values():
    assert check_loss(2.0, 0.5) == pytest.approx(1.0)
    assert check_loss(-1.0, 0.25) == pytest.approx(0.75)
    for tau in (0.1, 0.5, 0.9):
        assert check_loss(0.0, tau) == 0.0
    u = np.array([2.0, -1.0, 0.0])
    assert check_loss(u, 0.25) == pytest.approx([0.5, 0.75, 0.0])


def test_loss_spec_validation():
    with pytest.raises(ValueError):
        CheckLossSpec.qr(1.0)
    with pytest.raises(ValueError):
        CheckLossSpec.cqr([0.2, 0.2])
    with pytest.raises(ValueError):
        CheckLossSpec.cqr([0.5, 0.3])
    assert CheckLossSpec.cqr([0.25, 0.75]).n_intercepts == 2


def test_qr_intercept_only_median():
    fit = fit_qr(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]), 0.5)
    assert fit.intercepts[0] == pytest.approx(2.0, abs=1e-7)


def test_qr_intercept_only_quartile():
    fit = fit_qr(np.ones((5, 1)), np.arange(5.0), 0.25)
    assert fit.intercepts[0] == pytest.approx(1.0, abs=1e-6)


def test_qr_exact_line():
    x = np.arange(1.0, 11.0)
    design = np.column_stack([np.ones(10), x])
    for tau in (0.2, 0.5, 0.8):
        fit = fit_qr(design, 2.0 * x, tau)
        assert fit.slopes[0] == pytest.approx(2.0, abs=1e-7)
        assert fit.intercepts[0] == pytest.approx(0.0, abs=1e-6)
        assert fit.objective == pytest.approx(0.0, abs=1e-6)


def test_qr_matches_point_pair_oracle():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(4, 11))
        x = rng.normal(size=n)
        y = rng.normal(size=n) * rng.uniform(0.5, 3.0) + rng.normal() * x
        design = np.column_stack([np.ones(n), x])
        fit = fit_qr(design, y, 0.5)
        _, _, obj_oracle = lad_point_pair_oracle(x, y)
        assert abs(fit.objective - obj_oracle) <= 1e-6 * (1.0 + obj_oracle)


def test_qr_sign_balance():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(20, 80))
        d = int(rng.integers(1, 4))
        design = np.column_stack([np.ones(n), rng.normal(size=(n, d - 1))])
        y = design @ rng.normal(size=d) + rng.standard_t(3, size=n)
        tau = float(rng.uniform(0.1, 0.9))
        fit = fit_qr(design, y, tau)
        resid = y - design @ fit.coef
        thresh = 1e-7 * (1.0 + np.abs(y).mean())
        neg = int(np.sum(resid < -thresh))
        pos = int(np.sum(resid > thresh))
        assert neg <= tau * n + d
        assert pos <= (1 - tau) * n + d


def test_qr_local_optimality_smoke():
    rng = np.random.default_rng(9)
    n = 40
    design = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = design @ np.array([1.0, 2.0, -1.0]) + rng.standard_normal(n)
    fit = fit_qr(design, y, 0.3)
    for _ in range(1000):
        pert = fit.coef + rng.uniform(-1e-3, 1e-3, size=3)
        obj = check_loss_sum(y - design @ pert, 0.3)
        assert fit.objective <= obj + 1e-10


def test_qr_median_is_lad():
    rng = np.random.default_rng(10)
    n = 30
    design = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = design @ np.array([0.5, 1.5]) + rng.standard_t(2, size=n)
    fit = fit_qr(design, y, 0.5)
    resid = y - design @ fit.coef
    assert 2.0 * fit.objective == pytest.approx(np.abs(resid).sum(), rel=1e-9)


def test_cqr_single_level_equals_qr():
    rng = np.random.default_rng(11)
    n = 25
    x = rng.normal(size=(n, 1))
    y = 1.0 + 2.0 * x[:, 0] + rng.standard_normal(n)
    for tau in (0.3, 0.5, 0.7):
        qfit = fit_qr(np.column_stack([np.ones(n), x]), y, tau)
        cfit = fit_cqr(x, y, [tau])
        assert abs(qfit.objective - cfit.objective) < 1e-10
        assert np.max(np.abs(qfit.coef - cfit.coef)) < 1e-10


def test_cqr_exact_line():
    x = np.arange(1.0, 11.0)
    fit = fit_cqr(x[:, None], 3.0 * x, [0.25, 0.5, 0.75])
    assert fit.slopes[0] == pytest.approx(3.0, abs=1e-7)
    assert np.max(np.abs(fit.intercepts)) < 1e-6
    assert fit.objective == pytest.approx(0.0, abs=1e-6)


def test_cqr_no_covariates_decouples():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    levels = [0.25, 0.75]
    fit = fit_cqr(np.empty((4, 0)), y, levels)
    # per level the attainable minimum is the 1-d check-loss optimum
    for alpha, tau in zip(fit.intercepts, levels):
        best = min(check_loss_sum(y - a, tau) for a in y)
        assert check_loss_sum(y - alpha, tau) == pytest.approx(best, abs=1e-7)


def test_cqr_matches_lattice_oracle():
    rng = np.random.default_rng(12)
    levels = [0.25, 0.5, 0.75]
    for _ in range(8):
        n = 6
        x = rng.normal(size=n)
        y = rng.normal() * x + rng.standard_normal(n)
        fit = fit_cqr(x[:, None], y, levels)
        lo = fit.slopes[0] - 1.0
        hi = fit.slopes[0] + 1.0
        obj_oracle, *_ = cqr_lattice_oracle(x, y, levels, lo, hi)
        assert fit.objective <= obj_oracle + 2e-3


def test_cqr_duplicated_level_doubles_qr():
    rng = np.random.default_rng(13)
    n = 20
    x = rng.normal(size=(n, 1))
    y = 0.5 + x[:, 0] + rng.standard_normal(n)
    single = fit_cqr(x, y, [0.4])
    double = fit_cqr(x, y, [0.4, 0.4])
    assert double.objective == pytest.approx(2.0 * single.objective, rel=1e-7)
    assert double.slopes[0] == pytest.approx(single.slopes[0], abs=1e-6)


def test_regression_equivariance():
    rng = np.random.default_rng(14)
    n = 30
    x = rng.normal(size=(n, 2))
    y = x @ np.array([1.0, -1.0]) + rng.standard_t(3, size=n)
    shift = np.array([2.0, -3.0])

    design = np.column_stack([np.ones(n), x])
    base = fit_qr(design, y, 0.3)
    moved = fit_qr(design, y + x @ shift, 0.3)
    assert np.max(np.abs(moved.slopes - base.slopes - shift)) < 1e-6
    assert moved.objective == pytest.approx(base.objective, abs=1e-6)

    base_c = fit_cqr(x, y, [0.25, 0.5, 0.75])
    moved_c = fit_cqr(x, y + x @ shift, [0.25, 0.5, 0.75])
    assert np.max(np.abs(moved_c.slopes - base_c.slopes - shift)) < 1e-6
    assert moved_c.objective == pytest.approx(base_c.objective, abs=1e-5)


def test_ls_recovery_and_oracle():
    rng = np.random.default_rng(15)
    design = np.column_stack([np.ones(20), rng.normal(size=(20, 2))])
    truth = np.array([0.5, 1.0, -2.0])
    fit = fit_ls(design, design @ truth)
    assert np.max(np.abs(fit.coef - truth)) < 1e-10

    y = design @ truth + rng.standard_normal(20)
    fit = fit_ls(design, y)
    oracle = normal_equations_ls(design, y)
    assert np.max(np.abs(fit.coef - oracle)) < 1e-8
    resid = y - design @ fit.coef
    assert np.max(np.abs(design.T @ resid)) < 1e-8

    only = fit_ls(np.ones((7, 1)), np.arange(7.0))
    assert only.intercepts[0] == pytest.approx(3.0)


def test_rank_deficient_design_raises():
    x = np.arange(10.0)
    design = np.column_stack([np.ones(10), x, 2 * x])
    with pytest.raises(RankDeficientDesign):
        fit_qr(design, x, 0.5)
    with pytest.raises(RankDeficientDesign):
        fit_ls(design, x)
    with pytest.raises(RankDeficientDesign):
        fit_cqr(np.column_stack([x, 2 * x]), x, [0.5])
