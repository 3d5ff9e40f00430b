import math
from statistics import NormalDist

import numpy as np
import pytest

from pfqr.errors import InsufficientRank
from pfqr.fgrid import L2_WEIGHTED, inner_product
from pfqr.simgen import (
    Sim1Design,
    Sim2Design,
    gen_sim1,
    gen_sim2,
    sample_error,
    sim1_basis,
    sim1_grid,
    synthetic_source_curves,
)

# frozen by direct 49-term summation of the coefficient series at t = 0
GAMMA_AT_ZERO = -0.96853800026816


def test_gamma_at_zero_matches_direct_summation():
    data = gen_sim1(Sim1Design(n=2, seed=0))
    assert data.gamma_true[0] == pytest.approx(GAMMA_AT_ZERO, abs=1e-12)


def test_curves_mean_zero():
    data = gen_sim1(Sim1Design(n=10_000, seed=1))
    Z = data.sample.curves
    # Var(Z(t)) = sum_j v_j^2 phi_j(t)^2 <= 2 * zeta(1.1); 3 standard errors
    se = np.sqrt(Z.var(axis=0) / Z.shape[0])
    assert np.all(np.abs(Z.mean(axis=0)) < 3.0 * se + 1e-12)


def test_harmonics_near_orthonormal_on_grid():
    # the plain dt-weighted quadrature (no end correction) carries an
    # O(dt) boundary term on same-parity pairs, so the Gram deviates by
    # up to 2*dt = 1e-2; opposite-parity pairs cancel to ~1e-3
    g = sim1_grid()
    phi = sim1_basis(g)
    G = phi @ phi.T * g.dt
    assert np.max(np.abs(G - np.eye(50))) < 1.1e-2
    assert abs(G[0, 1]) < 1e-3


def test_seed_reproducibility():
    a = gen_sim1(Sim1Design(n=50, seed=42))
    b = gen_sim1(Sim1Design(n=50, seed=42))
    assert np.array_equal(a.sample.curves, b.sample.curves)
    assert np.array_equal(a.sample.responses, b.sample.responses)
    c = gen_sim1(Sim1Design(n=50, seed=43))
    assert not np.array_equal(a.sample.responses, c.sample.responses)


def test_true_responses_self_consistent():
    data = gen_sim1(Sim1Design(n=30, seed=2))
    g = data.sample.grid
    quad = g.dt * (data.sample.curves @ data.gamma_true)
    assert np.array_equal(quad, data.noiseless)
    assert np.array_equal(data.sample.responses, data.noiseless + data.errors)


def test_conditional_quantile_intercept_is_error_quantile():
    data = gen_sim1(Sim1Design(n=200_000, seed=3))
    eps = data.sample.responses - data.noiseless
    for tau in (0.25, 0.5, 0.9):
        target = NormalDist().inv_cdf(tau)
        assert np.quantile(eps, tau) == pytest.approx(target, abs=0.02)


def test_sample_error_moments():
    g = sample_error("gaussian", 1_000_000, seed=4)
    assert 0.99 <= g.var() <= 1.01
    c = sample_error("cauchy", 1_000_000, seed=5)
    assert -0.01 <= np.median(c) <= 0.01
    assert np.array_equal(
        sample_error("cauchy", 100, seed=6), sample_error("cauchy", 100, seed=6)
    )


def test_sim2_case_i_spanned_by_top5():
    d = Sim2Design(case="i", n=200, seed=7, source_seed=99)
    data = gen_sim2(d)
    from pfqr.fgrid import FunctionalSample, fpc_basis

    basis = fpc_basis(
        FunctionalSample(grid=data.sample.grid, curves=data.sample.curves), 5
    )
    g = data.sample.grid
    coefs = basis.functions @ data.gamma_true * g.dt
    recon = coefs @ basis.functions
    assert np.max(np.abs(recon - data.gamma_true)) < 1e-8


def test_sim2_case_iv_orthogonal_to_low_modes():
    d = Sim2Design(case="iv", n=200, seed=8, source_seed=99)
    data = gen_sim2(d)
    from pfqr.fgrid import FunctionalSample, fpc_basis

    basis = fpc_basis(
        FunctionalSample(grid=data.sample.grid, curves=data.sample.curves), 15
    )
    g = data.sample.grid
    for k in range(15):
        ip = inner_product(basis.functions[k], data.gamma_true, g, L2_WEIGHTED)
        assert abs(ip) < 1e-8


def test_sim2_error_scale_recomputable():
    d = Sim2Design(case="ii", n=150, seed=9, source_seed=99)
    data = gen_sim2(d)
    assert data.error_scale == pytest.approx(
        float(np.std(data.noiseless, ddof=1)) * math.sqrt(5.0), abs=1e-12
    )
    resp = data.noiseless + data.errors
    assert np.array_equal(data.sample.responses, resp)


def test_sim2_insufficient_rank():
    rng = np.random.default_rng(10)
    low_rank = rng.normal(size=(40, 5)) @ rng.normal(size=(5, 256))
    d = Sim2Design(case="i", n=40, seed=11, source_curves=low_rank)
    with pytest.raises(InsufficientRank):
        gen_sim2(d)


def test_sim2_deterministic_and_shared_source():
    a = gen_sim2(Sim2Design(case="iii", n=80, seed=1, source_seed=5))
    b = gen_sim2(Sim2Design(case="iii", n=80, seed=2, source_seed=5))
    assert np.array_equal(a.sample.curves, b.sample.curves)  # same source
    assert not np.array_equal(a.errors, b.errors)  # fresh errors
    assert np.array_equal(a.gamma_true, b.gamma_true)


def test_synthetic_source_is_smooth_and_rich():
    curves = synthetic_source_curves(100, 256, seed=12)
    assert curves.shape == (100, 256)
    # second differences should be small relative to the signal (smooth)
    d2 = np.diff(curves, n=2, axis=1)
    assert np.abs(d2).max() < 0.1 * np.abs(curves).max()
