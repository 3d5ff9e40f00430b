import numpy as np
import pytest

from pfqr.errors import AllZeroDirection, ConfigError
from pfqr.extract import (
    ExtractionConfig,
    deflate,
    extract_one,
    fpc_extraction,
    run_extraction,
    select_k,
)
from pfqr.fgrid import FunctionalSample, Grid, center_columns
from pfqr.qsolve import CheckLossSpec
from pfqr.simgen import Sim1Design, gen_sim1

QR5 = CheckLossSpec.qr(0.5)
LEVELS = tuple(l / 10 for l in range(1, 10))


def _sample(curves, responses=None, scalars=None):
    m = np.atleast_2d(curves).shape[1]
    return FunctionalSample(
        grid=Grid.regular(m),
        curves=np.atleast_2d(curves),
        scalars=scalars,
        responses=responses,
    )


def test_extract_one_rank_one_direction():
    rng = np.random.default_rng(0)
    u = rng.normal(size=30)
    c = rng.normal(size=15)
    s = _sample(np.outer(u, c), responses=u)
    cen, _ = center_columns(s)
    d = extract_one(cen, QR5)
    grid = s.grid
    # column j is c_j * (u - mean u): the slope on the standardized
    # column is sd(u)*sign(c_j) and the covariance-scale profile is
    # sd(u)^2 * c_j, so the normalized direction is c up to scale
    expected = c / np.sqrt(grid.dt * c @ c)
    assert d == pytest.approx(expected, abs=1e-6)
    assert grid.dt * d @ d == pytest.approx(1.0, abs=1e-10)


def test_extract_one_independent_response_is_small():
    rng = np.random.default_rng(1)
    n = 400
    curves = rng.normal(size=(n, 10))
    y_noise = rng.normal(size=n)
    s = _sample(curves, responses=y_noise)
    cen, _ = center_columns(s)
    # raw covariance profile before normalization
    from pfqr.qcov import quantile_cov

    cov_noise = np.array(
        [quantile_cov(y_noise, cen.curves[:, j], 0.5) for j in range(10)]
    )
    y_signal = curves[:, 3]
    cov_signal = np.array(
        [quantile_cov(y_signal, cen.curves[:, j], 0.5) for j in range(10)]
    )
    assert np.linalg.norm(cov_noise) < 0.25 * np.linalg.norm(cov_signal)


def test_extract_one_pls_peaks_at_source_column():
    rng = np.random.default_rng(2)
    curves = rng.normal(size=(200, 12))
    y = curves[:, 4].copy()
    s = _sample(curves, responses=y)
    cen, _ = center_columns(s)
    d = extract_one(cen, CheckLossSpec.ls())
    assert np.argmax(np.abs(d)) == 4
    # squared-loss profiles are exactly the sample covariances
    yc = y - y.mean()
    cov = yc @ cen.curves / (len(y) - 1)
    expected = cov / np.sqrt(s.grid.dt * cov @ cov)
    assert d == pytest.approx(expected, abs=1e-8)


def test_deflate_rank_one_annihilates():
    rng = np.random.default_rng(3)
    u = rng.normal(size=20)
    c = rng.normal(size=8)
    s = _sample(np.outer(u, c), responses=u)
    out = deflate(s, u)
    assert np.max(np.abs(out.curves)) < 1e-10


def test_deflate_orthogonal_score_only_centers():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 6))
    score = rng.normal(size=30)
    # remove any sample correlation between score and every column
    score = score - score.mean()
    X = X - np.outer(score, (score @ X) / (score @ score))
    s = _sample(X)
    out = deflate(s, score)
    assert out.curves == pytest.approx(X - X.mean(axis=0), abs=1e-10)


def test_deflate_residuals_orthogonal_to_score():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(10, 5))
    score = rng.normal(size=10)
    out = deflate(_sample(X), score)
    prods = (score - score.mean()) @ out.curves
    assert np.max(np.abs(prods)) < 1e-10


def test_run_extraction_k_zero():
    data = gen_sim1(Sim1Design(n=40, seed=1))
    cfg = ExtractionConfig(method="pqr", loss=QR5, k_max=0)
    res = run_extraction(data.sample, cfg)
    assert res.k == 0
    assert res.scores.values.shape == (40, 0)


def test_run_extraction_rank_one_stops_early():
    rng = np.random.default_rng(6)
    u = rng.normal(size=25)
    c = rng.normal(size=10)
    s = _sample(np.outer(u, c), responses=u)
    res = run_extraction(s, ExtractionConfig(method="pqr", loss=QR5, k_max=3))
    assert res.k == 1
    assert res.stopped_early


def test_scores_orthogonal_and_basis_normalized():
    data = gen_sim1(Sim1Design(n=150, seed=2))
    for method, loss in (
        ("pqr", QR5),
        ("pls", CheckLossSpec.ls()),
        ("pcqr", CheckLossSpec.cqr(LEVELS)),
    ):
        res = run_extraction(
            data.sample, ExtractionConfig(method=method, loss=loss, k_max=3)
        )
        S = res.scores.values
        G = S.T @ S
        off = np.abs(G - np.diag(np.diag(G))).max()
        assert off < 1e-6 * data.sample.n, method
        dt = data.sample.grid.dt
        norms = dt * np.sum(res.basis.functions**2, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-10, method


def test_pls_recovers_single_direction():
    # exact construction: the response is the projection onto one
    # direction and every column is its regression on that score plus an
    # exactly orthogonal remainder, so the covariance profile is w itself
    rng = np.random.default_rng(7)
    n, m = 500, 24
    w = rng.normal(size=m)
    G = rng.normal(size=(n, m))
    t = G @ w
    t = t - t.mean()
    E = G - np.outer(t, (t @ G) / (t @ t))
    curves = np.outer(t, w) + E
    s = _sample(curves, responses=t)
    res = run_extraction(
        s, ExtractionConfig(method="pls", loss=CheckLossSpec.ls(), k_max=1)
    )
    target = w / np.linalg.norm(w)
    got = res.basis.functions[0] / np.linalg.norm(res.basis.functions[0])
    cos = abs(float(got @ target))
    assert cos > 0.99


def test_response_scaling_leaves_directions():
    data = gen_sim1(Sim1Design(n=100, seed=3))
    cfg = ExtractionConfig(method="pqr", loss=QR5, k_max=2)
    res1 = run_extraction(data.sample, cfg)
    doubled = FunctionalSample(
        grid=data.sample.grid,
        curves=data.sample.curves,
        responses=2.0 * data.sample.responses,
    )
    res2 = run_extraction(doubled, cfg)
    for k in range(2):
        b1, b2 = res1.basis.functions[k], res2.basis.functions[k]
        sign = 1.0 if b1 @ b2 >= 0 else -1.0
        assert np.max(np.abs(b1 - sign * b2)) < 1e-5


def test_transform_replays_training_scores():
    data = gen_sim1(Sim1Design(n=80, seed=4))
    res = run_extraction(
        data.sample, ExtractionConfig(method="pqr", loss=QR5, k_max=3)
    )
    replay = res.transform(data.sample.curves)
    assert np.max(np.abs(replay - res.scores.values)) < 1e-10
    # replay agrees with direct projection onto the rotations
    std = res.standardizer.apply(data.sample.curves)
    direct = std @ res.basis.functions.T * data.sample.grid.dt
    assert np.max(np.abs(direct - res.scores.values)) < 1e-8


def test_fpc_extraction_matches_module():
    data = gen_sim1(Sim1Design(n=60, seed=5))
    res = fpc_extraction(data.sample, 3)
    assert res.k == 3
    assert res.scores.values.shape == (60, 3)
    new = res.transform(data.sample.curves)
    assert np.max(np.abs(new - res.scores.values)) < 1e-12


def test_select_k_recovers_two_directions():
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, m = 60, 12
        d1, d2 = rng.normal(size=m), rng.normal(size=m)
        u1, u2 = rng.normal(size=n), rng.normal(size=n)
        curves = np.outer(u1, d1) + np.outer(u2, d2)
        y = u1 - 0.8 * u2 + 0.01 * rng.normal(size=n)
        s = _sample(curves, responses=y)
        cfg = ExtractionConfig(
            method="pls",
            loss=CheckLossSpec.ls(),
            k_max=4,
            stop="cv",
            cv_folds=4,
            seed=seed,
        )
        if select_k(s, cfg) == 2:
            hits += 1
    assert hits >= 45  # at least 90% of seeds


def test_select_k_pure_noise_small():
    small = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        curves = rng.normal(size=(60, 12))
        y = rng.normal(size=60)
        s = _sample(curves, responses=y)
        cfg = ExtractionConfig(
            method="pls",
            loss=CheckLossSpec.ls(),
            k_max=4,
            stop="cv",
            cv_folds=4,
            seed=seed,
        )
        if select_k(s, cfg) <= 1:
            small += 1
    assert small > 10  # majority


def test_single_fold_rejected():
    with pytest.raises(ConfigError):
        ExtractionConfig(
            method="pls", loss=CheckLossSpec.ls(), k_max=2, stop="cv", cv_folds=1
        )


def test_bic_selection_runs():
    rng = np.random.default_rng(8)
    curves = rng.normal(size=(80, 10))
    y = 3.0 * curves[:, 1] + 0.05 * rng.normal(size=80)
    s = _sample(curves, responses=y)
    cfg = ExtractionConfig(
        method="pls", loss=CheckLossSpec.ls(), k_max=4, stop="bic"
    )
    k = select_k(s, cfg)
    assert 1 <= k <= 4
    res = run_extraction(s, cfg)
    assert res.k == k


def test_all_zero_direction_raised():
    rng = np.random.default_rng(9)
    u = rng.normal(size=20)
    c = rng.normal(size=6)
    s = _sample(np.outer(u, c), responses=u)
    cen, _ = center_columns(s)
    first = extract_one(cen, QR5)
    dt = s.grid.dt
    t = dt * (cen.curves @ first)
    deflated = deflate(cen, t)
    with pytest.raises(AllZeroDirection):
        extract_one(deflated, QR5)
