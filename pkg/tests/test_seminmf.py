import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kleinopt import make_geometry
from kleinopt.errors import ConfigError, GeometryError
from kleinopt.seminmf import (FrameAtColumn, SemiNmfConfig, contract, dilate, fit,
                              karcher_mean, nnls, normalize_columns, perturb,
                              random_orthogonal_unit, spread, synthetic_problem)

from conftest import nnls_bruteforce

E = np.eye(4)


def unit(v):
    return v / np.linalg.norm(v)


def frame(theta, rng, n=4):
    xbar = unit(rng.standard_normal(n))
    v = random_orthogonal_unit(rng, xbar)
    w = math.cos(theta) * xbar + math.sin(theta) * v
    return FrameAtColumn.from_column(xbar, w, rng)


def angle(a, b):
    return math.acos(max(-1.0, min(1.0, float(a @ b))))


# -- spread ------------------------------------------------------------------------------

def test_spread_examples(rng):
    x = unit(rng.standard_normal(4))
    assert spread(np.column_stack([x, x])) == pytest.approx(0.0, abs=1e-7)
    assert spread(E[:, :2]) == pytest.approx(math.pi / 2)
    W = normalize_columns(rng.standard_normal((5, 4)))
    brute = max(angle(W[:, i], W[:, j]) for i, j in itertools.combinations(range(4), 2))
    assert spread(W) == pytest.approx(brute, abs=1e-12)
    with pytest.raises(GeometryError):
        spread(np.ones((3, 2)))


# -- Karcher mean ------------------------------------------------------------------------

def test_karcher_of_identical_columns(rng):
    x = unit(rng.standard_normal(5))
    np.testing.assert_allclose(karcher_mean(np.column_stack([x, x, x])), x, atol=1e-14)


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.2])
def test_karcher_two_points_matches_grid_search(beta, rng):
    a = unit(rng.standard_normal(4))
    v = random_orthogonal_unit(rng, a)
    p = math.cos(beta) * a + math.sin(beta) * v
    q = math.cos(beta) * a - math.sin(beta) * v
    # Brute-force oracle: minimise summed squared arcs along the great circle through p and q.
    ts = np.linspace(-math.pi / 2, math.pi / 2, 200_001)
    cost = (np.abs(ts - beta)) ** 2 + (np.abs(ts + beta)) ** 2
    t_best = ts[np.argmin(cost)]
    oracle = math.cos(t_best) * a + math.sin(t_best) * v
    m = karcher_mean(np.column_stack([p, q]))
    assert np.linalg.norm(m - oracle) < 1e-4
    assert angle(m, p) == pytest.approx(beta, abs=1e-9)
    assert angle(m, q) == pytest.approx(beta, abs=1e-9)


def test_karcher_symmetric_cone():
    t = 0.6
    cols = [np.array([math.cos(t), math.sin(t) * math.cos(a), math.sin(t) * math.sin(a)])
            for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    np.testing.assert_allclose(karcher_mean(np.column_stack(cols)), [1, 0, 0], atol=1e-8)


def test_karcher_is_stationary(rng):
    Xhat = normalize_columns(np.abs(rng.standard_normal((6, 30))) + 0.2)
    m = karcher_mean(Xhat)
    sphere = make_geometry("sphere", 6)
    assert np.linalg.norm(sum(sphere.log_map(m, x) for x in Xhat.T)) <= 1e-9


def test_karcher_rejects_antipodal_data():
    with pytest.raises(GeometryError, match="mean not unique"):
        karcher_mean(np.column_stack([E[:, 0], -E[:, 0]]))


# -- NNLS --------------------------------------------------------------------------------

def test_nnls_identity_cases(rng):
    X = np.abs(rng.standard_normal((4, 6)))
    H, res = nnls(X, np.eye(4))
    np.testing.assert_allclose(H, X, atol=1e-14)
    assert res == pytest.approx(0.0, abs=1e-24)
    X = rng.standard_normal((4, 6))
    H, _ = nnls(X, np.eye(4))
    np.testing.assert_allclose(H, np.maximum(X, 0), atol=1e-14)


def test_nnls_matches_exhaustive_oracle(rng):
    for _ in range(100):
        W = rng.standard_normal((4, 2))
        X = rng.standard_normal((4, 3))
        H, res = nnls(X, W)
        np.testing.assert_allclose(H, nnls_bruteforce(X, W), atol=1e-8)
        assert res == pytest.approx(np.sum((X - W @ H) ** 2))


def test_nnls_kkt_conditions(rng):
    for _ in range(30):
        W = rng.standard_normal((8, 4))
        X = rng.standard_normal((8, 5))
        H, _ = nnls(X, W)
        assert np.all(H >= 0)
        grad = W.T @ (W @ H - X)
        assert np.all(grad[H == 0] >= -1e-8)
        assert np.all(np.abs(grad[H > 0]) <= 1e-8)


def test_nnls_errors_and_warnings(rng):
    with pytest.raises(ValueError, match="dimension mismatch"):
        nnls(np.ones((3, 2)), np.ones((4, 2)))
    W = np.column_stack([E[:, 0], E[:, 0]])
    with pytest.warns(RuntimeWarning):
        nnls(np.ones((4, 2)), W)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
def test_nnls_oracle_property(seed, k):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((5, k))
    X = rng.standard_normal((5, 4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        H, _ = nnls(X, W)
    np.testing.assert_allclose(H, nnls_bruteforce(X, W), atol=1e-8)


# -- frames and moves ----------------------------------------------------------------------

def test_frame_invariants(rng):
    f = frame(0.7, rng, n=6)
    f.check()
    np.testing.assert_allclose(f.at(f.theta), f.w, atol=1e-10)
    assert f.theta == pytest.approx(0.7)
    with pytest.raises(GeometryError):
        FrameAtColumn.from_column(E[:, 0], E[:, 0])


def test_contract_examples(rng):
    f = frame(math.pi / 3, rng)
    np.testing.assert_allclose(contract(f, 1 - 1e-15), f.w, atol=1e-12)
    assert angle(contract(f, 0.5), f.xbar) == pytest.approx(math.pi / 6, abs=1e-10)
    with pytest.raises(ConfigError):
        contract(f, 1.0)
    with pytest.raises(GeometryError):
        contract(FrameAtColumn(f.xbar, f.w, f.v, 2.0), 0.5)


def test_repeated_contraction_reaches_any_spread(rng):
    xbar = unit(rng.standard_normal(5))
    W = np.column_stack([math.cos(1.2) * xbar + math.sin(1.2) * random_orthogonal_unit(rng, xbar)
                         for _ in range(4)])
    target = 1e-3
    for steps in range(5000):
        if spread(W) <= target:
            break
        W = np.column_stack([contract(FrameAtColumn.from_column(xbar, w), 0.99) for w in W.T])
    assert spread(W) <= target
    # The spread bound decays at least geometrically: 2 * 1.2 * 0.99^steps.
    assert steps <= math.ceil(math.log(target / 2.4) / math.log(0.99)) + 1


def test_dilate_examples(rng):
    f = frame(0.3, rng)
    assert angle(dilate(f, 1.5), f.xbar) == pytest.approx(0.45, abs=1e-10)
    with pytest.raises(GeometryError):
        dilate(f, (math.pi / 2) / 0.3)
    with pytest.raises(ConfigError):
        dilate(f, 1.0)
    g = 1.7
    back = contract(FrameAtColumn.from_column(f.xbar, dilate(f, g)), 1 / g)
    np.testing.assert_allclose(back, f.w, atol=1e-12)


def test_perturb_examples(rng):
    f = frame(0.5, rng)
    np.testing.assert_allclose(perturb(f, 0.4, 0.0, 1.0), f.at(0.4), atol=1e-15)
    plus, minus = perturb(f, 0.4, 0.3, 1.0), perturb(f, 0.4, 0.3, -1.0)
    mid = (plus + minus) / 2
    assert abs(mid @ f.u) < 1e-14
    with pytest.raises(GeometryError):
        perturb(f, 0.0, 0.3, 1.0)
    with pytest.raises(GeometryError):
        perturb(f, 0.4, math.pi / 2, 1.0)


def test_perturb_keeps_unit_norm(rng):
    for _ in range(1000):
        f = frame(rng.uniform(0.01, 1.5), rng, n=5)
        w = perturb(f, rng.uniform(0.01, 1.5), rng.uniform(0, 1.5), rng.choice([-1.0, 1.0]))
        assert abs(np.linalg.norm(w) - 1) < 1e-12


# -- fit -----------------------------------------------------------------------------------

def check_trace_invariants(trace, cfg):
    for prev, rec in zip(trace, trace[1:]):
        assert rec.eps_i <= prev.eps_i
        if rec.step_type == "fail":
            assert rec.eps_i == prev.eps_i
            assert rec.alpha_i == pytest.approx(cfg.theta * prev.alpha_i)
        else:
            assert prev.eps_i - rec.eps_i > rec.forcing
            assert rec.forcing == pytest.approx(cfg.forcing(prev.alpha_i))
            assert rec.alpha_i == min(cfg.alpha_max, cfg.gamma * prev.alpha_i)
        assert 0 < rec.alpha_i <= cfg.alpha_max
        assert rec.spread <= cfg.eps


def test_fit_synthetic_recovers_fit():
    X, W_true, _ = synthetic_problem(10, 50, 3, math.pi / 4, 0)
    assert spread(W_true) <= math.pi / 8
    cfg = SemiNmfConfig(k=3, eps=math.pi / 4, i_max=300, seed=0)
    fac, trace = fit(X, cfg)
    assert np.linalg.norm(X - fac.W @ fac.H) / np.linalg.norm(X) <= 0.05
    np.testing.assert_allclose(np.linalg.norm(fac.W, axis=0), 1.0, atol=1e-10)
    assert np.all(fac.H >= 0)
    assert fac.spread <= cfg.eps
    check_trace_invariants(trace, cfg)
    assert {r.step_type for r in trace[1:]} <= {"search_a", "search_b", "poll_plus",
                                                 "poll_minus", "fail"}


def test_fit_rank_one_is_monotone(rng):
    X = np.abs(rng.standard_normal((6, 20)))
    cfg = SemiNmfConfig(k=1, i_max=80, seed=1)
    fac, trace = fit(X, cfg)
    assert fac.W.shape == (6, 1)
    assert fac.error <= trace[0].eps_i
    check_trace_invariants(trace, cfg)


def _semi_nmf_multiplicative(X, k, iters=3000, seed=0):
    """Unconstrained semi-NMF by multiplicative updates, used as a baseline."""
    rng = np.random.default_rng(seed)
    G = rng.uniform(0.1, 1.0, (X.shape[1], k))
    for _ in range(iters):
        F = X @ G @ np.linalg.pinv(G.T @ G)
        A, B = X.T @ F, F.T @ F
        Ap, An = (np.abs(A) + A) / 2, (np.abs(A) - A) / 2
        Bp, Bn = (np.abs(B) + B) / 2, (np.abs(B) - B) / 2
        G *= np.sqrt((Ap + G @ Bn) / np.maximum(An + G @ Bp, 1e-300))
    F = X @ G @ np.linalg.pinv(G.T @ G)
    return float(np.linalg.norm(X - F @ G.T) ** 2)


@pytest.mark.slow
def test_fit_inactive_constraint_matches_baseline():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        X = np.abs(rng.standard_normal((8, 3))) @ rng.uniform(0, 1, (3, 40))
        X += 0.05 * rng.uniform(0, 1, X.shape)
        fac, _ = fit(X, SemiNmfConfig(k=3, eps=math.pi, i_max=500, seed=seed))
        assert fac.error <= 1.1 * _semi_nmf_multiplicative(X, 3)


def test_fit_config_errors(rng):
    X = np.abs(rng.standard_normal((4, 3)))
    with pytest.raises(ConfigError):
        fit(X, SemiNmfConfig(k=4))
    with pytest.raises(ConfigError):
        SemiNmfConfig(k=2, eps=0.0)
    with pytest.raises(ConfigError):
        SemiNmfConfig(k=2, delta=1.0)
    with pytest.raises(ConfigError):
        fit(np.column_stack([X, np.zeros(4)]), SemiNmfConfig(k=2))


def test_fit_is_reproducible():
    X, _, _ = synthetic_problem(8, 20, 2, math.pi / 4, 3)
    cfg = SemiNmfConfig(k=2, i_max=40, seed=5)
    assert fit(X, cfg)[1].to_csv() == fit(X, cfg)[1].to_csv()


def test_trace_csv_header():
    X, _, _ = synthetic_problem(6, 10, 2, math.pi / 4, 0)
    text = fit(X, SemiNmfConfig(k=2, i_max=3))[1].to_csv()
    assert text.splitlines()[0] == "i,eps_i,alpha_i,step_type"
