import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsear.bench import draw_sparse_theta
from sparsear.design import (
    DesignMatrix,
    build_design,
    empirical_covariance,
    re_check_exhaustive,
    spectral_covariance_matrix,
    true_covariance_interval,
)
from sparsear.exceptions import NotSufficientlyStable, TooLarge, TooShort
from sparsear.model import ArModel, psd, simulate


def test_build_design_hand_example():
    dm = build_design([1.0, 2.0, 3.0, 4.0], 2)
    assert (dm.n, dm.p) == (2, 2)
    assert np.array_equal(dm.x_matrix, [[3, 2], [2, 1]])
    assert np.array_equal(dm.target, [4, 3])


def test_build_design_boundary_and_errors():
    dm = build_design(np.arange(4.0), 3)
    assert dm.x_matrix.shape == (1, 3)
    with pytest.raises(TooShort):
        build_design(np.arange(3.0), 3)


@given(arrays(float, st.integers(6, 40), elements=st.floats(-10, 10)), st.integers(1, 5))
def test_design_is_toeplitz(x, p):
    dm = build_design(x, p)
    X = dm.x_matrix
    assert np.array_equal(X[:-1, 1:], X[1:, :-1])
    assert dm.n == x.shape[0] - p
    # uses exactly n + p - 1 covariate samples
    assert np.array_equal(np.r_[X[0], X[1:, -1]], x[:-1][::-1])


def test_build_design_ls_consistency():
    x = simulate(ArModel([0.5]), n_total=10_001, seed=0)
    dm = build_design(x, 1)
    theta = np.linalg.lstsq(dm.x_matrix, dm.target, rcond=None)[0]
    assert abs(theta[0] - 0.5) < 0.05


def test_empirical_covariance_white_noise():
    x = simulate(ArModel([0.0]), n_total=100_000, seed=1)
    ec = empirical_covariance(x, 5)
    assert abs(ec.r_hat[0] - 1) < 0.02
    assert np.all(np.abs(ec.r_hat[1:]) < 0.02)


def test_empirical_covariance_ar1():
    x = simulate(ArModel([0.5]), n_total=100_000, seed=2)
    ec = empirical_covariance(x, 5)
    expected = 4 / 3 * 0.5 ** np.arange(6)
    assert np.all(np.abs(ec.r_hat - expected) <= 0.05 * expected)


@given(arrays(float, st.integers(5, 30), elements=st.floats(-10, 10)), st.integers(1, 4))
def test_empirical_covariance_structure(x, p):
    ec = empirical_covariance(x, p)
    R = ec.R_hat
    i, j = np.indices(R.shape)
    assert np.array_equal(R, ec.r_hat[np.abs(i - j)])
    assert np.array_equal(R, R.T)
    assert np.linalg.eigvalsh(R).min() >= -1e-9 * max(1.0, ec.r_hat[0])


def test_empirical_covariance_concentration():
    m = ArModel([0.4, 0.0, -0.2])
    R = spectral_covariance_matrix(m, 5) * 2 * np.pi
    dev = {}
    for n in (2000, 4000):
        vals = []
        for seed in range(50):
            x = simulate(m, n_total=n, seed=seed)
            vals.append(np.abs(empirical_covariance(x, 5).R_hat - R).max())
        dev[n] = np.median(vals)
    assert 1.2 <= dev[2000] / dev[4000] <= 1.7


def test_gram_matches_empirical_covariance():
    p, N = 10, 5000
    x = simulate(ArModel([0.3, 0.2]), n_total=N, seed=3)
    dm = build_design(x, p)
    G, _ = dm.gram()
    ec = empirical_covariance(x, p)
    assert np.abs(G - ec.R_hat).max() <= 3 * p / dm.n * ec.r_hat[0]


def test_re_identity_gram():
    n, p = 40, 4
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(n, p)))
    dm = DesignMatrix(q * np.sqrt(n), np.zeros(n))
    for s in range(1, p + 1):
        rep = re_check_exhaustive(dm, s)
        assert rep.lambda_min_s == pytest.approx(1.0) and rep.lambda_max_s == pytest.approx(1.0)


def test_re_duplicated_column():
    X = np.random.default_rng(1).normal(size=(30, 5))
    X[:, 3] = X[:, 1]
    rep = re_check_exhaustive(DesignMatrix(X, np.zeros(30)), 2)
    assert rep.lambda_min_s == 0.0
    assert rep.satisfied is False
    assert rep.subsets_checked == 10


def test_re_monotone_in_s():
    x = simulate(ArModel([0.5]), n_total=120, seed=4)
    dm = build_design(x, 8)
    reps = [re_check_exhaustive(dm, s) for s in range(1, 6)]
    for a, b in zip(reps, reps[1:]):
        assert b.lambda_min_s <= a.lambda_min_s + 1e-12
        assert b.lambda_max_s >= a.lambda_max_s - 1e-12
    assert all(r.satisfied == (r.lambda_min_s > 0) for r in reps)


def test_re_guard():
    dm = DesignMatrix(np.ones((3, 60)), np.zeros(3))
    with pytest.raises(TooLarge):
        re_check_exhaustive(dm, 6)


def test_re_ar_design_frequency():
    ok = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        m = ArModel(draw_sparse_theta(20, 3, 0.5, rng))
        dm = build_design(simulate(m, n_total=220, seed=rng), 20)
        ok += re_check_exhaustive(dm, 3).satisfied
    assert ok >= 95


def test_true_covariance_interval_examples():
    lo, hi = true_covariance_interval(ArModel(np.zeros(4)))
    assert (lo, hi) == pytest.approx((1 / (8 * np.pi), 1 / (2 * np.pi)))
    ev = np.linalg.eigvalsh(spectral_covariance_matrix(ArModel(np.zeros(4)), 4))
    assert np.all((ev >= lo) & (ev <= hi))
    m = ArModel([0.1], 0.1)
    assert true_covariance_interval(m) == pytest.approx((0.1 / (8 * np.pi), 0.1 / (2 * np.pi * 0.81)))
    with pytest.raises(NotSufficientlyStable):
        true_covariance_interval(ArModel([0.6, -0.5]))


@given(st.integers(0, 10**6), st.integers(2, 30))
def test_covariance_eigs_between_psd_extremes(seed, k):
    m = ArModel(draw_sparse_theta(6, 3, 0.3, np.random.default_rng(seed)), 1.3)
    ev = np.linalg.eigvalsh(spectral_covariance_matrix(m, k))
    s = psd(m, np.linspace(0, np.pi, 20001))
    assert ev.min() >= s.min() * (1 - 1e-6)
    assert ev.max() <= s.max() * (1 + 1e-6)
