"""Toeplitz covariate matrices, empirical covariances and restricted eigenvalues."""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import toeplitz

from .exceptions import NotSufficientlyStable, TooLarge
from .model import theoretical_autocovariance
from .utils.validation import as_series, check_positive_int

__all__ = [
    "DesignMatrix",
    "EmpiricalCovariance",
    "ReReport",
    "build_design",
    "empirical_covariance",
    "re_check_exhaustive",
    "true_covariance_interval",
    "spectral_covariance_matrix",
]

RE_SUBSET_LIMIT = 10**6
EIG_CLAMP = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    """Lagged covariates ``x_matrix`` (n, p) and regression targets ``target`` (n,).

    Row ``i`` holds the ``p`` samples preceding ``target[i]``, most recent first.
    Rows are ordered from the latest target down to the earliest.
    """

    x_matrix: np.ndarray
    target: np.ndarray

    @property
    def n(self):
        return self.x_matrix.shape[0]

    @property
    def p(self):
        return self.x_matrix.shape[1]

    def gram(self):
        """``X^T X / n`` and ``X^T x / n``."""
        X, y = self.x_matrix, self.target
        return X.T @ X / self.n, X.T @ y / self.n


@dataclass(frozen=True)
class EmpiricalCovariance:
    """Biased sample autocovariances.

    ``r_hat[k]`` for ``k = 0..p``; ``R_hat`` is the ``p x p`` Toeplitz matrix
    built from ``r_hat[:p]``.  The Yule-Walker right-hand side is ``r_hat[1:]``.
    """

    r_hat: np.ndarray
    R_hat: np.ndarray

    @property
    def p(self):
        return self.R_hat.shape[0]

    @property
    def rhs(self):
        return self.r_hat[1:]


@dataclass(frozen=True)
class ReReport:
    s: int
    lambda_min_s: float
    lambda_max_s: float
    satisfied: bool
    subsets_checked: int


def build_design(series, p):
    """Covariate matrix for an AR(p) regression on ``series``.

    With ``N = len(series)`` the design has ``n = N - p`` rows; the first row
    is ``[x_{N-2}, ..., x_{N-p-1}]`` (0-based) and predicts ``x_{N-1}``.
    """
    p = check_positive_int(p, "p")
    x = as_series(series, min_length=p + 1)
    # windows[t] = x[t : t + p]; reversed so the most recent lag comes first
    windows = sliding_window_view(x[:-1], p)[:, ::-1]
    X = np.ascontiguousarray(windows[::-1])
    y = x[p:][::-1].copy()
    return DesignMatrix(X, y)


def empirical_covariance(series, p):
    """Biased autocovariances ``r_hat[k] = (1/N) sum_i x_i x_{i+k}`` for ``k <= p``.

    The constant divisor ``N`` keeps ``R_hat`` positive semidefinite.
    """
    p = check_positive_int(p, "p")
    x = as_series(series, min_length=p + 1)
    N = x.shape[0]
    r = np.array([x[: N - k] @ x[k:] for k in range(p + 1)]) / N
    return EmpiricalCovariance(r, toeplitz(r[:p]))


def _subset_gram_eigs(G, s, chunk=20000):
    lo, hi = np.inf, -np.inf
    it = combinations(range(G.shape[0]), s)
    count = 0
    while True:
        block = np.array([c for _, c in zip(range(chunk), it)], dtype=np.intp)
        if block.size == 0:
            break
        count += block.shape[0]
        sub = G[block[:, :, None], block[:, None, :]]
        ev = np.linalg.eigvalsh(sub)
        lo = min(lo, float(ev[:, 0].min()))
        hi = max(hi, float(ev[:, -1].max()))
    return lo, hi, count


def re_check_exhaustive(dm, s):
    """Extreme eigenvalues of ``X_S^T X_S / n`` over every column subset of size ``s``.

    Raises
    ------
    TooLarge
        When ``C(p, s)`` exceeds 10**6.
    """
    s = check_positive_int(s, "s")
    if s > dm.p:
        raise ValueError(f"s={s} exceeds p={dm.p}")
    total = comb(dm.p, s)
    if total > RE_SUBSET_LIMIT:
        raise TooLarge(f"C({dm.p}, {s}) = {total} subsets exceeds {RE_SUBSET_LIMIT}")
    G, _ = dm.gram()
    lo, hi, count = _subset_gram_eigs(G, s)
    if abs(lo) < EIG_CLAMP:
        lo = 0.0
    if abs(hi) < EIG_CLAMP:
        hi = 0.0
    return ReReport(s=s, lambda_min_s=lo, lambda_max_s=hi, satisfied=lo > 0, subsets_checked=count)


def true_covariance_interval(model):
    """Eigenvalue interval ``[sigma_w2 / (8 pi), sigma_w2 / (2 pi eta^2)]`` with ``eta = 1 - ||theta||_1``.

    The interval bounds the spectrum of :func:`spectral_covariance_matrix`.
    """
    eta = 1.0 - float(np.sum(np.abs(model.theta)))
    if eta <= 0:
        raise NotSufficientlyStable(f"||theta||_1 = {1 - eta:.6g} >= 1")
    return model.sigma_w2 / (8 * np.pi), model.sigma_w2 / (2 * np.pi * eta**2)


def spectral_covariance_matrix(model, size):
    """``size x size`` Toeplitz covariance divided by ``2 pi``.

    This is the covariance expressed on the same scale as the PSD, whose
    eigenvalues lie between the infimum and supremum of :func:`sparsear.model.psd`.
    """
    size = check_positive_int(size, "size")
    r = theoretical_autocovariance(model, size - 1)
    return toeplitz(r) / (2 * np.pi)
