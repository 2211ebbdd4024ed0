"""Goodness-of-fit statistics for fitted AR models.

Residual-based Kolmogorov-Smirnov, Cramer-von Mises and Anderson-Darling
statistics against a hypothesized innovation CDF, and a spectral
Cramer-von Mises statistic comparing the periodogram with a model spectrum.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .design import build_design
from .model import _frequency_response_sq, _require_stable, is_stable
from .utils.validation import as_series, check_positive_int

__all__ = [
    "ResidualSeries",
    "GofReport",
    "residuals",
    "ks_statistic",
    "cvm_statistic",
    "ad_statistic",
    "periodogram",
    "scvm_statistic",
    "scvm_from_spectra",
    "gof_report",
]

AD_CLAMP = 1e-12


@dataclass(frozen=True)
class ResidualSeries:
    """Residuals with the null CDF they are tested against."""

    residuals: np.ndarray
    null_cdf: object

    def pit(self):
        """Sorted probability-integral transform ``F0(e_(i))``."""
        return np.sort(np.asarray(self.null_cdf(self.residuals), dtype=float))

    def __len__(self):
        return self.residuals.shape[0]


@dataclass(frozen=True)
class GofReport:
    ks: float
    cvm: float
    ad: float
    scvm: float = None

    def as_row(self):
        return {"cvm": self.cvm, "ad": self.ad, "ks": self.ks, "scvm": self.scvm}


def normal_cdf(variance):
    return stats.norm(loc=0.0, scale=np.sqrt(variance)).cdf


def residuals(series, model, null_cdf=None):
    """One-step prediction residuals for every sample with a full lag history.

    The null CDF defaults to ``Normal(0, model.sigma_w2)``; estimators set
    ``sigma_w2`` to the residual variance on their fitting data, so scoring a
    held-out series tests against a distribution estimated elsewhere.
    """
    x = as_series(series, min_length=model.order + 1)
    dm = build_design(x, model.order)
    e = (dm.target - dm.x_matrix @ model.theta)[::-1]
    if null_cdf is None:
        null_cdf = normal_cdf(model.sigma_w2)
    return ResidualSeries(e, null_cdf)


def _check_rs(rs):
    if len(rs) < 2:
        raise ValueError("need at least 2 residuals")


def ks_statistic(rs):
    """``max_i max(|i/n - F0(e_(i))|, |(i-1)/n - F0(e_(i))|)``."""
    _check_rs(rs)
    u = rs.pit()
    n = u.shape[0]
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - u)), np.max(np.abs((i - 1) / n - u))))


def cvm_statistic(rs):
    """``n C_n = 1/(12 n) + sum_i (F0(e_(i)) - (2i - 1)/(2n))^2``."""
    _check_rs(rs)
    u = rs.pit()
    n = u.shape[0]
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2 * n)) ** 2))


def ad_statistic(rs, same_index=False):
    """Anderson-Darling ``n A_n``.

    The default is the standard sorted form pairing ``F0(e_(i))`` with
    ``1 - F0(e_(n+1-i))``.  ``same_index=True`` pairs both logs at index
    ``i`` instead; that variant is not a consistent goodness-of-fit measure
    and is kept only for comparison with published tables.
    CDF values are clamped to ``[1e-12, 1 - 1e-12]``.
    """
    _check_rs(rs)
    u = np.clip(rs.pit(), AD_CLAMP, 1.0 - AD_CLAMP)
    n = u.shape[0]
    i = np.arange(1, n + 1)
    upper = u if same_index else u[::-1]
    return float(-n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-upper))) / n)


def frequency_grid(grid):
    return np.linspace(0.0, np.pi, check_positive_int(grid, "grid", minimum=2))


def periodogram(series, grid=1024):
    """``(1 / (2 pi n)) |sum_k x_k e^{-j omega k}|^2`` on ``grid`` points over ``[0, pi]``.

    Evaluated exactly: by a zero-padded FFT when ``2 (grid - 1) >= n``, by
    direct summation otherwise.
    """
    x = as_series(series, min_length=2)
    n = x.shape[0]
    grid = check_positive_int(grid, "grid", minimum=2)
    m = 2 * (grid - 1)
    if m >= n:
        dft = np.fft.rfft(x, m)
    else:
        omega = frequency_grid(grid)
        k = np.arange(n)
        dft = np.empty(grid, dtype=complex)
        step = max(1, 2**22 // n)
        for lo in range(0, grid, step):
            dft[lo:lo + step] = np.exp(-1j * np.outer(omega[lo:lo + step], k)) @ x
    return np.abs(dft) ** 2 / (2 * np.pi * n)


def scvm_from_spectra(sample_spectrum, model_spectrum, n):
    """Spectral CvM statistic from two spectra sampled on the same ``[0, pi]`` grid.

    Both spectra are normalized to unit integral over ``[0, pi]``; then
    ``Z(omega) = sqrt(n) * 2 * int_0^omega (S_hat - S)`` and the statistic is
    ``(1/pi) int_0^pi Z^2``, all by the trapezoid rule.
    """
    s_hat = np.asarray(sample_spectrum, dtype=float)
    s_mod = np.asarray(model_spectrum, dtype=float)
    omega = frequency_grid(s_hat.shape[0])
    s_hat = s_hat / integrate.trapezoid(s_hat, omega)
    s_mod = s_mod / integrate.trapezoid(s_mod, omega)
    z = np.sqrt(n) * 2.0 * integrate.cumulative_trapezoid(s_hat - s_mod, omega, initial=0.0)
    return float(integrate.trapezoid(z * z, omega) / np.pi)


def default_scvm_grid(n):
    return max(1024, 2 * n)


def scvm_statistic(series, model, grid=None):
    """Spectral CvM statistic of ``series`` against the spectrum of ``model``.

    ``grid`` defaults to ``max(1024, 2 n)`` points so the periodogram is
    resolved finer than its natural frequency spacing.
    """
    _require_stable(model)
    x = as_series(series, min_length=2)
    grid = default_scvm_grid(x.shape[0]) if grid is None else grid
    s_hat = periodogram(x, grid)
    s_mod = 1.0 / _frequency_response_sq(model.theta, frequency_grid(grid))
    return scvm_from_spectra(s_hat, s_mod, x.shape[0])


def gof_report(test_series, model, null_cdf=None, spectral=True, grid=None):
    """All four statistics of ``model`` on ``test_series``.

    The SCvM entry is None when ``spectral`` is False or the model is unstable.
    """
    rs = residuals(test_series, model, null_cdf)
    scvm = None
    if spectral and is_stable(model.theta):
        scvm = scvm_statistic(test_series, model, grid)
    return GofReport(ks_statistic(rs), cvm_statistic(rs), ad_statistic(rs), scvm)
