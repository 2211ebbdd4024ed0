"""Autoregressive model definition, simulation and spectral quantities.

The process is ``x_k = theta_1 x_{k-1} + ... + theta_p x_{k-p} + w_k`` with
i.i.d. zero-mean sub-Gaussian innovations of variance ``sigma_w2``.  Spectral
densities carry the ``1 / (2 pi)`` factor so that integrating over
``[-pi, pi]`` gives the lag-0 autocovariance.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal

from .exceptions import InvalidLength, UnstableModel
from .utils.validation import check_positive, check_positive_int, check_theta

__all__ = [
    "ArModel",
    "InnovationSpec",
    "TimeSeries",
    "simulate",
    "is_stable",
    "sufficient_stable",
    "psd",
    "spectral_spread",
    "theoretical_autocovariance",
    "compressibility",
]

INNOVATION_KINDS = ("gaussian", "uniform", "rademacher")


@dataclass(frozen=True, eq=False)
class ArModel:
    """AR(p) parameters.

    Parameters
    ----------
    theta : array_like of shape (p,)
        Coefficients, lag 1 first.
    sigma_w2 : float
        Innovation variance, strictly positive.
    """

    theta: np.ndarray
    sigma_w2: float = 1.0

    def __post_init__(self):
        theta = check_theta(self.theta)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma_w2", check_positive(self.sigma_w2, "sigma_w2"))

    @property
    def order(self):
        return self.theta.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ArModel):
            return NotImplemented
        return self.sigma_w2 == other.sigma_w2 and np.array_equal(self.theta, other.theta)

    __hash__ = None

    def to_dict(self):
        return {"theta": self.theta.tolist(), "sigma_w2": self.sigma_w2, "order": self.order}

    @classmethod
    def from_dict(cls, d):
        model = cls(np.asarray(d["theta"], dtype=float), float(d["sigma_w2"]))
        if "order" in d and int(d["order"]) != model.order:
            raise ValueError(f"order {d['order']} does not match len(theta)={model.order}")
        return model


@dataclass(frozen=True)
class InnovationSpec:
    """Innovation family and variance (``scale`` is the variance)."""

    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in INNOVATION_KINDS:
            raise ValueError(f"kind must be one of {INNOVATION_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "scale", check_positive(self.scale, "scale"))

    def sample(self, rng, size):
        sd = np.sqrt(self.scale)
        if self.kind == "gaussian":
            return sd * rng.standard_normal(size)
        if self.kind == "uniform":
            # U(-a, a) has variance a^2 / 3
            a = np.sqrt(3.0) * sd
            return rng.uniform(-a, a, size)
        return sd * (2.0 * rng.integers(0, 2, size) - 1.0)


@dataclass(frozen=True)
class TimeSeries:
    """Ordered samples; ``start_index`` labels the first value (e.g. ``-p + 1``)."""

    values: np.ndarray
    start_index: int = 0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("TimeSeries values contain NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _companion_eigvals(theta):
    if theta.size == 1:
        return theta.copy()
    return linalg.eigvals(linalg.companion(np.r_[1.0, -theta]))


def is_stable(theta):
    """True iff every root of ``z^p - theta_1 z^{p-1} - ... - theta_p`` lies inside the unit circle."""
    theta = check_theta(theta)
    if not np.any(theta):
        return True
    return bool(np.max(np.abs(_companion_eigvals(theta))) < 1.0)


def sufficient_stable(theta):
    """The l1 condition ``||theta||_1 < 1``, sufficient but not necessary for stability."""
    return bool(np.sum(np.abs(check_theta(theta))) < 1.0)


def _require_stable(model):
    if not is_stable(model.theta):
        raise UnstableModel("model has a companion-matrix eigenvalue on or outside the unit circle")


def simulate(model, innovations=None, n_total=1000, burn_in=None, seed=None):
    """Draw a realization of the AR recursion.

    Parameters
    ----------
    model : ArModel
    innovations : InnovationSpec, optional
        Defaults to Gaussian innovations with variance ``model.sigma_w2``.
    n_total : int
        Number of samples returned.
    burn_in : int, optional
        Samples discarded before the returned block; default ``10 * p``.
    seed : int or numpy.random.SeedSequence, optional

    Returns
    -------
    TimeSeries
    """
    if isinstance(n_total, bool) or not isinstance(n_total, (int, np.integer)) or n_total < 1:
        raise InvalidLength(f"n_total must be a positive integer, got {n_total!r}")
    _require_stable(model)
    if innovations is None:
        innovations = InnovationSpec("gaussian", model.sigma_w2)
    if burn_in is None:
        burn_in = 10 * model.order
    burn_in = check_positive_int(burn_in, "burn_in", minimum=0)
    rng = np.random.default_rng(seed)
    w = innovations.sample(rng, burn_in + int(n_total))
    x = signal.lfilter([1.0], np.r_[1.0, -model.theta], w)
    return TimeSeries(x[burn_in:])


def _frequency_response_sq(theta, omega):
    """|1 - sum_l theta_l e^{-j l omega}|^2 on an array of frequencies."""
    omega = np.asarray(omega, dtype=np.float64)
    _, h = signal.freqz(np.r_[1.0, -theta], worN=np.atleast_1d(omega))
    return np.abs(h) ** 2


def psd(model, omega):
    """Power spectral density ``sigma_w2 / (2 pi |A(e^{j omega})|^2)``.

    ``omega`` may be a scalar or an array.
    """
    _require_stable(model)
    scalar = np.ndim(omega) == 0
    vals = model.sigma_w2 / (2.0 * np.pi * _frequency_response_sq(model.theta, omega))
    return float(vals[0]) if scalar else vals


def spectral_spread(model, grid_size=4096):
    """Ratio max/min of the PSD on a uniform grid of ``grid_size`` points over ``[0, pi]``.

    A grid lower bound on the true sup/inf ratio.
    """
    grid_size = check_positive_int(grid_size, "grid_size", minimum=2)
    _require_stable(model)
    a2 = _frequency_response_sq(model.theta, np.linspace(0.0, np.pi, grid_size))
    return float(a2.max() / a2.min())


def theoretical_autocovariance(model, max_lag):
    """Exact autocovariances ``r_0 .. r_max_lag``.

    Lags up to ``p`` come from the linear system
    ``r_m - sum_l theta_l r_|m-l| = sigma_w2 * [m == 0]``; larger lags follow
    the recursion ``r_k = sum_l theta_l r_{k-l}``.
    """
    max_lag = check_positive_int(max_lag, "max_lag", minimum=0)
    _require_stable(model)
    theta, p = model.theta, model.order
    A = np.eye(p + 1)
    rows = np.arange(p + 1)
    for ell in range(1, p + 1):
        np.subtract.at(A, (rows, np.abs(rows - ell)), theta[ell - 1])
    b = np.zeros(p + 1)
    b[0] = model.sigma_w2
    r = np.linalg.solve(A, b)
    if max_lag <= p:
        return r[: max_lag + 1]
    out = np.empty(max_lag + 1)
    out[: p + 1] = r
    for k in range(p + 1, max_lag + 1):
        out[k] = theta @ out[k - 1 :: -1][:p]
    return out


def compressibility(theta, s):
    """l1 and l2 norms of ``theta`` minus its best s-term approximation.

    Ties in magnitude keep the lowest index.

    Returns
    -------
    sigma_s, varsigma_s : float
    """
    theta = check_theta(theta)
    s = check_positive_int(s, "s")
    if s > theta.size:
        raise ValueError(f"s={s} exceeds len(theta)={theta.size}")
    keep = np.argsort(-np.abs(theta), kind="stable")[:s]
    resid = theta.copy()
    resid[keep] = 0.0
    return float(np.sum(np.abs(resid))), float(np.sqrt(np.sum(resid**2)))
