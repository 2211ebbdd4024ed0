"""AR estimators: least squares, Yule-Walker, Burg, lasso, greedy pursuit and
penalized Yule-Walker fits.

Two layers are provided.  The ``fit_*`` functions take prepared design or
covariance objects and return a :class:`FitResult`.  The estimator classes at
the bottom wrap them in the scikit-learn ``fit``/``predict`` protocol and
accept a raw 1-D series.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import solvers
from .design import build_design, empirical_covariance
from .exceptions import UnstableModel
from .model import ArModel, is_stable, spectral_spread
from .utils.validation import as_series, check_positive_int

__all__ = [
    "EstimatorConfig",
    "FitResult",
    "METHODS",
    "fit_ls",
    "fit_yule_walker",
    "levinson_durbin",
    "fit_burg",
    "fit_lasso",
    "fit_omp",
    "fit_yw_penalized",
    "fit_method",
    "auto_gamma",
    "auto_s_star",
    "LeastSquaresAR",
    "YuleWalkerAR",
    "BurgAR",
    "LassoAR",
    "OMPAR",
    "PenalizedYuleWalkerAR",
    "make_estimator",
]

METHODS = ("ls", "yw", "burg", "lasso", "yw_l21", "yw_l11", "omp", "ywomp")
STABILITY_POLICIES = ("reject", "warn", "project_l1")
LS_JITTER = 1e-10
PROJECT_MARGIN = 1e-3


class UnstableEstimateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    """Hyperparameters shared by the estimators.

    ``gamma`` and ``s_star`` accept ``"auto"``; the automatic values are
    ``d2_constant * sqrt(log p / n)`` and ``ceil(4 rho s log(20 rho s))`` with
    ``rho = rho_hint`` (or the spectral spread of a pilot Yule-Walker fit when
    ``rho_hint`` is None) and ``s = sparsity``.
    """

    gamma: object = 0.1
    s_star: object = "auto"
    d2_constant: float = 0.15
    rho_hint: float = None
    sparsity: int = None
    stability_policy: str = "warn"
    solver: solvers.SolverOptions = field(default_factory=solvers.SolverOptions)

    def __post_init__(self):
        if self.gamma == "auto":
            if not self.d2_constant > 0:
                raise ValueError("gamma='auto' requires d2_constant > 0")
        elif not (isinstance(self.gamma, (int, float)) and self.gamma >= 0):
            raise ValueError(f"gamma must be >= 0 or 'auto', got {self.gamma!r}")
        if self.s_star == "auto":
            if self.rho_hint is not None and self.rho_hint < 1:
                raise ValueError("rho_hint must be >= 1")
        elif isinstance(self.s_star, bool) or not isinstance(self.s_star, (int, np.integer)) or self.s_star < 0:
            raise ValueError(f"s_star must be a non-negative integer or 'auto', got {self.s_star!r}")
        if self.stability_policy not in STABILITY_POLICIES:
            raise ValueError(f"stability_policy must be one of {STABILITY_POLICIES}")


@dataclass(frozen=True)
class FitResult:
    model: ArModel
    method: str
    stable: bool
    solver_diagnostics: object = None

    @property
    def theta(self):
        return self.model.theta


def auto_gamma(n, p, d2=0.15):
    """Regularization ``d2 * sqrt(log(p) / n)`` (natural log)."""
    n = check_positive_int(n, "n")
    p = check_positive_int(p, "p", minimum=2)
    return d2 * math.sqrt(math.log(p) / n)


def auto_s_star(s, rho=1.0):
    """Greedy iteration budget ``ceil(4 rho s log(20 rho s))`` (natural log)."""
    s = check_positive_int(s, "s")
    if rho < 1:
        raise ValueError("rho must be >= 1")
    return int(math.ceil(4 * rho * s * math.log(20 * rho * s)))


def _residual_variance(dm, theta):
    e = dm.target - dm.x_matrix @ theta
    v = float(e @ e) / dm.n
    # exact interpolation (n <= p) leaves zero residuals; keep sigma_w2 > 0
    floor = np.finfo(float).eps * max(float(dm.target @ dm.target) / dm.n, 1e-300)
    return max(v, floor)


def _finalize(theta, sigma_w2, method, policy, diagnostics):
    theta = np.asarray(theta, dtype=float)
    stable = is_stable(theta)
    if not stable:
        if policy == "reject":
            raise UnstableModel(f"{method} estimate is not stable")
        if policy == "warn":
            warnings.warn(f"{method} estimate is not stable", UnstableEstimateWarning, stacklevel=3)
        elif policy == "project_l1":
            theta = theta * (1.0 - PROJECT_MARGIN) / np.abs(theta).sum()
            stable = is_stable(theta)
            if isinstance(diagnostics, dict):
                diagnostics["projected"] = True
    return FitResult(ArModel(theta, sigma_w2), method, stable, diagnostics)


def fit_ls(dm, stability_policy="warn"):
    """Unconstrained least squares via the normal equations.

    A ridge jitter of 1e-10 is added when ``X^T X`` is singular; with fewer
    rows than columns the minimum-norm solution is returned instead.
    """
    G, c = dm.gram()
    diag = {"underdetermined": dm.n < dm.p, "jitter": 0.0}
    if dm.n < dm.p:
        theta = np.linalg.lstsq(dm.x_matrix, dm.target, rcond=None)[0]
    else:
        try:
            theta = linalg.cho_solve(linalg.cho_factor(G), c)
        except linalg.LinAlgError:
            diag["jitter"] = LS_JITTER
            theta = linalg.solve(G + LS_JITTER * np.eye(dm.p), c, assume_a="sym")
        diag["cond"] = float(np.linalg.cond(G))
    return _finalize(theta, _residual_variance(dm, theta), "ls", stability_policy, diag)


def levinson_durbin(r, order=None):
    """Solve the Toeplitz system ``toeplitz(r[:p]) theta = r[1:p+1]``.

    Returns
    -------
    theta : ndarray of shape (p,)
    error : float
        Final prediction error power.
    reflection : ndarray of shape (p,)
        Reflection (partial autocorrelation) coefficients.
    """
    r = np.asarray(r, dtype=float)
    p = r.shape[0] - 1 if order is None else order
    a = np.zeros(p)
    k = np.zeros(p)
    err = r[0]
    for m in range(p):
        acc = r[m + 1] - a[:m] @ r[m:0:-1]
        km = acc / err
        k[m] = km
        a[:m] = a[:m] - km * a[:m][::-1]
        a[m] = km
        err *= 1.0 - km * km
    return a, err, k


def fit_yule_walker(ec, dm=None, stability_policy="warn"):
    """Yule-Walker estimate from biased autocovariances via Levinson-Durbin.

    ``dm`` (optional) is the design on the same series, used only to report an
    in-sample residual variance comparable with the other estimators.
    """
    r = ec.r_hat.copy()
    if r[0] <= 0:
        r[0] = LS_JITTER
    theta, err, refl = levinson_durbin(r)
    sigma = _residual_variance(dm, theta) if dm is not None else max(err, np.finfo(float).tiny)
    return _finalize(theta, sigma, "yw", stability_policy,
                     {"reflection": refl, "prediction_error": err})


def fit_burg(series, p, stability_policy="warn"):
    """Burg lattice recursion minimizing summed forward and backward errors."""
    p = check_positive_int(p, "p")
    x = as_series(series, min_length=p + 1)
    f = x[1:].copy()
    b = x[:-1].copy()
    a = np.zeros(p)
    refl = np.zeros(p)
    err = float(x @ x) / x.shape[0]
    for m in range(p):
        den = f @ f + b @ b
        km = 2.0 * (f @ b) / den if den > 0 else 0.0
        refl[m] = km
        a[:m] = a[:m] - km * a[:m][::-1]
        a[m] = km
        err *= 1.0 - km * km
        f, b = f[1:] - km * b[1:], b[:-1] - km * f[:-1]
    dm = build_design(x, p)
    return _finalize(a, _residual_variance(dm, a), "burg", stability_policy,
                     {"reflection": refl, "prediction_error": err})


def _resolve_gamma(cfg, n, p):
    return auto_gamma(n, max(p, 2), cfg.d2_constant) if cfg.gamma == "auto" else float(cfg.gamma)


def _resolve_s_star(cfg, ec):
    if cfg.s_star != "auto":
        return int(cfg.s_star)
    if cfg.sparsity is None:
        raise ValueError("s_star='auto' requires cfg.sparsity (the target sparsity level)")
    rho = cfg.rho_hint
    if rho is None:
        pilot = fit_yule_walker(ec).model
        rho = spectral_spread(pilot)
    return auto_s_star(cfg.sparsity, rho)


def fit_lasso(dm, cfg=None, history=None):
    """l1-regularized least squares, solved without the stability constraint."""
    cfg = cfg or EstimatorConfig()
    gamma = _resolve_gamma(cfg, dm.n, dm.p)
    theta = solvers.lasso_quadratic(dm, gamma, cfg.solver, history=history)
    kkt = solvers.kkt_check(dm, theta, gamma, tol=1e-6)
    return _finalize(theta, _residual_variance(dm, theta), "lasso", cfg.stability_policy, kkt)


def fit_omp(dm, cfg=None, objective="ls_loss", ec=None):
    """Generalized orthogonal matching pursuit.

    ``objective="ls_loss"`` pursues the least-squares loss on the design.
    ``objective="yw_loss"`` pursues ``||R_hat theta - r_hat||_2^2`` and needs
    ``ec``, the empirical covariance of the same series.
    """
    cfg = cfg or EstimatorConfig()
    if objective == "ls_loss":
        G, c = dm.gram()
        method = "omp"
    elif objective == "yw_loss":
        if ec is None:
            raise ValueError("yw_loss needs the empirical covariance `ec`")
        G, c = ec.R_hat.T @ ec.R_hat, ec.R_hat.T @ ec.rhs
        method = "ywomp"
    else:
        raise ValueError(f"objective must be 'ls_loss' or 'yw_loss', got {objective!r}")
    s_star = _resolve_s_star(cfg, ec if ec is not None else _ec_from_design(dm))
    theta, support = solvers.orthogonal_pursuit(G, c, s_star)
    return _finalize(theta, _residual_variance(dm, theta), method, cfg.stability_policy,
                     {"support": support, "s_star": s_star})


def _ec_from_design(dm):
    # reconstruct the underlying series (oldest first) from the design
    x = np.r_[dm.x_matrix[-1, ::-1], dm.target[::-1]]
    return empirical_covariance(x, dm.p)


def fit_yw_penalized(ec, cfg=None, kind="l21", dm=None):
    """Penalized Yule-Walker fit: ``||R theta - r||_2`` (``l21``) or ``||.||_1`` (``l11``) plus ``gamma ||theta||_1``."""
    cfg = cfg or EstimatorConfig()
    norm_kind = {"l21": "l2", "l11": "l1"}.get(kind)
    if norm_kind is None:
        raise ValueError(f"kind must be 'l21' or 'l11', got {kind!r}")
    n = dm.n if dm is not None else ec.p + 1
    gamma = _resolve_gamma(cfg, n, ec.p)
    theta, info = solvers.penalized_norm_solve(ec.R_hat, ec.rhs, gamma, norm_kind, cfg.solver,
                                               return_info=True)
    sigma = _residual_variance(dm, theta) if dm is not None else ec.r_hat[0]
    return _finalize(theta, sigma, f"yw_{kind}", cfg.stability_policy, info)


def fit_method(method, series, p, cfg=None):
    """Fit ``method`` (one of :data:`METHODS`) on a raw series with order ``p``."""
    cfg = cfg or EstimatorConfig()
    x = as_series(series, min_length=p + 1)
    if method == "burg":
        return fit_burg(x, p, cfg.stability_policy)
    dm = build_design(x, p)
    if method == "ls":
        return fit_ls(dm, cfg.stability_policy)
    if method == "lasso":
        return fit_lasso(dm, cfg)
    ec = empirical_covariance(x, p)
    if method == "yw":
        return fit_yule_walker(ec, dm, cfg.stability_policy)
    if method == "omp":
        return fit_omp(dm, cfg, "ls_loss", ec)
    if method == "ywomp":
        return fit_omp(dm, cfg, "yw_loss", ec)
    if method in ("yw_l21", "yw_l11"):
        return fit_yw_penalized(ec, cfg, method[3:], dm)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# scikit-learn style wrappers ------------------------------------------------


class _BaseAR(BaseEstimator):
    """Common ``fit``/``predict``/``score`` for AR estimators on a 1-D series."""

    _method = None

    def _config(self):
        return EstimatorConfig(stability_policy=self.stability_policy)

    def fit(self, X, y=None):
        x = as_series(X, min_length=self.order + 1, name="X")
        self.result_ = fit_method(self._method, x, self.order, self._config())
        self.coef_ = self.result_.theta
        self.sigma2_ = self.result_.model.sigma_w2
        self.stable_ = self.result_.stable
        self.n_features_in_ = 1
        return self

    @property
    def model_(self):
        check_is_fitted(self, "result_")
        return self.result_.model

    def predict(self, X):
        """One-step-ahead predictions for every sample with a full lag history."""
        check_is_fitted(self, "coef_")
        x = as_series(X, min_length=self.order + 1, name="X")
        dm = build_design(x, self.order)
        return (dm.x_matrix @ self.coef_)[::-1]

    def transform(self, X):
        """Residuals ``x_k - theta^T x_{k-p}^{k-1}`` in time order."""
        x = as_series(X, min_length=self.order + 1, name="X")
        return x[self.order:] - self.predict(x)

    def score(self, X, y=None):
        """Negative mean squared one-step prediction error."""
        e = self.transform(X)
        return -float(e @ e) / e.shape[0]


class LeastSquaresAR(_BaseAR):
    _method = "ls"

    def __init__(self, order=10, stability_policy="warn"):
        self.order = order
        self.stability_policy = stability_policy


class YuleWalkerAR(_BaseAR):
    _method = "yw"

    def __init__(self, order=10, stability_policy="warn"):
        self.order = order
        self.stability_policy = stability_policy


class BurgAR(_BaseAR):
    _method = "burg"

    def __init__(self, order=10, stability_policy="warn"):
        self.order = order
        self.stability_policy = stability_policy


class LassoAR(_BaseAR):
    """l1-regularized least-squares AR fit.

    Parameters
    ----------
    order : int
    gamma : float or "auto"
        Penalty weight; ``"auto"`` uses ``d2 * sqrt(log(order) / n)``.
    d2 : float
    tol, max_iter : solver stopping rules.
    stability_policy : {"warn", "reject", "project_l1"}
    """

    _method = "lasso"

    def __init__(self, order=10, gamma=0.1, d2=0.15, tol=1e-8, max_iter=100_000,
                 stability_policy="warn"):
        self.order = order
        self.gamma = gamma
        self.d2 = d2
        self.tol = tol
        self.max_iter = max_iter
        self.stability_policy = stability_policy

    def _config(self):
        return EstimatorConfig(gamma=self.gamma, d2_constant=self.d2,
                               stability_policy=self.stability_policy,
                               solver=solvers.SolverOptions(self.max_iter, self.tol))


class OMPAR(_BaseAR):
    """Greedy pursuit AR fit on the least-squares (``"ls_loss"``) or Yule-Walker (``"yw_loss"``) objective."""

    def __init__(self, order=10, s_star="auto", sparsity=None, rho=None, objective="ls_loss",
                 stability_policy="warn"):
        self.order = order
        self.s_star = s_star
        self.sparsity = sparsity
        self.rho = rho
        self.objective = objective
        self.stability_policy = stability_policy

    @property
    def _method(self):
        return {"ls_loss": "omp", "yw_loss": "ywomp"}[self.objective]

    def _config(self):
        return EstimatorConfig(s_star=self.s_star, sparsity=self.sparsity, rho_hint=self.rho,
                               stability_policy=self.stability_policy)

    def fit(self, X, y=None):
        super().fit(X, y)
        self.support_ = np.asarray(self.result_.solver_diagnostics["support"], dtype=int)
        return self


class PenalizedYuleWalkerAR(_BaseAR):
    """Yule-Walker residual norm (``kind="l21"``: l2, ``"l11"``: l1) plus an l1 penalty."""

    def __init__(self, order=10, gamma=0.1, kind="l21", d2=0.15, tol=1e-8, max_iter=100_000,
                 stability_policy="warn"):
        self.order = order
        self.gamma = gamma
        self.kind = kind
        self.d2 = d2
        self.tol = tol
        self.max_iter = max_iter
        self.stability_policy = stability_policy

    @property
    def _method(self):
        return f"yw_{self.kind}"

    def _config(self):
        return EstimatorConfig(gamma=self.gamma, d2_constant=self.d2,
                               stability_policy=self.stability_policy,
                               solver=solvers.SolverOptions(self.max_iter, self.tol))


def make_estimator(method, order, cfg=None):
    """Build the estimator class for ``method`` from an :class:`EstimatorConfig`."""
    cfg = cfg or EstimatorConfig()
    pol = cfg.stability_policy
    if method == "ls":
        return LeastSquaresAR(order, pol)
    if method == "yw":
        return YuleWalkerAR(order, pol)
    if method == "burg":
        return BurgAR(order, pol)
    if method == "lasso":
        return LassoAR(order, cfg.gamma, cfg.d2_constant, cfg.solver.tol, cfg.solver.max_iter, pol)
    if method in ("omp", "ywomp"):
        return OMPAR(order, cfg.s_star, cfg.sparsity, cfg.rho_hint,
                     "ls_loss" if method == "omp" else "yw_loss", pol)
    if method in ("yw_l21", "yw_l11"):
        return PenalizedYuleWalkerAR(order, cfg.gamma, method[3:], cfg.d2_constant,
                                     cfg.solver.tol, cfg.solver.max_iter, pol)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
