"""Optimization kernels used by the estimators.

* :func:`lasso_quadratic` -- cyclic coordinate descent on
  ``(1/n)||x - X theta||^2 + gamma ||theta||_1`` using the Gram matrix.
* :func:`penalized_norm_solve` -- ``||R theta - r||_q + gamma ||theta||_1``
  for ``q = 2`` (ADMM) or ``q = 1`` (linear program).
* :func:`restricted_ls` and :func:`orthogonal_pursuit` -- support-restricted
  least squares and the greedy pursuit built on it.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from .exceptions import NoConvergence, RankDeficient

__all__ = [
    "SolverOptions",
    "KktReport",
    "lasso_quadratic",
    "lasso_gram",
    "kkt_check",
    "restricted_ls",
    "orthogonal_pursuit",
    "penalized_norm_solve",
    "soft_threshold",
]

RANK_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rules shared by the iterative solvers.

    ``tol`` bounds the relative objective decrease between sweeps; the
    coordinate-descent solver additionally waits for the KKT violation to drop
    below ``kkt_tol``.  ``step_policy`` selects fixed or residual-balanced
    penalty updates in ADMM.
    """

    max_iter: int = 100_000
    tol: float = 1e-8
    step_policy: str = "backtracking"
    kkt_tol: float = 1e-7

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.step_policy not in ("fixed", "backtracking"):
            raise ValueError("step_policy must be 'fixed' or 'backtracking'")


@dataclass(frozen=True)
class KktReport:
    max_violation: float
    active_set: tuple
    stationarity_ok: bool
    tol: float = 1e-6
    extra: dict = field(default_factory=dict, compare=False)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _kkt_violation(grad, theta, gamma):
    nz = theta != 0
    viol = np.where(nz, np.abs(grad + gamma * np.sign(theta)), np.maximum(0.0, np.abs(grad) - gamma))
    return float(viol.max()) if viol.size else 0.0


def kkt_check(dm, theta_hat, gamma, tol=1e-6):
    """Subgradient optimality certificate for the quadratic lasso objective.

    With ``g = (2/n) X^T (X theta - x)`` the violation at a nonzero coordinate
    is ``|g_j + gamma sign(theta_j)|`` and at a zero coordinate
    ``max(0, |g_j| - gamma)``.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    X, y = dm.x_matrix, dm.target
    if theta_hat.shape != (X.shape[1],):
        raise ValueError(f"theta_hat has shape {theta_hat.shape}, expected ({X.shape[1]},)")
    g = 2.0 / dm.n * (X.T @ (X @ theta_hat - y))
    v = _kkt_violation(g, theta_hat, gamma)
    return KktReport(v, tuple(np.flatnonzero(theta_hat).tolist()), v <= tol, tol)


def _objective(G, c, yy, theta, gamma):
    return float(theta @ (G @ theta) - 2.0 * c @ theta + yy + gamma * np.abs(theta).sum())


def lasso_gram(G, c, yy, gamma, opts=None, theta0=None, history=None):
    """Coordinate descent on ``theta^T G theta - 2 c^T theta + yy + gamma ||theta||_1``.

    Full sweeps alternate with sweeps restricted to the current active set.
    If ``history`` is a list, the objective after every sweep is appended.
    Returns ``(theta, n_sweeps)``.
    """
    opts = opts or SolverOptions()
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    p = c.shape[0]
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)
    Gt = G @ theta
    diag = np.diag(G).copy()
    half = 0.5 * gamma
    usable = diag > 0

    def sweep(idx):
        for j in idx:
            old = theta[j]
            z = c[j] - Gt[j] + diag[j] * old
            new = np.sign(z) * max(abs(z) - half, 0.0) / diag[j]
            if new != old:
                Gt[:] += G[j] * (new - old)
                theta[j] = new

    all_idx = np.flatnonzero(usable)
    obj = _objective(G, c, yy, theta, gamma)
    sweeps = 0
    while sweeps < opts.max_iter:
        sweep(all_idx)
        sweeps += 1
        new_obj = float(theta @ Gt - 2.0 * c @ theta + yy + gamma * np.abs(theta).sum())
        if history is not None:
            history.append(new_obj)
        dec = (obj - new_obj) / max(abs(new_obj), 1e-300)
        obj = new_obj
        kkt = _kkt_violation(2.0 * (Gt - c), theta, gamma)
        if dec <= opts.tol and kkt <= opts.kkt_tol:
            return theta, sweeps
        active = np.flatnonzero(theta)
        # polish the active set before paying for another full sweep
        while active.size and sweeps < opts.max_iter:
            sweep(active)
            sweeps += 1
            new_obj = float(theta @ Gt - 2.0 * c @ theta + yy + gamma * np.abs(theta).sum())
            if history is not None:
                history.append(new_obj)
            dec = (obj - new_obj) / max(abs(new_obj), 1e-300)
            obj = new_obj
            if dec <= 0.1 * opts.tol:
                break
    raise NoConvergence(f"coordinate descent did not converge in {opts.max_iter} sweeps",
                        theta=theta, n_iter=sweeps)


def lasso_quadratic(dm, gamma, opts=None, history=None):
    """Minimize ``(1/n)||x - X theta||_2^2 + gamma ||theta||_1`` without constraints.

    Raises
    ------
    NoConvergence
        With the last iterate attached as ``exc.theta``.
    """
    G, c = dm.gram()
    yy = float(dm.target @ dm.target) / dm.n
    theta, _ = lasso_gram(G, c, yy, gamma, opts, history=history)
    return theta


def _check_rank(XS):
    sv = np.linalg.svd(XS, compute_uv=False)
    if sv.size and not sv[0] <= sv[-1] * np.sqrt(RANK_COND_LIMIT):
        raise RankDeficient(f"restricted Gram condition number exceeds {RANK_COND_LIMIT:g}")


def restricted_ls(dm, support):
    """Least squares restricted to the columns in ``support``; zero elsewhere."""
    support = np.asarray(sorted(set(int(i) for i in support)), dtype=np.intp)
    theta = np.zeros(dm.p)
    if support.size == 0:
        return theta
    if support.size > dm.n:
        raise RankDeficient(f"support size {support.size} exceeds n={dm.n}")
    XS = dm.x_matrix[:, support]
    _check_rank(XS)
    theta[support] = np.linalg.lstsq(XS, dm.target, rcond=None)[0]
    return theta


def orthogonal_pursuit(G, c, s_star):
    """Greedy pursuit on the quadratic ``theta^T G theta - 2 c^T theta``.

    Each step adds the coordinate with the largest absolute gradient
    ``|G theta - c|`` among those not yet selected, then re-solves the normal
    equations on the enlarged support via an updated Cholesky factor.

    Returns
    -------
    theta : ndarray
    support : list of int
        Indices in order of selection.
    """
    p = c.shape[0]
    s_star = min(int(s_star), p)
    theta = np.zeros(p)
    support = []
    L = np.zeros((s_star, s_star))
    selected = np.zeros(p, dtype=bool)
    dmax = 0.0
    for k in range(s_star):
        grad = np.abs(G[:, support] @ theta[support] - c) if support else np.abs(c)
        grad[selected] = -np.inf
        j = int(np.argmax(grad))
        if k:
            w = linalg.solve_triangular(L[:k, :k], G[support, j], lower=True)
            d2 = G[j, j] - w @ w
        else:
            w = np.empty(0)
            d2 = G[j, j]
        dmax = max(dmax, G[j, j])
        if not d2 > dmax / RANK_COND_LIMIT:
            raise RankDeficient(f"column {j} is numerically dependent on the current support")
        L[k, :k] = w
        L[k, k] = np.sqrt(d2)
        support.append(j)
        selected[j] = True
        Lk = L[: k + 1, : k + 1]
        z = linalg.solve_triangular(Lk, c[support], lower=True)
        theta[:] = 0.0
        theta[support] = linalg.solve_triangular(Lk.T, z, lower=False)
    return theta, support


def _l2_objective(A, b, gamma, theta):
    return float(np.linalg.norm(A @ theta - b) + gamma * np.abs(theta).sum())


def _admm_l2(A, b, gamma, opts, eps_abs=1e-9, eps_rel=1e-8):
    p = A.shape[1]
    M = A.T @ A + np.eye(p)
    cho = linalg.cho_factor(M)
    theta = linalg.cho_solve(cho, A.T @ b)
    z = A @ theta - b
    w = theta.copy()
    u = np.zeros_like(z)
    v = np.zeros(p)
    rho = 1.0
    best = np.zeros(p)
    best_obj = _l2_objective(A, b, gamma, best)
    for it in range(1, opts.max_iter + 1):
        theta = linalg.cho_solve(cho, A.T @ (z + b - u) + (w - v))
        Atheta = A @ theta
        a = Atheta - b + u
        na = np.linalg.norm(a)
        z_old, w_old = z, w
        z = a * max(0.0, 1.0 - 1.0 / (rho * na)) if na > 0 else np.zeros_like(a)
        w = soft_threshold(theta + v, gamma / rho)
        r1 = Atheta - z - b
        r2 = theta - w
        u = u + r1
        v = v + r2
        obj = _l2_objective(A, b, gamma, w)
        if obj < best_obj:
            best, best_obj = w.copy(), obj
        r_norm = np.sqrt(r1 @ r1 + r2 @ r2)
        s_norm = rho * np.linalg.norm(A.T @ (z - z_old) + (w - w_old))
        eps_pri = np.sqrt(2 * p) * eps_abs + eps_rel * max(
            np.sqrt(Atheta @ Atheta + theta @ theta), np.sqrt(z @ z + w @ w), np.linalg.norm(b))
        eps_dual = np.sqrt(p) * eps_abs + eps_rel * rho * np.linalg.norm(A.T @ u + v)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            return best, {"n_iter": it, "objective": best_obj}
        if opts.step_policy == "backtracking" and it % 10 == 0:
            # residual balancing; the theta-system does not depend on rho
            if r_norm > 10 * s_norm:
                rho *= 2.0
                u, v = u / 2.0, v / 2.0
            elif s_norm > 10 * r_norm:
                rho /= 2.0
                u, v = u * 2.0, v * 2.0
    raise NoConvergence(f"ADMM did not converge in {opts.max_iter} iterations",
                        theta=best, n_iter=opts.max_iter)


def _lp_l1(A, b, gamma):
    m, p = A.shape
    # theta = a - c and A theta - b = t - u with a, c, t, u >= 0
    A_eq = np.hstack([A, -A, -np.eye(m), np.eye(m)])
    cost = np.r_[gamma * np.ones(2 * p), np.ones(2 * m)]
    res = linprog(cost, A_eq=A_eq, b_eq=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise NoConvergence(f"linear program failed: {res.message}")
    theta = res.x[:p] - res.x[p:2 * p]
    theta[np.abs(theta) < 1e-13] = 0.0
    dual = float(b @ res.eqlin.marginals)
    gap = abs(float(res.fun) - dual)
    return theta, {"objective": float(res.fun), "dual_objective": dual, "duality_gap": gap}


def penalized_norm_solve(R_hat, r_hat, gamma, norm_kind="l2", opts=None, return_info=False):
    """Minimize ``||R_hat theta - r_hat||_q + gamma ||theta||_1``.

    Parameters
    ----------
    R_hat : ndarray of shape (m, p)
    r_hat : ndarray of shape (m,)
    gamma : float
    norm_kind : {"l2", "l1"}
        ``"l2"`` uses the (unsquared) Euclidean norm and is solved by ADMM;
        ``"l1"`` is recast as a linear program.
    return_info : bool
        Also return a dict of solver diagnostics.
    """
    opts = opts or SolverOptions()
    A = np.asarray(R_hat, dtype=float)
    b = np.asarray(r_hat, dtype=float)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if norm_kind == "l2":
        theta, info = _admm_l2(A, b, gamma, opts)
    elif norm_kind == "l1":
        theta, info = _lp_l1(A, b, gamma)
    else:
        raise ValueError(f"norm_kind must be 'l2' or 'l1', got {norm_kind!r}")
    return (theta, info) if return_info else theta
