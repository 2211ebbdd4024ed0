"""Simulation harness: MSE sweeps, error-rate scaling checks and GoF tables.

Every random draw is derived from ``SeedSequence([master_seed, seed_index])``
so results depend only on the cell key, never on execution order or the
number of worker processes.
"""

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataio import SplitSpec, split
from .estimators import METHODS, EstimatorConfig, fit_method
from .exceptions import SparseARError
from .gof import gof_report
from .model import ArModel, InnovationSpec, simulate

__all__ = [
    "SweepSpec",
    "SweepResult",
    "draw_sparse_theta",
    "cell_rng",
    "calibrated_d2",
    "run_sweep",
    "error_scaling_check",
    "gof_table",
    "gof_trial",
]

DEFAULT_METHODS = ("ls", "yw", "lasso", "omp", "yw_l21", "yw_l11", "ywomp")


def cell_rng(master_seed, seed_index):
    """Independent generators ``(theta_rng, noise_rng)`` for one seed index."""
    ss = np.random.SeedSequence([int(master_seed), int(seed_index)])
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def draw_sparse_theta(p, s, eta, rng):
    """Uniform support of size ``s``, equal magnitudes ``(1 - eta)/s``, random signs."""
    theta = np.zeros(p)
    support = rng.choice(p, size=s, replace=False)
    signs = rng.choice([-1.0, 1.0], size=s)
    theta[support] = signs * (1.0 - eta) / s
    return theta


def calibrated_d2(p, gamma_ref=0.1, n_ref=1500):
    """``d2`` such that ``d2 * sqrt(log p / n_ref) == gamma_ref``."""
    return gamma_ref / math.sqrt(math.log(p) / n_ref)


@dataclass(frozen=True)
class SweepSpec:
    """Grid of sample sizes, seeds and methods for an MSE sweep.

    ``gamma_policy="fixed"`` uses ``gamma`` at every n; ``"auto"`` uses
    ``d2 * sqrt(log p / n)``.
    """

    p: int = 300
    s: int = 3
    eta: float = 0.5
    n_grid: tuple = (1500,)
    seeds: int = 10
    methods: tuple = DEFAULT_METHODS
    gamma_policy: str = "fixed"
    gamma: float = 0.1
    d2: float = 0.15
    s_star: object = 50
    rho: float = None
    sigma_w2: float = 1.0
    innovation: str = "gaussian"
    master_seed: int = 0

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if not self.n_grid or any(int(n) < 1 for n in self.n_grid):
            raise ValueError("n_grid must be a non-empty list of positive integers")
        if list(self.n_grid) != sorted(self.n_grid):
            raise ValueError("n_grid must be ascending")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.gamma_policy not in ("fixed", "auto"):
            raise ValueError("gamma_policy must be 'fixed' or 'auto'")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def config(self):
        gamma = "auto" if self.gamma_policy == "auto" else self.gamma
        return EstimatorConfig(gamma=gamma, d2_constant=self.d2, s_star=self.s_star,
                               sparsity=self.s, rho_hint=self.rho)


@dataclass
class SweepResult:
    """Raw per-cell records plus median/quartile summaries per ``(method, n)``."""

    spec: SweepSpec
    records: list
    summary: dict = field(default_factory=dict)

    def to_csv(self, fh=None):
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["method", "n", "seed", "mse"])
        for r in self.records:
            w.writerow([r["method"], r["n"], r["seed"], repr(r["mse"])])
        return out.getvalue() if fh is None else None

    def summary_json(self):
        body = {
            "spec": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.spec).items()},
            "cells": [{"method": m, "n": n, **stats} for (m, n), stats in sorted(self.summary.items())],
        }
        return json.dumps(body, indent=2, sort_keys=True)

    def median(self, method, n):
        return self.summary[(method, n)]["median"]


def _summarize(records):
    groups = {}
    for r in records:
        groups.setdefault((r["method"], r["n"]), []).append(r["mse"])
    out = {}
    for key, vals in groups.items():
        v = np.asarray(vals, dtype=float)
        ok = v[np.isfinite(v)]
        if ok.size:
            q1, med, q3 = np.percentile(ok, [25, 50, 75])
        else:
            q1 = med = q3 = float("nan")
        out[key] = {"median": float(med), "q1": float(q1), "q3": float(q3),
                    "n_ok": int(ok.size), "n_failed": int(v.size - ok.size)}
    return out


def _sweep_seed(spec, seed_index):
    rng_theta, rng_noise = cell_rng(spec.master_seed, seed_index)
    theta = draw_sparse_theta(spec.p, spec.s, spec.eta, rng_theta)
    model = ArModel(theta, spec.sigma_w2)
    x = simulate(model, InnovationSpec(spec.innovation, spec.sigma_w2),
                 n_total=max(spec.n_grid) + spec.p, seed=rng_noise).values
    cfg = spec.config()
    denom = float(theta @ theta)
    records = []
    for n in spec.n_grid:
        series = x[: int(n) + spec.p]
        for method in spec.methods:
            rec = {"method": method, "n": int(n), "seed": int(seed_index)}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    fit = fit_method(method, series, spec.p, cfg)
                rec["mse"] = float(np.sum((fit.theta - theta) ** 2) / denom)
                rec["stable"] = fit.stable
            except (SparseARError, np.linalg.LinAlgError) as exc:
                rec["mse"] = float("nan")
                rec["stable"] = None
                rec["error"] = f"{type(exc).__name__}: {exc}"
            records.append(rec)
    return records


def run_sweep(spec, workers=1):
    """Fit every method at every n for each seed and record normalized MSE.

    The series for a seed is simulated once at the largest n; smaller n use
    its prefix.  Failed fits are recorded as NaN and excluded from medians.
    """
    idx = range(spec.seeds)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_sweep_seed, [spec] * spec.seeds, idx))
    else:
        chunks = [_sweep_seed(spec, i) for i in idx]
    records = sorted((r for c in chunks for r in c),
                     key=lambda r: (r["method"], r["n"], r["seed"]))
    return SweepResult(spec, records, _summarize(records))


def error_scaling_check(p, s, n_pairs, seeds, eta=0.5, method="lasso", d2=None,
                        master_seed=0, band=(1.2, 1.7), workers=1):
    """Median l2 error ratios ``err(n) / err(n2)`` for each ``(n, n2)`` pair.

    The penalty follows ``d2 * sqrt(log p / n)``; by default ``d2`` is
    calibrated so that ``gamma = 0.1`` at ``n = 1500``.
    """
    d2 = calibrated_d2(p) if d2 is None else d2
    grid = sorted({int(n) for pair in n_pairs for n in pair})
    spec = SweepSpec(p=p, s=s, eta=eta, n_grid=tuple(grid), seeds=seeds, methods=(method,),
                     gamma_policy="auto", d2=d2, master_seed=master_seed)
    res = run_sweep(spec, workers)
    # normalized squared error -> l2 error; ||theta||_2 is fixed by (s, eta)
    scale = (1.0 - eta) / math.sqrt(s)
    med = {}
    for n in grid:
        errs = [math.sqrt(r["mse"]) * scale for r in res.records if r["n"] == n]
        med[n] = float(np.nanmedian(errs))
    pairs = []
    for a, b in n_pairs:
        ratio = med[int(a)] / med[int(b)]
        pairs.append({"n": int(a), "n2": int(b), "error_n": med[int(a)], "error_n2": med[int(b)],
                      "ratio": ratio, "pass": bool(band[0] <= ratio <= band[1]) or a == b})
    return {"method": method, "d2": d2, "pairs": pairs, "pass": all(pr["pass"] for pr in pairs)}


def gof_table(fit_series, test_series, methods, cfg, p, true_model=None, grid=None):
    """Fit each method on ``fit_series`` and score it on ``test_series``.

    Residual statistics are taken against ``Normal(0, sigma2_fit)`` where
    ``sigma2_fit`` is the residual variance on the fitting data.  Rows that
    fail carry an ``error`` entry instead of statistics.
    """
    rows = []
    targets = [("true", None)] if true_model is not None else []
    targets += [(m, m) for m in methods]
    for name, method in targets:
        row = {"method": name}
        try:
            if method is None:
                model = true_model
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    model = fit_method(method, fit_series, p, cfg).model
            row.update(gof_report(test_series, model, grid=grid).as_row())
        except (SparseARError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def gof_trial(p=300, s=3, eta=0.5, n=1500, methods=("ls", "yw", "lasso", "omp", "ywomp"),
              cfg=None, seed_index=0, master_seed=0, split_mode="even_odd"):
    """One simulated GoF comparison.

    Simulates enough samples that each part of the split holds ``n + p``
    samples, fits on one part and scores on the other.
    """
    rng_theta, rng_noise = cell_rng(master_seed, seed_index)
    theta = draw_sparse_theta(p, s, eta, rng_theta)
    model = ArModel(theta, 1.0)
    x = simulate(model, n_total=2 * (n + p), seed=rng_noise)
    fit_part, test_part = split(x, SplitSpec(split_mode))
    cfg = cfg or EstimatorConfig(gamma=0.1, s_star=50, sparsity=s)
    truth = model if split_mode == "halves" else None
    return gof_table(fit_part, test_part, methods, cfg, p, true_model=truth)
