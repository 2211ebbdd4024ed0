"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Diagnostics go to stderr; data goes to the ``-o`` file or stdout.  Every
file output gets a ``<output>.manifest.json`` with the argv, the resolved
configuration and the tool version.
"""

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bench import SweepSpec, cell_rng, draw_sparse_theta, run_sweep
from .dataio import PipelineSpec, SplitSpec, apply_pipeline, parse_steps, preset, read_csv, select_rows, split, write_csv
from .design import build_design, re_check_exhaustive
from .estimators import METHODS, STABILITY_POLICIES, EstimatorConfig, fit_method
from .exceptions import DataError, NumericalError
from .gof import gof_report
from .model import INNOVATION_KINDS, ArModel, InnovationSpec, simulate
from .solvers import KktReport, SolverOptions

__all__ = ["main", "build_parser", "rerun_manifest"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _gamma(text):
    if text == "auto":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("gamma must be >= 0")
    return v


def _s_star(text):
    if text == "auto":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("s_star must be >= 0")
    return v


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _method_list(text):
    methods = [t.strip() for t in text.split(",") if t.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    return methods


def _add_input_options(sp):
    sp.add_argument("--column", default="0", help="column name or 0-based index (default 0)")
    sp.add_argument("--no-header", dest="has_header", action="store_false",
                    help="input CSV has no header row")
    sp.add_argument("--delimiter", default=",")
    sp.add_argument("--preset", choices=("oil", "traffic"), help="named preprocessing recipe")
    sp.add_argument("--block-width", type=_pos_int, default=15,
                    help="block_average width for the traffic preset")
    sp.add_argument("--steps", help="preprocessing steps, e.g. 'difference:1,log,center'")
    sp.add_argument("--rows", help="row range a:b applied after reading, before preprocessing")


def _add_estimator_options(sp):
    sp.add_argument("--gamma", type=_gamma, default=0.1, help="penalty, or 'auto' for d2*sqrt(log p/n)")
    sp.add_argument("--d2", type=float, default=0.15, help="constant for --gamma auto")
    sp.add_argument("--s-star", type=_s_star, default="auto", help="greedy iteration budget or 'auto'")
    sp.add_argument("--sparsity", type=_pos_int, help="sparsity s used by --s-star auto")
    sp.add_argument("--rho", type=float, help="spectral spread used by --s-star auto")
    sp.add_argument("--stability-policy", choices=STABILITY_POLICIES, default="warn")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=_pos_int, default=100_000)


def _add_output_options(sp, formats=("csv", "json"), default="csv"):
    sp.add_argument("-o", "--output", help="output file (default: stdout)")
    sp.add_argument("--format", choices=formats, default=default)


def build_parser():
    parser = _Parser(prog="sparsear", description="Sparse AR estimation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("simulate", help="simulate a sparse AR process")
    sp.add_argument("--p", type=_pos_int, required=True, help="model order")
    sp.add_argument("--s", type=_pos_int, default=3, help="number of nonzero coefficients")
    sp.add_argument("--eta", type=float, default=0.5, help="stability margin, ||theta||_1 = 1 - eta")
    sp.add_argument("--n", type=_pos_int, required=True, help="samples beyond the first p")
    sp.add_argument("--sigma-w2", type=float, default=1.0)
    sp.add_argument("--innovation", choices=INNOVATION_KINDS, default="gaussian")
    sp.add_argument("--model", help="simulate this model JSON instead of drawing theta")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--model-out", help="where to write the model JSON (default: <output>.model.json)")
    _add_output_options(sp, ("csv",))

    sp = sub.add_parser("fit", help="fit an AR model to a CSV series")
    sp.add_argument("input", help="input CSV")
    sp.add_argument("--method", choices=METHODS, default="lasso")
    sp.add_argument("--p", type=_pos_int, required=True, help="model order")
    _add_input_options(sp)
    _add_estimator_options(sp)
    _add_output_options(sp, default="json")

    sp = sub.add_parser("gof", help="goodness-of-fit statistics on a test series")
    sp.add_argument("--fit", dest="fit_path", help="CSV used to fit --methods")
    sp.add_argument("--test", dest="test_path", required=True, help="CSV to score on")
    sp.add_argument("--model", action="append", default=[], help="model JSON to score (repeatable)")
    sp.add_argument("--methods", type=_method_list, default=[], help="comma-separated methods to fit")
    sp.add_argument("--p", type=_pos_int, help="order for --methods")
    sp.add_argument("--grid", type=_pos_int, help="frequency grid size for the spectral statistic")
    _add_input_options(sp)
    _add_estimator_options(sp)
    _add_output_options(sp)

    sp = sub.add_parser("preprocess", help="apply a preprocessing pipeline and optional split")
    sp.add_argument("input")
    _add_input_options(sp)
    sp.add_argument("--split", choices=("halves", "even_odd"),
                    help="also write <output>.fit.csv and <output>.test.csv")
    sp.add_argument("--fit-fraction", type=float, default=0.5)
    sp.add_argument("--index", action="store_true", help="write an index column")
    _add_output_options(sp, ("csv",))

    sp = sub.add_parser("sweep", help="MSE-vs-n simulation sweep")
    sp.add_argument("--p", type=_pos_int, default=300)
    sp.add_argument("--s", type=_pos_int, default=3)
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--n-grid", type=_int_list, default=[1500])
    sp.add_argument("--seeds", type=_pos_int, default=10)
    sp.add_argument("--methods", type=_method_list, default=["ls", "yw", "lasso", "omp", "yw_l21", "yw_l11", "ywomp"])
    sp.add_argument("--gamma-policy", choices=("fixed", "auto"), default="fixed")
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--d2", type=float, default=0.15)
    sp.add_argument("--s-star", type=_s_star, default=10)
    sp.add_argument("--sigma-w2", type=float, default=1.0)
    sp.add_argument("--innovation", choices=INNOVATION_KINDS, default="gaussian")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--workers", type=_pos_int, default=1)
    sp.add_argument("--summary", help="also write the JSON summary here")
    _add_output_options(sp)

    sp = sub.add_parser("re-check", help="exhaustive restricted-eigenvalue check of an AR design")
    sp.add_argument("input")
    sp.add_argument("--p", type=_pos_int, required=True)
    sp.add_argument("--s", type=_pos_int, required=True)
    _add_input_options(sp)
    _add_output_options(sp, default="json")
    return parser


# helpers -------------------------------------------------------------------


def _info(msg):
    print(msg, file=sys.stderr)


def _pipeline(args):
    if args.preset and args.steps:
        raise UsageError("--preset and --steps are mutually exclusive")
    if args.preset:
        return preset(args.preset, args.block_width)
    if args.steps:
        try:
            return parse_steps(args.steps)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return PipelineSpec()


def _load_series(path, args):
    x = read_csv(path, column=args.column, has_header=args.has_header, delimiter=args.delimiter)
    if args.rows:
        try:
            x = select_rows(x, args.rows)
        except ValueError:
            raise UsageError(f"--rows expects a:b, got {args.rows!r}") from None
    return apply_pipeline(x, _pipeline(args))


def _config(args, sparsity=None):
    try:
        return EstimatorConfig(
            gamma=args.gamma, s_star=args.s_star, d2_constant=args.d2, rho_hint=args.rho,
            sparsity=args.sparsity if sparsity is None else sparsity,
            stability_policy=args.stability_policy,
            solver=SolverOptions(max_iter=args.max_iter, tol=args.tol),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return ArModel.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"invalid model JSON {path}: {exc}") from exc


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _rows_csv(rows, fields):
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else repr(r[k]) if isinstance(r.get(k), float) else r[k])
                    for k in fields})
    return out.getvalue()


class _Outputs:
    """Collects written files so the manifest can list them."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.paths = []

    def write(self, path, text):
        if path is None:
            sys.stdout.write(text)
            return
        Path(path).write_text(text, encoding="utf-8")
        self.paths.append(str(path))

    def series(self, path, series, index=False):
        if path is None:
            write_csv(sys.stdout, series, index=index)
            return
        write_csv(path, series, index=index)
        self.paths.append(str(path))

    def manifest(self):
        """Write ``<path>.manifest.json`` beside every file output."""
        config = {k: v for k, v in sorted(vars(self.args).items()) if k != "handler"}
        body = {"tool": "sparsear", "version": __version__, "argv": self.argv,
                "config": config, "outputs": self.paths}
        text = _dump_json(body)
        for p in self.paths:
            Path(p + ".manifest.json").write_text(text, encoding="utf-8")


# subcommands ---------------------------------------------------------------


def _cmd_simulate(args, out):
    rng_theta, rng_noise = cell_rng(args.seed, 0)
    if args.model:
        model = _load_model(args.model)
        if model.order != args.p:
            raise UsageError(f"--p {args.p} does not match model order {model.order}")
    else:
        if not 0 < args.eta < 1:
            raise UsageError("--eta must lie in (0, 1)")
        if args.s > args.p:
            raise UsageError("--s must not exceed --p")
        model = ArModel(draw_sparse_theta(args.p, args.s, args.eta, rng_theta), args.sigma_w2)
    x = simulate(model, InnovationSpec(args.innovation, model.sigma_w2),
                 n_total=args.n + args.p, seed=rng_noise)
    out.series(args.output, x)
    model_out = args.model_out or (args.output + ".model.json" if args.output else None)
    if model_out:
        out.write(model_out, _dump_json(model.to_dict()))
    else:
        _info("model: " + json.dumps(model.to_dict()))


def _report_fit(res):
    diag = res.solver_diagnostics
    _info(f"method: {res.method}")
    _info(f"stable: {'yes' if res.stable else 'NO'}")
    if isinstance(diag, KktReport):
        _info(f"kkt_max_violation: {diag.max_violation:.3e}")
    else:
        _info("kkt_max_violation: n/a")
    _info(f"nonzeros: {int(np.count_nonzero(res.theta))}/{res.model.order}")


def _cmd_fit(args, out):
    x = _load_series(args.input, args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit_method(args.method, x, args.p, _config(args))
    _report_fit(res)
    if args.format == "json":
        out.write(args.output, _dump_json(res.model.to_dict()))
    else:
        rows = [{"lag": k + 1, "theta": float(t)} for k, t in enumerate(res.theta)]
        out.write(args.output, _rows_csv(rows, ["lag", "theta"]))


def _cmd_gof(args, out):
    if not args.model and not args.methods:
        raise UsageError("give --model and/or --methods")
    if args.methods and (args.fit_path is None or args.p is None):
        raise UsageError("--methods needs --fit and --p")
    test = _load_series(args.test_path, args)
    rows = []
    for path in args.model:
        row = {"method": Path(path).stem}
        row.update(gof_report(test, _load_model(path), grid=args.grid).as_row())
        rows.append(row)
    if args.methods:
        fit_x = _load_series(args.fit_path, args)
        cfg = _config(args)
        for m in args.methods:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = fit_method(m, fit_x, args.p, cfg).model
            rows.append({"method": m, **gof_report(test, model, grid=args.grid).as_row()})
    if args.format == "json":
        out.write(args.output, _dump_json(rows))
    else:
        out.write(args.output, _rows_csv(rows, ["method", "cvm", "ad", "ks", "scvm"]))


def _cmd_preprocess(args, out):
    x = _load_series(args.input, args)
    if args.split:
        if not args.output:
            raise UsageError("--split requires -o")
        try:
            spec = SplitSpec(args.split, args.fit_fraction)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        fit_part, test_part = split(x, spec)
        out.series(args.output, x, args.index)
        out.series(args.output + ".fit.csv", fit_part, args.index)
        out.series(args.output + ".test.csv", test_part, args.index)
    else:
        out.series(args.output, x, args.index)
    _info(f"samples: {len(x)}")


def _cmd_sweep(args, out):
    try:
        spec = SweepSpec(p=args.p, s=args.s, eta=args.eta, n_grid=tuple(args.n_grid), seeds=args.seeds,
                         methods=tuple(args.methods), gamma_policy=args.gamma_policy, gamma=args.gamma,
                         d2=args.d2, s_star=args.s_star, sigma_w2=args.sigma_w2,
                         innovation=args.innovation, master_seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = run_sweep(spec, workers=args.workers)
    failed = sum(v["n_failed"] for v in res.summary.values())
    _info(f"cells: {len(res.records)}  failed: {failed}")
    if args.format == "json":
        out.write(args.output, res.summary_json() + "\n")
    else:
        out.write(args.output, res.to_csv())
    if args.summary:
        out.write(args.summary, res.summary_json() + "\n")


def _cmd_re_check(args, out):
    x = _load_series(args.input, args)
    try:
        rep = re_check_exhaustive(build_design(x, args.p), args.s)
    except ValueError as exc:
        if isinstance(exc, DataError):
            raise
        raise UsageError(str(exc)) from None
    row = {"s": rep.s, "lambda_min_s": rep.lambda_min_s, "lambda_max_s": rep.lambda_max_s,
           "satisfied": rep.satisfied, "subsets_checked": rep.subsets_checked}
    if args.format == "json":
        out.write(args.output, _dump_json(row))
    else:
        out.write(args.output, _rows_csv([row], list(row)))


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "gof": _cmd_gof,
    "preprocess": _cmd_preprocess,
    "sweep": _cmd_sweep,
    "re-check": _cmd_re_check,
}


def main(argv=None):
    """Run the CLI and return the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    out = _Outputs(args, argv)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        _info(f"sparsear {args.command}: error: {exc}")
        return EXIT_USAGE
    except DataError as exc:
        _info(f"sparsear {args.command}: data error: {exc}")
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _info(f"sparsear {args.command}: numerical error: {exc}")
        return EXIT_NUMERICAL
    except OSError as exc:
        _info(f"sparsear {args.command}: data error: {exc}")
        return EXIT_DATA
    except ValueError as exc:
        _info(f"sparsear {args.command}: error: {exc}")
        return EXIT_USAGE
    out.manifest()
    return EXIT_OK


def rerun_manifest(path):
    """Re-run the command recorded in a manifest; returns the exit code."""
    with open(path, encoding="utf-8") as fh:
        return main(json.load(fh)["argv"])


if __name__ == "__main__":
    sys.exit(main())
