"""Command-line interface.

Subcommands cover the full workflow: ``fit``, ``predict``, ``ci``, ``scb``,
``quantile-ci``, ``monotonize``, ``simulate``, and ``bench``.  Numerical
outputs are written atomically (temp file + rename) and identical command
lines, including seeds, reproduce byte-identical artifacts; wall-clock
timings only ever go to stderr.  ``--plot`` renders a matplotlib figure
next to each delimited output.

Exit codes: 0 on success, 1 on usage errors, 2 on numerical failures (the
failing error class is named on stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .estimator import FitContext, FitResult, fit, fit_family, predict
from .exceptions import FlqrError
from .grids import GridFunction, load_sample
from .inference import (
    ci_profile,
    quantile_ci,
    save_band_csv,
    save_quantile_ci_json,
    scb,
    shrinkage_bias_proxy,
)
from .monotonize import QuantilePath, monotonize_table, save_table
from .optimizer import GdConfig
from .simulate import (
    DEFAULT_INFERENCE_LAMBDA,
    SimDesign,
    generate,
    run_coverage_experiment,
    run_mise_experiment,
)
from .spectrum import solve_eigensystem
from .tuning import TuningConfig, rot_bandwidth


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _atomic_write_text(path, text):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic(fn, path, *args, **kwargs):
    """Run a writer against a temp file, then rename over the target."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        fn(tmp, *args, **kwargs)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _png_path(out):
    base, _ = os.path.splitext(out)
    return base + ".png"


def _read_curves_csv(curves_path, rescale_grid):
    """Parse a curves CSV into (Grid, curve matrix) without responses."""
    from .grids import Grid, _parse_row
    import csv as _csv

    rows = []
    with open(curves_path, newline="") as fh:
        for lineno, row in enumerate(_csv.reader(fh), start=1):
            if not row or all(not tok.strip() for tok in row):
                continue
            rows.append(_parse_row(row, lineno))
    gridvals = rows[0]
    if rescale_grid:
        gridvals = (gridvals - gridvals[0]) / (gridvals[-1] - gridvals[0])
    return Grid(gridvals), np.vstack(rows[1:])


def _load_curves_only(curves_path, rescale_grid):
    """Load a curves CSV as a sample with placeholder responses."""
    from .grids import FunctionalSample

    grid, curves = _read_curves_csv(curves_path, rescale_grid)
    return FunctionalSample(grid, curves, np.zeros(curves.shape[0]))


def _load_single_curve(path, rescale_grid):
    grid, curves = _read_curves_csv(path, rescale_grid)
    return GridFunction(grid, curves[0])


def _add_io_flags(p, fit_input=False, needs_curves=False, needs_y=False):
    if fit_input:
        p.add_argument("--fit", required=True, help="fitted-model JSON from `fit`")
    if needs_curves:
        p.add_argument("--curves", required=True, help="curves CSV (grid row + one curve per row)")
    if needs_y:
        p.add_argument("--y", required=True, help="responses CSV (one value per line)")
    p.add_argument("--rescale-grid", action="store_true",
                   help="map the curves grid affinely onto [0, 1]")
    p.add_argument("--out", required=True, help="output artifact path")
    p.add_argument("--plot", action="store_true",
                   help="also render a PNG figure next to the output")


def _tuning_from(args):
    kwargs = {}
    if getattr(args, "lambda_grid", None):
        kwargs["lambda_grid"] = np.asarray([float(x) for x in args.lambda_grid.split(",")])
    if getattr(args, "folds", None):
        kwargs["folds"] = args.folds
    kwargs["seed"] = args.seed
    return TuningConfig(**kwargs)


def build_parser():
    parser = _Parser(prog="flqr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"flqr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the penalized smoothed quantile model")
    _add_io_flags(p, needs_curves=True, needs_y=True)
    p.add_argument("--tau", type=float, required=True, help="quantile level in (0, 1)")
    p.add_argument("--h", type=float, default=None, help="smoothing bandwidth (default: rule of thumb)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="roughness penalty (default: cross-validated)")
    p.add_argument("--seed", type=int, required=True, help="seed for the CV fold partition")
    p.add_argument("--folds", type=int, default=5, help="CV folds (default 5)")
    p.add_argument("--lambda-grid", default=None,
                   help="comma-separated CV penalty grid (default: 13 points 1e-9..1e-3)")
    p.add_argument("--tol", type=float, default=1e-6, help="gradient-norm tolerance (default 1e-6)")
    p.add_argument("--max-iter", type=int, default=10000, help="iteration cap (default 10000)")
    p.add_argument("--beta-csv", default=None, help="also export the slope as a two-column CSV")

    p = sub.add_parser("predict", help="predict conditional quantiles for new curves")
    _add_io_flags(p, fit_input=True, needs_curves=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("ci", help="pointwise confidence intervals for the slope")
    _add_io_flags(p, fit_input=True, needs_curves=True)
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    p.add_argument("--n-eig", type=int, default=None, help="eigenpairs in the variance sum (default 30)")

    p = sub.add_parser("scb", help="simultaneous confidence band for the slope")
    _add_io_flags(p, fit_input=True, needs_curves=True)
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    p.add_argument("--paths", type=int, default=10000, help="simulated sup-norm paths (default 10000)")
    p.add_argument("--seed", type=int, required=True, help="seed for the path simulation")
    p.add_argument("--n-eig", type=int, default=None, help="eigenpairs in the band process (default 30)")

    p = sub.add_parser("quantile-ci", help="confidence interval for a conditional quantile")
    _add_io_flags(p, fit_input=True, needs_curves=True)
    p.add_argument("--x0", required=True, help="curves CSV holding the target curve (grid row + one row)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    p.add_argument("--n-eig", type=int, default=None, help="eigenpairs in the variance sum (default 30)")

    p = sub.add_parser("monotonize", help="monotonize conditional quantiles across tau")
    p.add_argument("--path", default=None,
                   help="CSV of (tau, value) rows to monotonize directly")
    p.add_argument("--curves", default=None, help="curves CSV (fit-family mode)")
    p.add_argument("--y", default=None, help="responses CSV (fit-family mode)")
    p.add_argument("--x0", default=None, help="curve CSV at which quantiles are predicted")
    p.add_argument("--rescale-grid", action="store_true",
                   help="map the curves grid affinely onto [0, 1]")
    p.add_argument("--tau-min", type=float, default=0.1, help="lowest tau (default 0.1)")
    p.add_argument("--tau-max", type=float, default=0.9, help="highest tau (default 0.9)")
    p.add_argument("--tau-count", type=int, default=21, help="tau grid size (default 21)")
    p.add_argument("--weight", type=float, default=0.5,
                   help="rearranged-vs-isotonic combination weight (default 0.5)")
    p.add_argument("--shared-lambda", action="store_true",
                   help="cross-validate once at the middle tau and reuse the penalty")
    p.add_argument("--seed", type=int, default=None, help="seed (required in fit-family mode)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot", action="store_true", help="also render a PNG figure")

    p = sub.add_parser("simulate", help="Monte Carlo experiments on the synthetic designs")
    p.add_argument("--mode", choices=("mise", "coverage"), default="mise")
    p.add_argument("--design", choices=("normal", "t3"), default="normal", help="error family")
    p.add_argument("--snr", type=float, default=10.0, help="signal-to-noise ratio (default 10)")
    p.add_argument("--n", type=int, default=200, help="curves per replicate (default 200)")
    p.add_argument("--reps", type=int, default=100, help="Monte Carlo replicates (default 100)")
    p.add_argument("--taus", default="0.25,0.5,0.75", help="comma-separated quantile levels")
    p.add_argument("--seed", type=int, required=True, help="master seed")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker processes (default: machine parallelism)")
    p.add_argument("--shared-lambda", action="store_true",
                   help="(mise) cross-validate once per replicate at the middle tau")
    p.add_argument("--t-points", default="0.1,0.5,0.9",
                   help="(coverage) comma-separated slope evaluation points")
    p.add_argument("--inference-lambda", type=float, default=None,
                   help=f"(coverage) fixed inference penalty (default {DEFAULT_INFERENCE_LAMBDA:g})")
    p.add_argument("--scb", action="store_true", help="(coverage) also track band coverage")
    p.add_argument("--paths", type=int, default=2000, help="(coverage) band simulation paths")
    p.add_argument("--x0", action="store_true",
                   help="(coverage) track conditional-quantile coverage at a held-out curve")
    p.add_argument("--out", required=True, help="long-format CSV path (summary JSON written alongside)")
    p.add_argument("--plot", action="store_true", help="also render a PNG figure")

    p = sub.add_parser("bench", help="time the fitting pipeline on a synthetic sample")
    p.add_argument("--n", type=int, default=200, help="curves (default 200)")
    p.add_argument("--reps", type=int, default=3, help="repetitions (default 3)")
    p.add_argument("--seed", type=int, required=True, help="design seed")
    p.add_argument("--out", required=True, help="CSV of deterministic fit statistics")

    return parser


def _apply_config_file(parser, argv):
    """Honor --config FILE: file values become defaults, flags override."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        parser.error("--config needs a file path")
    cfg_path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    try:
        with open(cfg_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {cfg_path}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    # Config keys use flag spelling without leading dashes.
    flags = []
    for key, value in cfg.items():
        flag = "--" + str(key).replace("_", "-")
        if isinstance(value, bool):
            if value:
                flags.append(flag)
        else:
            flags.extend([flag, str(value)])
    # File-provided flags go first so explicit argv wins on conflicts for
    # store-type options; argparse keeps the last occurrence.
    if rest and not rest[0].startswith("-"):
        return [rest[0]] + flags + rest[1:]
    return flags + rest


def _cmd_fit(args):
    sample = load_sample(args.curves, args.y, rescale_grid=args.rescale_grid)
    config = GdConfig(tol=args.tol, max_iter=args.max_iter)
    result = fit(
        sample,
        args.tau,
        h=args.h,
        lam=args.lam,
        config=config,
        tuning=_tuning_from(args),
    )
    _atomic(lambda tmp: result.save_json(tmp), args.out)
    if args.beta_csv:
        def write_beta(tmp):
            with open(tmp, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "beta"])
                for t, b in zip(result.grid.points, result.beta_hat.values):
                    w.writerow([repr(float(t)), repr(float(b))])
        _atomic(write_beta, args.beta_csv)
    if args.plot:
        from . import plots
        plots.plot_beta(_png_path(args.out), result.grid.points, result.beta_hat.values,
                        title=f"tau = {result.tau:g} fit")
        if result.cv_table is not None:
            entries = [e for e in result.cv_table.entries if not e.failed]
            plots.plot_cv_curve(
                _png_path(args.out).replace(".png", "-cv.png"),
                [e.lam for e in entries],
                [e.mean_risk for e in entries],
                [e.se_risk for e in entries],
                result.lam,
            )
    sys.stderr.write(
        f"fit: tau={result.tau:g} h={result.h:.6g} lambda={result.lam:.6g} "
        f"iters={result.trace.iterations} converged={result.trace.converged}\n"
    )
    return 0


def _cmd_predict(args):
    fit_result = FitResult.load_json(args.fit)
    sample = _load_curves_only(args.curves, args.rescale_grid)
    if not fit_result.grid.matches(sample.grid):
        raise FlqrError("curves grid does not match the fitted grid")
    preds = [predict(fit_result, sample.curve(i)) for i in range(sample.n)]
    if args.format == "json":
        _atomic_write_text(
            args.out,
            json.dumps({"tau": fit_result.tau, "predictions": preds}, indent=1, sort_keys=True) + "\n",
        )
    else:
        def write(tmp):
            with open(tmp, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["index", "prediction"])
                for i, p in enumerate(preds):
                    w.writerow([i, repr(float(p))])
        _atomic(write, args.out)
    return 0


def _eigensystem_for(args, fit_result, sample):
    return solve_eigensystem(sample, fit_result.b_hat, n_eig=args.n_eig)


def _cmd_ci(args):
    fit_result = FitResult.load_json(args.fit)
    sample = _load_curves_only(args.curves, args.rescale_grid)
    if not fit_result.grid.matches(sample.grid):
        raise FlqrError("curves grid does not match the fitted grid")
    es = _eigensystem_for(args, fit_result, sample)
    centers, half = ci_profile(fit_result, es, args.level)
    _atomic(save_band_csv, args.out, fit_result.grid.points, centers,
            centers - half, centers + half)
    proxy = shrinkage_bias_proxy(fit_result, es)
    sys.stderr.write(f"ci: level={args.level:g} shrinkage_bias_proxy={proxy:.6g}\n")
    if args.plot:
        from . import plots
        plots.plot_band(_png_path(args.out), fit_result.grid.points, centers,
                        centers - half, centers + half,
                        title=f"tau = {fit_result.tau:g} pointwise intervals",
                        band_label=f"{args.level:.0%} pointwise")
    return 0


def _cmd_scb(args):
    fit_result = FitResult.load_json(args.fit)
    sample = _load_curves_only(args.curves, args.rescale_grid)
    if not fit_result.grid.matches(sample.grid):
        raise FlqrError("curves grid does not match the fitted grid")
    es = _eigensystem_for(args, fit_result, sample)
    band = scb(fit_result, es, level=args.level, n_paths=args.paths, seed=args.seed)
    _atomic(save_band_csv, args.out, fit_result.grid.points, band.center.values,
            band.lower.values, band.upper.values)
    sys.stderr.write(f"scb: level={args.level:g} q={band.q_alpha:.6g} paths={band.n_paths}\n")
    if args.plot:
        from . import plots
        plots.plot_band(_png_path(args.out), fit_result.grid.points, band.center.values,
                        band.lower.values, band.upper.values,
                        title=f"tau = {fit_result.tau:g} simultaneous band",
                        band_label=f"{args.level:.0%} simultaneous")
    return 0


def _cmd_quantile_ci(args):
    fit_result = FitResult.load_json(args.fit)
    sample = _load_curves_only(args.curves, args.rescale_grid)
    if not fit_result.grid.matches(sample.grid):
        raise FlqrError("curves grid does not match the fitted grid")
    x0 = _load_single_curve(args.x0, args.rescale_grid)
    es = _eigensystem_for(args, fit_result, sample)
    ci = quantile_ci(fit_result, es, x0, level=args.level)
    _atomic(save_quantile_ci_json, args.out, ci)
    return 0


def _read_path_csv(path):
    taus, values = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                t = float(row[0])
            except ValueError:
                continue  # header
            taus.append(t)
            values.append(float(row[1]))
    return QuantilePath(np.asarray(taus), np.asarray(values))


def _cmd_monotonize(args):
    if args.path:
        qpath = _read_path_csv(args.path)
    else:
        if not (args.curves and args.y and args.x0):
            raise SystemExit(_usage_error("monotonize needs --path or --curves/--y/--x0"))
        if args.seed is None:
            raise SystemExit(_usage_error("fit-family mode needs --seed"))
        sample = load_sample(args.curves, args.y, rescale_grid=args.rescale_grid)
        x0 = _load_single_curve(args.x0, args.rescale_grid)
        taus = np.linspace(args.tau_min, args.tau_max, args.tau_count)
        family = fit_family(
            sample, taus, shared_lambda=args.shared_lambda,
            tuning=TuningConfig(seed=args.seed),
        )
        qpath = QuantilePath(family.taus, family.predict_path(x0))
    table = monotonize_table(qpath, weight=args.weight)
    _atomic(save_table, args.out, table)
    if args.plot:
        from . import plots
        plots.plot_quantile_paths(_png_path(args.out), table)
    return 0


def _usage_error(msg):
    sys.stderr.write(f"error: {msg}\n")
    return 1


def _cmd_simulate(args):
    taus = tuple(float(t) for t in args.taus.split(","))
    design = SimDesign(
        n=args.n, snr=args.snr, error_family=args.design, seed=args.seed
    )
    if args.mode == "mise":
        report = run_mise_experiment(
            design,
            taus=taus,
            n_replicates=args.reps,
            shared_lambda=args.shared_lambda,
            threads=args.threads,
        )
    else:
        t_points = tuple(float(t) for t in args.t_points.split(","))
        report = run_coverage_experiment(
            design,
            taus=taus,
            t_points=t_points,
            n_replicates=args.reps,
            inference_lambda=args.inference_lambda,
            with_scb=args.scb,
            scb_paths=args.paths,
            with_x0=args.x0,
            threads=args.threads,
        )
    _atomic(lambda tmp: report.to_csv(tmp), args.out)
    base, _ = os.path.splitext(args.out)
    _atomic(lambda tmp: report.save_summary_json(tmp), base + ".summary.json")
    sys.stderr.write(
        f"simulate: mode={args.mode} reps={args.reps} failures={report.n_failures} "
        f"runtime={report.runtime_seconds:.1f}s\n"
    )
    if args.plot:
        from . import plots
        if args.mode == "mise":
            plots.plot_mise_report(_png_path(args.out), report)
        else:
            plots.plot_coverage_report(_png_path(args.out), report)
    return 0


def _cmd_bench(args):
    design = SimDesign(n=args.n, seed=args.seed)
    rows = []
    for rep in range(args.reps):
        sample = generate(design, rep)
        t0 = time.perf_counter()
        context = FitContext.build(sample)
        t1 = time.perf_counter()
        h = rot_bandwidth(sample, 0.5, kern=context.kern, gram=context.gram)
        t2 = time.perf_counter()
        result = fit(sample, 0.5, h=h, lam=1e-3, context=context)
        t3 = time.perf_counter()
        rows.append((rep, result.trace.iterations, result.trace.final_grad_norm,
                     float(result.trace.objective_path[-1])))
        sys.stderr.write(
            f"bench rep {rep}: gram={t1 - t0:.3f}s rot={t2 - t1:.3f}s fit={t3 - t2:.3f}s\n"
        )
    def write(tmp):
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "iterations", "final_grad_norm", "objective"])
            for r in rows:
                w.writerow([r[0], r[1], repr(r[2]), repr(r[3])])
    _atomic(write, args.out)
    return 0


_HANDLERS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "ci": _cmd_ci,
    "scb": _cmd_scb,
    "quantile-ci": _cmd_quantile_ci,
    "monotonize": _cmd_monotonize,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv = _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except FlqrError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
