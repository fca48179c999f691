"""Configuration-driven experiment runner.

Usage: ``lrkrylov run config.json [--out DIR] [--validate-only]
[--seed-override N]``.  The config is one JSON document with a problem
spec and a solver list; each solver writes an iteration CSV, per-outer
spectrum CSVs and its best reconstruction as PGM, and a summary.json
collects the minimum relative errors.  LRK_THREADS caps parallel solver
runs.
"""

import argparse
import concurrent.futures
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import krylov, nnr, problems
from .linops import unvec

SOLVER_NAMES = frozenset({
    "gmres", "lsqr", "rs-lr-gmres", "lr-fgmres", "lr-flsqr",
    "irn-gmres-nnrp", "irn-lsqr-nnrp", "fgmres-nnrp", "flsqr-nnrp",
    "fgmres-nnrp-v", "flsqr-nnrp-v", "svt",
})


class ConfigError(Exception):
    pass


def build_problem(spec, seed_override=None):
    spec = dict(spec)
    kind = spec.pop("type", None)
    if seed_override is not None:
        spec["seed"] = seed_override
    try:
        if kind == "star":
            return problems.star_problem(**spec)
        if kind == "phantom":
            return problems.phantom_problem(**spec)
        if kind == "inpainting":
            return problems.inpainting_problem(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from exc
    raise ConfigError(f"problem.type: unknown problem type {kind!r}")


def _nnr_config(spec, problem):
    epsilon = spec.get("epsilon")
    if epsilon is None and spec.get("use_noise_norm", True):
        epsilon = problem.noise_norm
    kwargs = {k: spec[k] for k in (
        "p", "gamma0", "gamma_decay", "gamma_min", "lambda_rule",
        "lambda_value", "theta", "max_outer", "max_inner", "max_iter",
        "tau_sigma") if k in spec}
    try:
        return nnr.NnrConfig(epsilon=float(epsilon or 0.0), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver config: {exc}") from exc


def run_solver(spec, problem):
    name = spec["name"]
    x_exact = problem.x_exact
    op, b = problem.op, problem.b
    max_iter = int(spec.get("max_iter", 100))
    cfg = _nnr_config(spec, problem)
    stop = cfg.stop() if spec.get("use_discrepancy", False) else None
    lam_rule = cfg.lambda_rule if cfg.lambda_rule != "zero" else None
    if lam_rule == "fixed":
        lam_rule = cfg.lambda_value
    if name == "gmres":
        return krylov.gmres(op, b, max_iter, stop, lam_rule, x_exact)
    if name == "lsqr":
        return krylov.lsqr(op, b, max_iter, stop, lam_rule, x_exact)
    if name == "rs-lr-gmres":
        return krylov.rs_lr_gmres(
            op, b, int(spec.get("restart_len", 40)),
            int(spec.get("truncation_rank", 30)),
            int(spec.get("max_outer", 5)), stop, x_exact)
    if name in ("lr-fgmres", "lr-flsqr"):
        fn = krylov.lr_fgmres if name == "lr-fgmres" else krylov.lr_flsqr
        return fn(op, b, int(spec.get("kappa_B", 30)),
                  int(spec.get("kappa", 30)), max_iter, stop, lam_rule,
                  x_exact)
    if name in ("irn-gmres-nnrp", "irn-lsqr-nnrp"):
        inner = "arnoldi" if name == "irn-gmres-nnrp" else "gkb"
        return nnr.irn_nnrp(op, b, cfg, inner=inner, x_exact=x_exact)
    if name in ("fgmres-nnrp", "flsqr-nnrp", "fgmres-nnrp-v", "flsqr-nnrp-v"):
        inner = "farnoldi" if name.startswith("fgmres") else "fgk"
        variant = "basis-v" if name.endswith("-v") else "iterate"
        return nnr.flexible_nnrp(op, b, cfg, inner=inner, variant=variant,
                                 x_exact=x_exact)
    if name == "svt":
        return nnr.svt(op, b, float(spec.get("tau", 1.0)),
                       float(spec.get("delta", 2.0)), max_iter,
                       stop, x_exact)
    raise ConfigError(f"solver.name: unknown solver {name!r}")


def _write_report(report, name, problem, outdir, emit_images, emit_spectra):
    csv_path = outdir / f"{name}_iterations.csv"
    with open(csv_path, "w") as fh:
        fh.write("iter,outer,rel_error,residual,lambda_hat\n")
        for i in range(len(report.iterations)):
            fh.write(
                f"{report.iterations[i]},{report.outer_indices[i]},"
                f"{report.rel_errors[i]:.17g},{report.residuals[i]:.17g},"
                f"{report.lambdas[i]:.17g}\n")
    if emit_spectra:
        for outer, sigma in report.spectra:
            with open(outdir / f"{name}_spectrum_outer{outer}.csv", "w") as fh:
                fh.write("index,normalized_sigma\n")
                for i, s in enumerate(sigma):
                    fh.write(f"{i + 1},{s:.17g}\n")
    if emit_images and report.best_x is not None:
        problems.write_pgm(outdir / f"{name}_best.pgm",
                           unvec(report.best_x, problem.op.image_side))


def _cross_check_residuals(report, problem, tol=1e-8):
    """Recompute the true residual of the final iterate and compare to the
    recorded projected value."""
    if report.final_x is None or not report.residuals:
        return
    true = np.linalg.norm(problem.b - problem.op.matvec(report.final_x))
    scale = max(np.linalg.norm(problem.b), 1.0)
    if abs(true - report.residuals[-1]) > tol * scale:
        raise RuntimeError(
            f"{report.solver}: projected residual {report.residuals[-1]:.3e} "
            f"disagrees with true residual {true:.3e}")


def validate_config(config):
    if "problem" not in config:
        raise ConfigError("problem: missing section")
    solvers = config.get("solvers")
    if not solvers:
        raise ConfigError("solvers: the solver list is empty")
    for spec in solvers:
        name = spec.get("name")
        if name not in SOLVER_NAMES:
            raise ConfigError(f"solver.name: unknown solver {name!r}")
    names = [s["name"] for s in solvers]
    if len(set(names)) != len(names):
        raise ConfigError("solvers: duplicate solver names")


def run(config_path, out_dir=None, validate_only=False, seed_override=None):
    """Execute a config; returns the process exit code."""
    try:
        config = json.loads(Path(config_path).read_text())
        validate_config(config)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if validate_only:
        print(json.dumps(config, indent=2))
        return 0
    outdir = Path(out_dir or config.get("output_dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    emit_images = bool(config.get("emit_images", True))
    emit_spectra = bool(config.get("emit_spectra", True))
    cross_check = bool(config.get("cross_check_residuals", False))
    try:
        problem = build_problem(config["problem"], seed_override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    def job(spec):
        report = run_solver(spec, problem)
        if cross_check:
            _cross_check_residuals(report, problem)
        _write_report(report, spec["name"], problem, outdir, emit_images,
                      emit_spectra)
        return spec["name"], report

    max_workers = max(int(os.environ.get("LRK_THREADS", "1")), 1)
    summary = {}
    failed = False
    specs = config["solvers"]
    try:
        if max_workers == 1:
            results = [job(s) for s in specs]
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers) as pool:
                results = list(pool.map(job, specs))
    except Exception:
        traceback.print_exc()
        failed = True
        results = []
    for name, report in results:
        best_iter, best_err = report.best
        summary[name] = {
            "min_rel_error": None if np.isnan(best_err) else best_err,
            "best_iteration": int(best_iter),
            "stop_reason": report.stop_reason,
            "iterations_run": len(report.iterations),
        }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return 2 if failed else 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="lrkrylov")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("config", help="path to the JSON config")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--validate-only", action="store_true",
                      help="parse and echo the config without computing")
    runp.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.validate_only,
                   args.seed_override)
    return 1


if __name__ == "__main__":
    sys.exit(main())
