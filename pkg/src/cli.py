"""Batch driver: `pib run <config.json>` and `pib verify`.

Data goes to CSV files or standard output; diagnostics go to the "pib"
logger on standard error. Exit codes: 0 success, 1 configuration error,
2 numerical failure or failed verification.
"""
import argparse
import dataclasses
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from src.config import ConfigError, RunConfig, configure_logging
from src.inference.augmentation import AugmentationSpec, augmentation_gap_analytic, augmentation_gap_mc
from src.inference.base import LARGE_BETA_PROBE, SMALL_BETA_PROBE, limit_diagnostics
from src.inference.families import gaussian_power
from src.inference.gibbs import (
    TRACE_FIELDS,
    GaussianVariationalParams,
    GibbsObjectiveSpec,
    gibbs_objective,
    gibbs_optimize,
    stable_step_size,
)
from src.pib.errors import PIBError
from src.pib.infotheory import to_bits
from src.pib.solver import CURVE_FIELDS, CurveRecord, SolverConfig, information_curve
from src.pib.world import joint_model
from src.verify import CHECK_FIELDS, DEFAULT_SEED, run_verification

logger = logging.getLogger("pib.cli")

__all__ = ["CurveRecord", "emit_csv", "main", "run"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

AUGMENTATION_FIELDS = ["noise_std", "analytic_gap", "mc_estimate", "mc_standard_error", "within_4se"]
GIBBS_PARAM_FIELDS = [
    "mean", "log_std", "variance", "objective", "iterations", "converged",
    "power_mean", "power_variance", "neg_log_partition",
]
LIMIT_CHECK_FIELDS = ["check", "passed", "value"]
BITS_FIELDS = ["beta", "mi_theta_past_bits", "mi_theta_future_bits", "cmi_theta_past_given_future_bits"]


def _as_row(record: Any) -> Dict[str, Any]:
    if dataclasses.is_dataclass(record):
        return dataclasses.asdict(record)
    return dict(record)


def emit_csv(records: Sequence[Any], fields: Optional[Sequence[str]] = None) -> str:
    """Renders homogeneous records (dataclasses or dicts) as CSV text.

    Floats use 12 significant digits and lines end with a bare LF. Without
    explicit `fields` the CurveRecord columns are used.
    """
    columns = list(fields) if fields is not None else list(CURVE_FIELDS)
    frame = pd.DataFrame([_as_row(r) for r in records], columns=columns)
    return frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")


def write_output(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info("Wrote %s", path)


def sidecar_path(path: Optional[str], suffix: str) -> Optional[str]:
    """`<stem>_<suffix>.csv` next to `path`; None when writing to standard output."""
    if path is None:
        return None
    stem, _ = os.path.splitext(path)
    return f"{stem}_{suffix}.csv"


def curve_in_bits(records: Sequence[CurveRecord]) -> List[Dict[str, float]]:
    """The information columns of a curve, converted to bits."""
    return [
        {
            "beta": r.beta,
            "mi_theta_past_bits": to_bits(r.mi_theta_past),
            "mi_theta_future_bits": to_bits(r.mi_theta_future),
            "cmi_theta_past_given_future_bits": to_bits(r.cmi_theta_past_given_future),
        }
        for r in records
    ]


def run_curve(cfg: RunConfig) -> int:
    joint = joint_model(cfg.world, cfg.n_past, cfg.n_future)
    solver = cfg.solver
    solver_cfg = SolverConfig(
        beta=cfg.betas[0],
        k_theta=solver["k_theta"],
        restarts=solver["restarts"],
        max_iters=solver["max_iters"],
        tol=solver["tol"],
        seed=solver["seed"],
        require_convergence=solver["require_convergence"],
    )
    records = information_curve(joint, cfg.betas, solver_cfg, threads=cfg.threads)
    write_output(emit_csv(records), cfg.output)
    bits_path = sidecar_path(cfg.output, "bits")
    if bits_path is not None:
        write_output(emit_csv(curve_in_bits(records), fields=BITS_FIELDS), bits_path)
    return EXIT_OK


def run_conjugate_limits(cfg: RunConfig) -> int:
    requested = set(cfg.betas)
    schedule = sorted(requested | {SMALL_BETA_PROBE, 1.0, LARGE_BETA_PROBE})
    report = limit_diagnostics(cfg.model, schedule)

    rows = []
    for row in report.rows:
        if row.beta not in requested:
            continue
        posterior = row.posterior
        entry: Dict[str, Any] = {"beta": row.beta, "family": posterior.family}
        for i, value in enumerate(posterior.parameter_vector()):
            entry[f"param_{i}"] = float(value)
        for i, value in enumerate(posterior.mean):
            entry[f"mean_{i}"] = float(value)
        for i, value in enumerate(posterior.variance):
            entry[f"variance_{i}"] = float(value)
        entry.update(
            log_partition=posterior.log_partition,
            prior_distance=row.prior_distance,
            mle_distance=row.mle_distance,
        )
        rows.append(entry)

    write_output(emit_csv(rows, fields=list(rows[0])), cfg.output)
    checks = [{"check": c.check, "passed": c.passed, "value": c.value} for c in report.checks]
    checks_path = sidecar_path(cfg.output, "checks")
    if checks_path is not None:
        write_output(emit_csv(checks, fields=LIMIT_CHECK_FIELDS), checks_path)
    for c in report.checks:
        logger.info("%s limit %-20s %s (%.3g)", report.family, c.check, "PASS" if c.passed else "FAIL", c.value)
    return EXIT_OK


def run_gibbs(cfg: RunConfig) -> int:
    settings = cfg.gibbs
    spec = GibbsObjectiveSpec(cfg.model, settings["beta"])
    init = GaussianVariationalParams(settings["init_mean"], settings["init_log_std"])
    step = settings["step_size"] if settings["step_size"] is not None else stable_step_size(spec, init)
    logger.info("Gibbs VI at beta=%g with step %.6g", spec.beta, step)
    result = gibbs_optimize(spec, init, step_size=step, max_iters=settings["max_iters"], tol=settings["tol"])

    write_output(emit_csv(result.trace, fields=TRACE_FIELDS), cfg.output)
    oracle = gaussian_power(cfg.model, spec.beta)
    summary = {
        "mean": result.params.mean,
        "log_std": result.params.log_std,
        "variance": result.params.variance,
        "objective": gibbs_objective(result.params, spec),
        "iterations": result.iterations,
        "converged": result.converged,
        "power_mean": oracle.params["mean"],
        "power_variance": oracle.params["var"],
        "neg_log_partition": -oracle.log_partition,
    }
    params_path = sidecar_path(cfg.output, "params")
    if params_path is not None:
        write_output(emit_csv([summary], fields=GIBBS_PARAM_FIELDS), params_path)
    else:
        logger.info("Gibbs VI result: %s", summary)
    return EXIT_OK


def run_augmentation(cfg: RunConfig) -> int:
    settings = cfg.augmentation
    rows = []
    for noise_std in settings["noise_stds"]:
        spec = AugmentationSpec(noise_std=noise_std, mc_samples=settings["mc_samples"], seed=settings["seed"])
        analytic = augmentation_gap_analytic(settings["x"], settings["theta"], settings["obs_var"], spec)
        mc = augmentation_gap_mc(settings["x"], settings["theta"], settings["obs_var"], spec)
        rows.append(
            {
                "noise_std": noise_std,
                "analytic_gap": analytic,
                "mc_estimate": mc.estimate,
                "mc_standard_error": mc.standard_error,
                "within_4se": mc.within(analytic),
            }
        )
    write_output(emit_csv(rows, fields=AUGMENTATION_FIELDS), cfg.output)
    return EXIT_OK


def run_verify(seed: int = DEFAULT_SEED, threads: int = 1, output: Optional[str] = None) -> int:
    results = run_verification(seed=seed, threads=threads)
    write_output(emit_csv(results, fields=CHECK_FIELDS), output)
    failed = [r.check for r in results if not r.passed]
    if failed:
        logger.error("Verification failed: %s", ", ".join(failed))
        return EXIT_NUMERICAL
    return EXIT_OK


MODES = {
    "curve": run_curve,
    "conjugate_limits": run_conjugate_limits,
    "gibbs": run_gibbs,
    "augmentation": run_augmentation,
}


def run(config_file: str, output: Optional[str] = None, seed: Optional[int] = None, threads: Optional[int] = None) -> int:
    """Loads a config, applies overrides and runs its mode; returns the exit code."""
    try:
        cfg = RunConfig(config_file)
        cfg.override(output=output, seed=seed, threads=threads)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG

    logger.info("Running %s", cfg)
    try:
        if cfg.mode == "verify":
            try:
                verify_seed = int(cfg.get("solver.seed"))
            except ConfigError:
                verify_seed = DEFAULT_SEED
            return run_verify(verify_seed, cfg.threads, cfg.output)
        return MODES[cfg.mode](cfg)
    except PIBError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pib", description="Predictive information bottleneck laboratory")
    parser.add_argument("--log-level", default="WARNING", help="Console log level before a config is loaded")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run the experiment described by a JSON config")
    run_parser.add_argument("config", help="Path to the JSON config")
    run_parser.add_argument("--out", default=None, help="Output CSV path (overrides the config)")
    run_parser.add_argument("--seed", type=int, default=None, help="Base seed (overrides the config)")
    run_parser.add_argument("--threads", type=int, default=None, help="Worker threads (overrides the config)")

    verify_parser = commands.add_parser("verify", help="Run the invariant suite on the built-in worlds")
    verify_parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Base seed")
    verify_parser.add_argument("--threads", type=int, default=1, help="Worker threads")
    verify_parser.add_argument("--out", default=None, help="Output CSV path (default: standard output)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
    except ConfigError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_CONFIG

    if args.command == "run":
        return run(args.config, output=args.out, seed=args.seed, threads=args.threads)
    if args.threads < 1:
        logger.error("--threads must be at least 1, got %d", args.threads)
        return EXIT_CONFIG
    try:
        return run_verify(args.seed, args.threads, args.out)
    except PIBError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
