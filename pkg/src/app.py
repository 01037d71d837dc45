"""Command-line launcher for radiativity reconstruction experiments.

Usage examples:
    python -m src.app forward --config manufactured_elliptic
    python -m src.app rates --config elliptic_gradient_kappa2 --out results/rates --jobs 4
    python -m src.app spectral-info --config path/to/experiment.ini --seed 3
"""

from __future__ import annotations

import argparse
import logging
import platform
import sys
from datetime import datetime
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import scipy

try:
    from . import analysis
    from .elliptic import ProblemError, SolverError
    from .experiment_config import ConfigError, ExperimentConfig, parse_config
    from .grid import GridError
    from .helper_functions.field_io import FieldFormatError, write_field_csv, write_manifest, write_table
    from .inverse import InversionError
    from .scenarios import Experiment, build_experiment
    from .spectral import SpectralError, build_basis
except ImportError:
    import analysis
    from elliptic import ProblemError, SolverError
    from experiment_config import ConfigError, ExperimentConfig, parse_config
    from grid import GridError
    from helper_functions.field_io import FieldFormatError, write_field_csv, write_manifest, write_table
    from inverse import InversionError
    from scenarios import Experiment, build_experiment
    from spectral import SpectralError, build_basis

# Configure the root logger once so every command streams progress.
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
COMMAND_HELP = {
    "forward": "Solve the forward problem for q_dagger and export the state.",
    "invert": "Run one Tikhonov inversion at the configured noise level.",
    "rates": "Sweep the noise levels and fit convergence slopes.",
    "vsc-check": "Estimate the source-condition constant over admissible samples.",
    "stability-check": "Estimate conditional stability constants over admissible samples.",
    "spectral-info": "Export the sine-basis expansion of q_dagger - q_star.",
}
HANDLED_ERRORS = (
    ConfigError,
    FieldFormatError,
    GridError,
    SpectralError,
    ProblemError,
    SolverError,
    InversionError,
    analysis.AnalysisError,
)

Entries = dict[str, object]


def build_parser() -> argparse.ArgumentParser:
    """Build the ``radinv`` parser with one subcommand per experiment."""
    parser = argparse.ArgumentParser(
        prog="radinv",
        description="Reconstruct the radiativity coefficient and check stability and convergence rates.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, help_text in COMMAND_HELP.items():
        sub = subparsers.add_parser(command, help=help_text)
        sub.add_argument(
            "--config",
            required=True,
            help="INI configuration file, or the name of a preset in src/scenario_data.",
        )
        sub.add_argument("--out", default=None, help="Output directory; overrides experiment.output_dir.")
        sub.add_argument("--seed", default=None, type=int, help="Seed; overrides experiment.seed.")
        sub.add_argument("--jobs", default=None, type=int, help="Worker processes for rate studies.")
        sub.add_argument("--verbose", action="store_true", help="Log solver and optimizer details.")
    return parser


def _alpha(config: ExperimentConfig) -> float:
    return analysis.select_alpha(config.kappa, config.data_mode, config.system, config.margin, config.alpha_rule)


def _save(frame: pd.DataFrame, path: Path, label: str) -> Path:
    write_table(frame, path)
    logger.info("Saved %s to %s", label, path)
    return path


def run_forward(experiment: Experiment) -> Entries:
    """Solve for ``q_dagger`` and report the error against a closed-form solution when known."""
    config = experiment.config
    state = experiment.scenario.truth_state
    final = state[state.nt] if config.is_parabolic else state
    path = write_field_csv(final, config.output_dir / "state.csv")
    logger.info("Saved state to %s", path)
    entries: Entries = {
        "c0": experiment.scenario.c0,
        "state_min": float(final.values.min()),
        "state_max": float(final.values.max()),
    }
    if experiment.manufactured is not None:
        max_error, l2_error = experiment.manufactured.errors(state)
        print(f"max_error = {max_error:.6e}")
        entries.update({"max_error": max_error, "l2_error": l2_error})
    return entries


def run_invert(experiment: Experiment) -> Entries:
    """Invert once at ``experiment.delta`` with the a-priori parameter choice."""
    config = experiment.config
    alpha = _alpha(config)
    point = analysis.RatePoint(
        index=0,
        delta=config.delta,
        beta=analysis.choose_beta(config.delta, alpha),
        seed=config.seed,
        mode=config.data_mode,
        problem=experiment.problem,
        scenario=experiment.scenario,
        optimizer=config.optimizer,
        lp_exponent=analysis.DEFAULT_LP_EXPONENT,
    )
    result, row = analysis.invert_at_level(point)
    write_field_csv(result.q_rec, config.output_dir / "q_rec.csv")
    _save(result.history, config.output_dir / "history.csv", "objective history")
    diagnostics = pd.DataFrame([row], columns=analysis.RATE_COLUMNS + analysis.DIAGNOSTIC_COLUMNS[1:])
    _save(diagnostics, config.output_dir / "inversion_diagnostics.csv", "inversion diagnostics")
    return {
        "alpha": alpha,
        "beta": point.beta,
        "iterations": result.iterations,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "discrepancy": result.discrepancy,
        "err_q_l2": row["err_q_l2"],
        "comparison_ok": row["comparison_ok"],
    }


def run_rates(experiment: Experiment) -> Entries:
    """Rate study over the configured noise levels."""
    config = experiment.config
    alpha = _alpha(config)
    study = analysis.rate_study(
        experiment.scenario,
        experiment.problem,
        config.data_mode,
        config.deltas,
        config.seed,
        alpha=alpha,
        optimizer=config.optimizer,
        jobs=config.jobs,
    )
    _save(study.rows, config.output_dir / "rates.csv", "rate table")
    _save(study.summary(), config.output_dir / "rate_summary.csv", "rate summary")
    _save(study.diagnostics, config.output_dir / "rate_diagnostics.csv", "rate diagnostics")
    entries: Entries = {
        "alpha": alpha,
        "q_slope": study.q_fit.slope,
        "state_slope": study.state_fit.slope,
        "lp_slope": study.lp_fit.slope,
        "excluded": study.excluded,
        "inconclusive": study.inconclusive,
        "comparison_ok": bool(study.diagnostics["comparison_ok"].all()),
    }
    if config.is_parabolic:
        other_rule = "alternative" if config.alpha_rule == "elliptic" else "elliptic"
        entries["alpha_" + other_rule] = analysis.select_alpha(
            config.kappa, config.data_mode, config.system, config.margin, other_rule
        )
    return entries


def run_vsc_check(experiment: Experiment) -> Entries:
    """Estimate the source-condition constant for the configured data mode."""
    config = experiment.config
    alpha = _alpha(config)
    samples = analysis.sample_admissible(experiment.scenario, config.samples, config.seed, config.amplitude)
    estimate = analysis.vsc_constant(samples, experiment.scenario, experiment.problem, alpha, config.data_mode)
    table = pd.DataFrame(
        [(config.kappa, alpha, config.data_mode, estimate.samples, estimate.constant, estimate.argmax, estimate.violations)],
        columns=["kappa", "alpha", "mode", "samples", "constant", "argmax_sample", "violations"],
    )
    _save(table, config.output_dir / "vsc.csv", "VSC estimate")
    return {"alpha": alpha, "vsc_constant": estimate.constant, "violations": estimate.violations}


def run_stability_check(experiment: Experiment) -> Entries:
    """Stability ratios in both norms of the configured system."""
    config = experiment.config
    samples = analysis.sample_admissible(experiment.scenario, config.samples, config.seed, config.amplitude)
    sweep = analysis.stability_sweep(samples, experiment.scenario, experiment.problem, config.epsilon)
    _save(sweep, config.output_dir / "stability.csv", "stability ratios")
    bound = analysis.state_difference_bound(samples, experiment.scenario, experiment.problem)
    first, second = sweep["max_ratio"].iloc[0], sweep["max_ratio"].iloc[1]
    return {
        "state_difference_bound": bound,
        f"{sweep['mode'].iloc[1]}_to_{sweep['mode'].iloc[0]}_ratio": float(second / first),
    }


def run_spectral_info(experiment: Experiment) -> Entries:
    """Export the sine coefficients of ``q_dagger - q_star``."""
    config = experiment.config
    scenario = experiment.scenario
    table = analysis.spectral_table(scenario.q_dagger - scenario.q_star)
    _save(table, config.output_dir / "spectral.csv", "spectral coefficients")
    basis = build_basis(experiment.problem.grid)
    return {
        "source_size": scenario.source_size,
        "mu_min": basis.mu_min,
        "mu_max": basis.mu_max,
        "poincare_constant": basis.poincare_constant,
    }


COMMANDS: dict[str, Callable[[Experiment], Entries]] = {
    "forward": run_forward,
    "invert": run_invert,
    "rates": run_rates,
    "vsc-check": run_vsc_check,
    "stability-check": run_stability_check,
    "spectral-info": run_spectral_info,
}


def run(config: ExperimentConfig, command: str) -> int:
    """Build the experiment, run ``command``, and write the run manifest.

    Returns
    -------
    int
        ``0`` on success. Module errors propagate to :func:`main`.
    """
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command '{command}'. Use one of {', '.join(COMMANDS)}.")
    experiment = build_experiment(config)
    results = COMMANDS[command](experiment)

    manifest: Entries = {
        "command": command,
        "seed": config.seed,
        "jobs": config.jobs,
        "timestamp": datetime.now().isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }
    manifest.update({f"result.{key}": value for key, value in results.items()})
    manifest.update(config.echo())
    path = write_manifest(manifest, config.output_dir / MANIFEST_NAME)
    print(f"Saved run manifest to {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, run the selected command, and return an exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        config = parse_config(args.config).with_overrides(
            output_dir=Path(args.out) if args.out else None,
            seed=args.seed,
            jobs=args.jobs,
        )
        return run(config, args.command)
    except HANDLED_ERRORS as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
