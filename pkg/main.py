"""
MP-QKD key-rate toolkit - command-line entry point

Subcommands:
    evaluate   secure key rate of one parameter vector
    optimize   swarm search for the best parameter vector
    sweep      rate (and optimized parameters) over a family of channels
    oracle     Monte Carlo check of the analytic statistics

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""
import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from config import apply_parameter_overrides, load_experiment_config, settings
from schemas import ExperimentConfig, OutputFormat, ParameterVector, Strategy, SweepSpec
from services.core import intensity_ratios, transmittance
from services.optimizer_service import optimize
from services.oracle_service import validate_channel_model
from services.security_service import secure_key_rate
from services.sweep_service import render_rows, run_sweep
from utils.error_handlers import (
    EXIT_OK,
    EXIT_USAGE,
    ConfigurationError,
    OracleMismatchError,
    safe_execute,
)
from utils.logging_config import get_logger, init_logging, log_operation

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpqkd", description="Asymmetric mode-pairing QKD key-rate toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment configuration (JSON)")
    common.add_argument("--seed", type=int, help="Random seed (defaults to the config or MPQKD_SEED)")
    common.add_argument("--out", help="Write the result to this file instead of stdout")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                        help="Override one source parameter (repeatable)")
    common.add_argument("--workers", type=int, help="Worker threads (defaults to MPQKD_WORKERS)")

    swarm = argparse.ArgumentParser(add_help=False)
    swarm.add_argument("--particles", type=int, help="Swarm size")
    swarm.add_argument("--iters", type=int, help="Maximum iterations")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("evaluate", parents=[common], help="Evaluate one parameter vector")
    subparsers.add_parser("optimize", parents=[common, swarm], help="Optimize the parameter vector")

    sweep = subparsers.add_parser("sweep", parents=[common, swarm], help="Sweep total distance")
    sweep.add_argument("--distances", type=float, nargs="+", help="Total distances in km")
    sweep.add_argument("--delta-L", dest="delta_L", type=float, default=0.0, help="Arm length difference in km")
    sweep.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.ASYMMETRIC_INTENSITY.value)
    sweep.add_argument("--no-optimize", action="store_true", help="Evaluate the configured vector at every point")
    sweep.add_argument("--format", choices=[f.value for f in OutputFormat], help="Row format (default csv)")
    sweep.add_argument("--pairing-intervals", type=int, nargs="+", help="Values of l")
    sweep.add_argument("--pulse-counts", type=float, nargs="+", help="Values of N")

    oracle = subparsers.add_parser("oracle", parents=[common], help="Compare simulation with the analytic model")
    oracle.add_argument("--n-sim", dest="n_sim", type=float, default=1e6, help="Simulated rounds")
    oracle.add_argument("--shards", type=int, help="Independent simulation shards (defaults to MPQKD_ORACLE_SHARDS)")
    oracle.add_argument("--threshold", type=float, help="Largest accepted |z| (defaults to MPQKD_Z_THRESHOLD)")
    return parser


def resolve_seed(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """--seed, then a seed set in the config file, then MPQKD_SEED"""
    if args.seed is not None:
        return args.seed
    if "seed" in config.pso.model_fields_set:
        return config.pso.seed
    return settings.DEFAULT_SEED


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file plus command-line overrides"""
    config = load_experiment_config(args.config)
    config = apply_parameter_overrides(config, args.param)
    if args.seed is not None and args.seed < 0:
        raise ConfigurationError(f"--seed must be >= 0, got {args.seed}")

    pso_updates: Dict[str, Any] = {"seed": resolve_seed(args, config)}
    if getattr(args, "particles", None) is not None:
        pso_updates["n_particles"] = args.particles
    if getattr(args, "iters", None) is not None:
        pso_updates["max_iters"] = args.iters
    pso = config.pso.model_validate({**config.pso.model_dump(), **pso_updates})
    return config.model_copy(update={"pso": pso})


def _workers(args: argparse.Namespace) -> int:
    workers = args.workers if args.workers is not None else settings.WORKERS
    if workers < 1:
        raise ConfigurationError(f"--workers must be >= 1, got {workers}")
    return workers


def _require_parameters(config: ExperimentConfig) -> ParameterVector:
    if config.parameters is None:
        raise ConfigurationError("No parameter vector: add a 'parameters' section or --param overrides")
    return config.parameters


def emit(args: argparse.Namespace, text: str) -> None:
    """Write command output to --out or stdout"""
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
        logger.info(f"Wrote {args.out}")
    else:
        sys.stdout.write(text)


def _dump(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, default=str)


def cmd_evaluate(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    config = load_config(args)
    g = _require_parameters(config)
    breakdown = secure_key_rate(g, config.channel, config.protocol)
    signal_ratio, decoy_ratio = intensity_ratios(g, transmittance(config.channel))
    payload = {
        "channel": config.channel.model_dump(mode="json"),
        "parameters": g.model_dump(),
        "signal_ratio": signal_ratio,
        "decoy_ratio": decoy_ratio,
        "breakdown": breakdown.as_dict(),
    }
    emit(args, _dump(payload))
    return EXIT_OK, payload


def cmd_optimize(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    config = load_config(args)
    result = optimize(config.channel, config.protocol, config.pso,
                      workers=_workers(args), warm_start=config.parameters)
    g = result.parameters
    signal_ratio, decoy_ratio = intensity_ratios(g, transmittance(config.channel))
    payload = {
        "seed": config.pso.seed,
        "parameters": g.model_dump(),
        "R": result.breakdown.R,
        "iterations": result.iterations,
        "reason": result.reason,
        "signal_ratio": signal_ratio,
        "decoy_ratio": decoy_ratio,
        "breakdown": result.breakdown.as_dict(),
    }
    emit(args, _dump(payload))
    return EXIT_OK, payload


def _sweep_spec(args: argparse.Namespace, config: ExperimentConfig) -> SweepSpec:
    if args.distances is None:
        if config.sweep is None:
            raise ConfigurationError("No sweep: add a 'sweep' section or --distances")
        spec = config.sweep
    else:
        spec = SweepSpec(
            distances=args.distances,
            delta_L=args.delta_L,
            strategy=args.strategy,
            optimize=not args.no_optimize,
            pairing_intervals=args.pairing_intervals,
            pulse_counts=args.pulse_counts,
        )
    if args.format is not None:
        spec = spec.model_copy(update={"format": OutputFormat(args.format)})
    return spec


def cmd_sweep(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    config = load_config(args)
    spec = _sweep_spec(args, config)
    rows = run_sweep(spec, config.channel, config.protocol, config.pso,
                     parameters=config.parameters, workers=_workers(args))
    if args.out is None and spec.output:
        args.out = spec.output
    emit(args, render_rows(rows, spec.format))
    return EXIT_OK, {"points": len(rows)}


def cmd_oracle(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    config = load_config(args)
    if args.n_sim < 1 or args.n_sim != int(args.n_sim):
        raise ConfigurationError(f"--n-sim must be a positive integer, got {args.n_sim}")
    g = _require_parameters(config)
    n_sim = int(args.n_sim)
    threshold = args.threshold if args.threshold is not None else settings.Z_THRESHOLD
    shards = args.shards if args.shards is not None else settings.ORACLE_SHARDS

    report = validate_channel_model(
        g, config.channel, config.protocol, n_sim, config.pso.seed,
        threshold=threshold, shards=shards, chunk=settings.ORACLE_CHUNK, workers=_workers(args),
    )
    payload = {
        "n_sim": n_sim,
        "seed": config.pso.seed,
        "shards": shards,
        "threshold": threshold,
        "passed": report.passed,
        "entries": [
            {"label": e.label, "empirical": e.empirical, "expected": e.expected, "z": e.z, "passed": e.passed}
            for e in report.entries
        ],
    }
    emit(args, _dump(payload))
    if not report.passed:
        worst = report.worst
        raise OracleMismatchError(
            f"Simulation disagrees with the analytic model: {worst.label} has z = {worst.z:.2f}",
            details={"label": worst.label, "z": worst.z, "threshold": threshold},
        )
    return EXIT_OK, payload


COMMANDS = {
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    init_logging()
    logger.debug(f"Settings: {settings.get_masked_config()}")

    started = time.perf_counter()
    exit_code, payload = safe_execute(COMMANDS[args.command], args, operation=args.command)
    log_operation(logger, args.command, (time.perf_counter() - started) * 1000.0)

    if exit_code != EXIT_OK:
        sys.stderr.write(_dump(payload) + "\n")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
