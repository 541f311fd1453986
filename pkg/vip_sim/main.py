"""Command-line entry point: ``vip-sim <command> --config FILE [--seed N] [--out DIR]``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from vip_sim import __version__
from vip_sim.analysis.limits import PROJECTION_PRESETS, projection_preset
from vip_sim.config import RunConfig, Settings, load_settings, parse_config
from vip_sim.errors import VipError
from vip_sim.pipeline import (
    load_report,
    load_spectrum,
    run_analyze,
    run_frames,
    run_geom_factor,
    run_limit,
    run_pipeline,
    run_project,
    run_simulate,
)
from vip_sim.storage.filesystem import FileStore
from vip_sim.utils.log import configure_logging
from vip_sim.utils.metrics import write_metrics

logger = logging.getLogger("vip_sim")

COMMANDS = ("simulate", "analyze", "limit", "project", "geom-factor", "frames", "pipeline")
PARALLEL_COMMANDS = ("simulate", "geom-factor", "frames", "pipeline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vip-sim",
        description="Simulate and analyse a Pauli-violating X-ray search in a copper conductor.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        type=str.upper,
        help="Overrides VIP_LOG_LEVEL",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    helps = {
        "simulate": "Generate the current-on and current-off spectra",
        "analyze": "Subtract the spectra and count the ROI",
        "limit": "Upper limit on beta^2/2 from an ROI report",
        "project": "Scale a limit report to another campaign",
        "geom-factor": "Estimate the geometric factor by photon transport",
        "frames": "Synthesize a CCD frame corpus and measure the clustering",
        "pipeline": "simulate, analyze, limit and project in one go",
    }
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=helps[name], description=helps[name])
        cmd.add_argument("--config", required=True, type=Path, help="Run configuration (.toml, .cfg, .yaml)")
        cmd.add_argument("--seed", type=int, help="Overrides the config seed")
        cmd.add_argument("--out", type=Path, help="Output directory (overrides VIP_OUTPUT_DIR and the config)")
        if name in PARALLEL_COMMANDS:
            cmd.add_argument("--workers", type=int, help="Worker processes (overrides VIP_WORKERS)")
        if name == "analyze":
            cmd.add_argument("--on", required=True, type=Path, help="Current-on spectrum CSV")
            cmd.add_argument("--off", required=True, type=Path, help="Current-off spectrum CSV")
        elif name == "limit":
            cmd.add_argument("--report", required=True, type=Path, help="roi_report.toml from `analyze`")
            cmd.add_argument("--geom-factor", type=Path, help="geom_factor.toml from `geom-factor`")
            cmd.add_argument("--n-sigma", type=float, help="Overrides [limit] n_sigma")
        elif name == "project":
            cmd.add_argument("--report", required=True, type=Path, help="limit_report.toml from `limit`")
            cmd.add_argument("--preset", choices=sorted(PROJECTION_PRESETS), help="Named campaign scales")
            cmd.add_argument("--background-scale", type=float)
            cmd.add_argument("--live-time-scale", type=float)
            cmd.add_argument("--current-scale", type=float)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def resolve_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """Config file, then ``--seed``; output directory from ``--out``, VIP_OUTPUT_DIR or the file."""
    config = parse_config(args.config)
    out = args.out or settings.output_dir
    if args.seed is not None or out is not None:
        config = config.with_overrides(seed=args.seed, output_dir=out)
    return config


def _scales(args: argparse.Namespace, config: RunConfig) -> tuple[float, float, float]:
    if args.preset:
        background, live_time, current = projection_preset(args.preset)
    else:
        background = config.limit.projection_background_scale
        live_time = config.limit.projection_live_time_scale
        current = config.limit.projection_current_scale
    return (
        background if args.background_scale is None else args.background_scale,
        live_time if args.live_time_scale is None else args.live_time_scale,
        current if args.current_scale is None else args.current_scale,
    )


def run_command(args: argparse.Namespace, settings: Settings) -> None:
    config = resolve_config(args, settings)
    store = FileStore(config.output.directory)
    store.ensure_writable()
    workers = getattr(args, "workers", None) or settings.workers
    logger.info(f"vip-sim {args.command}: seed {config.seed}, output {config.output.directory}")

    if args.command == "simulate":
        run_simulate(config, store, workers)
    elif args.command == "analyze":
        run_analyze(load_spectrum(args.on), load_spectrum(args.off), config, store)
    elif args.command == "limit":
        geom_report = load_report(args.geom_factor) if args.geom_factor else None
        result = run_limit(load_report(args.report), config, store, geom_report, args.n_sigma)
        print(f"beta^2/2 <= {result.beta2_over_2_limit:.1e} ({result.confidence_label})")
    elif args.command == "project":
        result = run_project(load_report(args.report), _scales(args, config), store, config)
        print(f"projected beta^2/2 <= {result.projected_limit:.1e}")
    elif args.command == "geom-factor":
        estimate = run_geom_factor(config, store, workers)
        print(
            f"geometric factor {estimate.total_factor:.5f} "
            f"(survival x acceptance {estimate.survival_times_acceptance:.5f})"
        )
    elif args.command == "frames":
        rates = run_frames(config, store, workers)
        print(f"X-ray acceptance {rates.xray_acceptance:.4f}, track rejection {rates.track_rejection:.4f}")
    elif args.command == "pipeline":
        result = run_pipeline(config, store, workers)
        print(
            f"delta N = {result.roi.delta_counts:.0f} +- {result.roi.delta_error:.1f}; "
            f"beta^2/2 <= {result.limit.beta2_over_2_limit:.1e} ({result.limit.confidence_label}); "
            f"projected {result.projection.projected_limit:.1e}"
        )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    settings = load_settings()
    configure_logging(args.log_level or settings.log_level, settings.log_format)

    try:
        run_command(args, settings)
    except VipError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except Exception:
        logger.exception(f"Unexpected failure in `{args.command}`")
        return 1
    finally:
        if settings.metrics_file:
            try:
                write_metrics(settings.metrics_file)
            except OSError as exc:
                logger.warning(f"Could not write metrics to {settings.metrics_file}: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
