#!/usr/bin/env python3
"""
isoplate command-line interface.

Runs bending and buckling scenarios for variable-thickness plates and writes
the equilibrium path (path.csv) and a summary (summary.json) per run.

Usage:
    isoplate solve scenario.json --out results/tapered
    isoplate solve --preset 4.1 --alpha 0.01 --analysis nonlinear-buckling
    isoplate solve --preset 4.5-crossply --alpha 0.1 --n 2
    isoplate batch runs/*.json --workers 4
    isoplate presets

Options:
    --out, -o          Output directory (default: $ISOPLATE_OUTPUT_DIR/<scenario>)
    --preset, -p       Benchmark preset instead of a config file
    --alpha            Tapered ratio or sine-wave amplitude for presets
    --n                Sine-wave wavelength count for the 4.5 presets
    --analysis         linear-bending, nonlinear-bending or nonlinear-buckling
    --json-logs        Emit JSON log lines
    --verbose, -v      Per-step solver logging

Exit codes:
    0  path traced to its limit
    1  configuration error or unwritable output directory
    2  partial path (arc length underflow or non-convergence)
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from isoplate.core.config import settings
from isoplate.core.exceptions import IsoplateError
from isoplate.core.logging_config import get_logger, setup_logging
from isoplate.schemas.scenario import ScenarioConfig
from isoplate.services.output_service import emit_path, write_summary
from isoplate.services.scenario_service import PRESETS, parse_config, preset, run_scenario

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL = 2

ANALYSES = ["linear-bending", "nonlinear-bending", "nonlinear-buckling"]


def output_dir(config: ScenarioConfig, config_path: Optional[str], out: Optional[str]) -> Path:
    if out:
        return Path(out)
    if config.output:
        return Path(config.output)
    stem = Path(config_path).stem if config_path else (config.name or "scenario")
    return Path(settings.OUTPUT_DIR) / stem


def execute(config: ScenarioConfig, target: Path) -> int:
    result = run_scenario(config)
    emit_path(result.path, config, target)
    write_summary(result.summary, target)
    summary = result.summary
    logger.info(
        "Scenario finished",
        extra={
            'output': str(target),
            'steps': summary['steps'],
            'termination': summary['termination'],
            'critical_load_plateau': summary['critical_load_plateau'],
        },
    )
    return EXIT_OK if result.converged else EXIT_PARTIAL


def _run_batch_item(config_path: str, target: str) -> int:
    setup_logging()
    try:
        config = parse_config(config_path)
        return execute(config, Path(target))
    except IsoplateError as exc:
        logger.error("Scenario failed", extra={'config': config_path, 'error': str(exc)})
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        logger.error("Could not write results", extra={'config': config_path, 'output': target, 'error': str(exc)})
        return EXIT_CONFIG_ERROR


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        if args.preset:
            config = preset(args.preset, alpha=args.alpha, n=args.n, analysis=args.analysis or "nonlinear-buckling")
        else:
            config = parse_config(args.config)
            if args.analysis and args.analysis != config.analysis:
                config = ScenarioConfig.model_validate({**config.model_dump(by_alias=True), "analysis": args.analysis})
    except (IsoplateError, ValueError) as exc:
        logger.error("Invalid scenario", extra={'error': str(exc)})
        return EXIT_CONFIG_ERROR
    target = output_dir(config, args.config, args.out)
    try:
        return execute(config, target)
    except IsoplateError as exc:
        logger.error("Scenario failed", extra={'error': str(exc)})
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        logger.error("Could not write results", extra={'output': str(target), 'error': str(exc)})
        return EXIT_CONFIG_ERROR


def cmd_batch(args: argparse.Namespace) -> int:
    targets: dict[str, str] = {}
    for config_path in args.configs:
        try:
            config = parse_config(config_path)
        except IsoplateError as exc:
            logger.error("Invalid scenario", extra={'config': config_path, 'error': str(exc)})
            return EXIT_CONFIG_ERROR
        target = str(output_dir(config, config_path, None).resolve())
        if target in targets.values():
            logger.error("Two scenarios share an output directory", extra={'config': config_path, 'output': target})
            return EXIT_CONFIG_ERROR
        targets[config_path] = target

    workers = args.workers or settings.MAX_WORKERS
    logger.info("Dispatching batch", extra={'scenarios': len(targets), 'workers': workers})
    with ProcessPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(_run_batch_item, targets.keys(), targets.values()))

    if EXIT_CONFIG_ERROR in codes:
        return EXIT_CONFIG_ERROR
    return EXIT_PARTIAL if EXIT_PARTIAL in codes else EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    for name in PRESETS:
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoplate",
        description="Nonlinear bending and buckling of variable-thickness plates",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--json-logs', action='store_true', help='Emit JSON log lines')
    parser.add_argument('--verbose', '-v', action='store_true', help='Per-step solver logging')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='Run one scenario')
    solve.add_argument('config', nargs='?', help='Scenario JSON file')
    solve.add_argument('--out', '-o', help='Output directory')
    solve.add_argument('--preset', '-p', choices=PRESETS, help='Benchmark preset')
    solve.add_argument('--alpha', type=float, default=0.0, help='Tapered ratio or sine-wave amplitude (default: 0)')
    solve.add_argument('--n', type=int, default=1, help='Sine-wave wavelength count (default: 1)')
    solve.add_argument('--analysis', choices=ANALYSES, help='Override the analysis kind')
    solve.set_defaults(func=cmd_solve)

    batch = sub.add_parser('batch', help='Run independent scenarios in parallel')
    batch.add_argument('configs', nargs='+', help='Scenario JSON files')
    batch.add_argument('--workers', '-w', type=int, help=f'Worker processes (default: {settings.MAX_WORKERS})')
    batch.set_defaults(func=cmd_batch)

    presets = sub.add_parser('presets', help='List benchmark presets')
    presets.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(json_format=True if args.json_logs else None, level='DEBUG' if args.verbose else None)

    if args.command == 'solve' and not args.config and not args.preset:
        parser.error("Please provide a config file or use --preset")

    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
