import csv
import json
from pathlib import Path
from typing import Any

from isoplate.core.config import settings
from isoplate.core.logging_config import get_logger
from isoplate.schemas.scenario import ScenarioConfig
from isoplate.services.scenario_service import LoadNormalizer
from isoplate.services.solvers import EquilibriumPath

logger = get_logger(__name__)

PATH_FILENAME = "path.csv"
SUMMARY_FILENAME = "summary.json"
PATH_HEADER = ["step", "lambda", "load_normalized", "w_probe", "w_normalized", "iterations"]


def _fmt(value: float) -> str:
    return format(float(value), f".{settings.CSV_SIGNIFICANT_DIGITS}g")


def emit_path(path: EquilibriumPath, config: ScenarioConfig, destination: str | Path) -> Path:
    """Write one CSV row per accepted step; `destination` is a directory or a .csv file."""
    target = Path(destination)
    if target.suffix.lower() != ".csv":
        target = target / PATH_FILENAME
    normalizer = LoadNormalizer.from_config(config)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(PATH_HEADER)
            for record in path:
                writer.writerow([
                    record.step,
                    _fmt(record.load_factor),
                    _fmt(normalizer.load(record.load_factor)),
                    _fmt(record.probe),
                    _fmt(normalizer.deflection(record.probe)),
                    record.iterations,
                ])
    except OSError as exc:
        raise OSError(f"cannot write equilibrium path to {target}: {exc}") from exc
    logger.info("Wrote equilibrium path", extra={'file': str(target), 'rows': len(path)})
    return target


def write_summary(summary: dict[str, Any], destination: str | Path) -> Path:
    target = Path(destination)
    if target.suffix.lower() != ".json":
        target = target / SUMMARY_FILENAME
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write summary to {target}: {exc}") from exc
    logger.info("Wrote summary", extra={'file': str(target)})
    return target
