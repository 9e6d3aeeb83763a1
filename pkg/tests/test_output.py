import csv
import json

import numpy as np
import pytest

from isoplate.services.output_service import PATH_FILENAME, PATH_HEADER, SUMMARY_FILENAME, emit_path, write_summary
from isoplate.services.scenario_service import LoadNormalizer, parse_config
from isoplate.services.solvers import EquilibriumPath, PathRecord

CONFIG = parse_config({
    "geometry": {"a": 10.0, "h_bar": 0.2},
    "boundary": "SS1-all",
    "load": "uniaxial-x",
    "analysis": "nonlinear-buckling",
})


def _path(n: int) -> EquilibriumPath:
    return EquilibriumPath(records=[
        PathRecord(step=i + 1, load_factor=100.0 * (i + 1) / 3, state=np.zeros(3), probe=1e-4 * (i + 1) ** 2,
                   iterations=i % 4 + 1)
        for i in range(n)
    ])


# --- path.csv ---


def test_empty_path_writes_header_only(tmp_path):
    target = emit_path(EquilibriumPath(), CONFIG, tmp_path)
    assert target == tmp_path / PATH_FILENAME
    assert target.read_text(encoding="utf-8") == ",".join(PATH_HEADER) + "\n"


def test_one_row_per_step(tmp_path):
    target = emit_path(_path(7), CONFIG, tmp_path / "run")
    with target.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 7
    assert [int(row["step"]) for row in rows] == list(range(1, 8))
    assert rows[2]["iterations"] == "3"


def test_columns_are_normalized_consistently(tmp_path):
    target = emit_path(_path(3), CONFIG, tmp_path)
    normalizer = LoadNormalizer.from_config(CONFIG)
    with target.open(encoding="utf-8", newline="") as handle:
        row = list(csv.DictReader(handle))[1]
    assert float(row["lambda"]) == 200.0 / 3
    assert float(row["load_normalized"]) == pytest.approx(normalizer.load(200.0 / 3), rel=1e-15)
    assert float(row["w_normalized"]) == pytest.approx(float(row["w_probe"]) / 0.2, rel=1e-15)


def test_explicit_csv_destination(tmp_path):
    target = emit_path(_path(2), CONFIG, tmp_path / "custom.csv")
    assert target.name == "custom.csv"
    assert target.exists()


def test_output_is_byte_deterministic(tmp_path):
    first = emit_path(_path(5), CONFIG, tmp_path / "a").read_bytes()
    second = emit_path(_path(5), CONFIG, tmp_path / "b").read_bytes()
    assert first == second
    assert b"\r\n" not in first


def test_unwritable_destination_names_the_path(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    with pytest.raises(OSError, match="blocker"):
        emit_path(_path(1), CONFIG, blocker / "run")


# --- summary.json ---


def test_summary_is_sorted_json(tmp_path):
    summary = {"steps": 3, "analysis": "nonlinear-buckling", "critical_load_threshold": None}
    target = write_summary(summary, tmp_path)
    assert target == tmp_path / SUMMARY_FILENAME
    text = target.read_text(encoding="utf-8")
    assert json.loads(text) == summary
    assert text.index('"analysis"') < text.index('"steps"')
    assert text.endswith("\n")
