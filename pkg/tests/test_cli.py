import csv
import json

import pytest

from isoplate.cli import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_PARTIAL, build_parser, main, output_dir
from isoplate.core.config import settings
from isoplate.core.exceptions import StabilityError
from isoplate.services import scenario_service
from isoplate.services.scenario_service import PRESETS, parse_config

BENDING = {
    "geometry": {"a": 10.0, "h_bar": 0.2},
    "mesh": {"elements": 3},
    "boundary": "SS1-all",
    "load": "pressure",
    "analysis": "linear-bending",
    "linear_steps": 3,
}


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# --- parser ---


def test_parser_defaults():
    args = build_parser().parse_args(["solve", "--preset", "4.1"])
    assert args.alpha == 0.0
    assert args.n == 1
    assert args.analysis is None
    assert args.config is None


def test_unknown_preset_rejected_by_parser():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["solve", "--preset", "9.9"])


def test_solve_needs_config_or_preset():
    with pytest.raises(SystemExit) as exc_info:
        main(["solve"])
    assert exc_info.value.code == 2


def test_presets_lists_every_name(capsys):
    assert main(["presets"]) == EXIT_OK
    assert capsys.readouterr().out.split() == list(PRESETS)


# --- output directory ---


def test_output_dir_precedence(tmp_path):
    config = parse_config({**BENDING, "output": str(tmp_path / "configured")})
    assert output_dir(config, "runs/plate.json", str(tmp_path / "flag")) == tmp_path / "flag"
    assert output_dir(config, "runs/plate.json", None) == tmp_path / "configured"


def test_output_dir_defaults_to_config_stem(monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_DIR", "out")
    config = parse_config(BENDING)
    assert output_dir(config, "runs/plate.json", None).as_posix() == "out/plate"
    assert output_dir(config.model_copy(update={"name": "tapered"}), None, None).as_posix() == "out/tapered"


# --- solve ---


def test_solve_config_writes_outputs(tmp_path):
    source = _write(tmp_path / "plate.json", BENDING)
    out = tmp_path / "result"
    assert main(["solve", str(source), "--out", str(out)]) == EXIT_OK

    with (out / "path.csv").open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 3
    assert float(rows[-1]["load_normalized"]) == pytest.approx(1.0)

    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["analysis"] == "linear-bending"
    assert summary["converged"] is True


def test_solve_preset(tmp_path):
    code = main(["solve", "--preset", "4.1", "--alpha", "0.01", "--analysis", "linear-bending",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "path.csv").exists()


def test_solve_reports_numerical_failure_as_partial(tmp_path, monkeypatch):
    def no_mode(model):
        raise StabilityError("no compressive eigenvalue")

    monkeypatch.setattr(scenario_service, "plate_linear_buckling", no_mode)
    source = _write(tmp_path / "plate.json", {**BENDING, "load": "uniaxial-x", "analysis": "nonlinear-buckling"})
    out = tmp_path / "result"
    assert main(["solve", str(source), "--out", str(out)]) == EXIT_PARTIAL
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["termination"] == "no buckling mode"
    assert summary["error"] == "no compressive eigenvalue"


def test_solve_unwritable_output(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    source = _write(tmp_path / "plate.json", BENDING)
    assert main(["solve", str(source), "--out", str(blocker / "result")]) == EXIT_CONFIG_ERROR


def test_solve_invalid_config(tmp_path):
    source = _write(tmp_path / "bad.json", {**BENDING, "boundary": "hinged"})
    assert main(["solve", str(source), "--out", str(tmp_path / "out")]) == EXIT_CONFIG_ERROR
    assert not (tmp_path / "out").exists()


def test_solve_analysis_override_must_match_load(tmp_path):
    source = _write(tmp_path / "plate.json", BENDING)
    assert main(["solve", str(source), "--analysis", "nonlinear-buckling", "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR


def test_solve_inadmissible_preset(tmp_path):
    assert main(["solve", "--preset", "4.1", "--alpha", "0.05", "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR


# --- batch ---


def test_batch_rejects_shared_output_directory(tmp_path):
    shared = {**BENDING, "output": str(tmp_path / "same")}
    first = _write(tmp_path / "first.json", shared)
    second = _write(tmp_path / "second.json", shared)
    assert main(["batch", str(first), str(second)]) == EXIT_CONFIG_ERROR
    assert not (tmp_path / "same").exists()


def test_batch_rejects_invalid_member(tmp_path):
    good = _write(tmp_path / "good.json", BENDING)
    bad = _write(tmp_path / "bad.json", {**BENDING, "geometry": {"a": 10.0}})
    assert main(["batch", str(good), str(bad)]) == EXIT_CONFIG_ERROR
