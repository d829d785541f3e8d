import json

import pytest

from xpmeit import harness
from xpmeit.cli import main
from xpmeit.detection import DetectionParams


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in harness.PRESETS:
        assert name in out


def test_run_preset_and_fit(tmp_path, capsys):
    code = main(["run", "fig2", "--engine", "lti", "--shots", "30", "--seed", "3", "--out", str(tmp_path)])
    assert code == 0
    cfg = json.loads((tmp_path / "fig2" / "config.json").read_text())
    assert cfg["engine"] == "lti" and cfg["seed"] == 3 and cfg["detection"]["n_shots"] == 30
    capsys.readouterr()
    assert main(["fit", str(tmp_path / "fig2" / "traces" / "point_00.csv")]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["converged"]
    assert result["params"]["tau"] == pytest.approx(1.218e-6, rel=0.1)


def test_run_config_file_with_failures_exits_nonzero(tmp_path):
    cfg = harness.get_preset("fig5").with_(
        engine="lti", detection=DetectionParams(n_shots=2, sampling_period=10e-9), out_dir=str(tmp_path)
    )
    path = tmp_path / "config.json"
    path.write_text(cfg.to_json())
    assert main(["run", str(path)]) == 1


def test_unknown_target_and_missing_file(tmp_path):
    assert main(["run", "fig42"]) == 2
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2


def test_validate(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    assert "rel.diff" in capsys.readouterr().out
    text = (tmp_path / "validation-lti-vs-bloch" / "engine_comparison.csv").read_text()
    assert text.startswith("# config_hash=")
