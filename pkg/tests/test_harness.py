import csv
import json
import math

import numpy as np
import pytest

from xpmeit import harness
from xpmeit.detection import DetectionParams
from xpmeit.errors import InvalidParameterError
from xpmeit.model import TWO_PI, MediumParams, PhaseTrace, TimeGrid

FAST_DET = DetectionParams(n_shots=40)


def small_lti(tmp_path, **kw):
    base = harness.get_preset("fig2").with_(engine="lti", detection=FAST_DET, out_dir=str(tmp_path))
    return base.with_(**kw)


def test_exactly_six_presets():
    assert set(harness.list_presets()) == {"fig2", "fig3", "fig4", "fig5", "fig6", "validation-lti-vs-bloch"}


@pytest.mark.parametrize("name", sorted(harness.PRESETS))
def test_preset_round_trips_through_json(name):
    cfg = harness.get_preset(name)
    back = harness.ScenarioConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


def test_derived_presets():
    assert harness.get_preset("fig3").derived_from == "fig2"
    assert harness.get_preset("fig6").derived_from == "fig5"
    assert "derived-from: fig2" in harness.list_presets()["fig3"]


def test_preset_parameters():
    fig2 = harness.get_preset("fig2")
    assert fig2.windows_hz == (0.38e6, 0.6e6, 1.0e6, 2.0e6, 4.0e6)
    assert fig2.pulse(0).tau_s == 40e-9 and fig2.pulse(0).power_peak == pytest.approx(0.8e-6)
    fig4 = harness.get_preset("fig4")
    assert fig4.medium.d0 == 1.8 and fig4.pulse(0).power_peak == pytest.approx(160e-9)
    fig5 = harness.get_preset("fig5")
    assert fig5.tau_s == (20e-9, 40e-9, 70e-9, 140e-9, 255e-9)
    assert all(fig5.pulse(i).energy == pytest.approx(75e-15) for i in range(5))


@pytest.mark.parametrize(
    "kw",
    [
        dict(engine="magic"),
        dict(sweep="power"),
        dict(tau_s=(40e-9, 80e-9)),
        dict(energy=1e-15),
        dict(peak_power=None),
        dict(windows_hz=(0.1e6,)),
        dict(windows_hz=()),
        dict(n_slabs=0),
    ],
)
def test_config_validation(kw):
    with pytest.raises(InvalidParameterError):
        harness.get_preset("fig2").with_(**kw)


def test_unknown_keys_and_presets():
    d = harness.get_preset("fig2").to_dict()
    d["colour"] = "blue"
    with pytest.raises(InvalidParameterError):
        harness.ScenarioConfig.from_dict(d)
    with pytest.raises(InvalidParameterError):
        harness.get_preset("fig9")


def test_config_hash_sensitivity():
    cfg = harness.get_preset("fig2")
    assert cfg.with_(out_dir="elsewhere").config_hash() == cfg.config_hash()
    assert cfg.with_(seed=1).config_hash() != cfg.config_hash()
    assert len(cfg.config_hash()) == 64


def test_lti_constant_matches_stark_area():
    cfg = harness.get_preset("fig2")
    pulse = cfg.pulse(0)
    omega = 1.73e10 * math.sqrt(pulse.power_peak)
    area = omega**2 / (4 * cfg.delta_s) * math.sqrt(2 * math.pi) * pulse.tau_s
    assert harness.lti_coupling_const(cfg) == pytest.approx(3.0 * area / pulse.n_ph, rel=1e-12)


def test_fixed_energy_keeps_coupling_constant():
    cfg = harness.get_preset("fig5")
    cs = [harness.lti_coupling_const(cfg, i) for i in range(cfg.n_points)]
    assert max(cs) / min(cs) - 1 < 1e-12


def test_run_scenario_outputs(tmp_path):
    cfg = small_lti(tmp_path)
    out = harness.run_scenario(cfg)
    assert out.ok
    root = tmp_path / "fig2"
    names = sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())
    assert names == [
        "config.json",
        "plotdata.csv",
        "summary.csv",
        "summary.json",
        *[f"traces/point_{i:02d}.csv" for i in range(5)],
    ]
    h = cfg.config_hash()
    for p in root.rglob("*.csv"):
        lines = p.read_text().splitlines()
        assert lines[0].startswith(f"# config_hash={h}")
    trace_lines = (root / "traces" / "point_00.csv").read_text().splitlines()
    assert trace_lines[1] == "time_s,phase_rad,stderr_rad"
    doc = json.loads((root / "summary.json").read_text())
    assert doc["provenance"]["config_hash"] == h
    assert doc["provenance"]["seed"] == cfg.seed
    assert set(doc["config"]) == set(cfg.to_dict())
    assert len(doc["rows"]) == cfg.n_points
    rows = list(csv.DictReader(l for l in (root / "summary.csv").read_text().splitlines() if not l.startswith("#")))
    assert [int(r["index"]) for r in rows] == list(range(5))


def test_run_is_byte_identical_and_parallel_safe(tmp_path):
    cfg = small_lti(tmp_path)
    first = {p: p.read_bytes() for p in harness.run_scenario(cfg, workers=1).files}
    second = {p: p.read_bytes() for p in harness.run_scenario(cfg, workers=3).files}
    assert first == second


def test_seed_changes_output(tmp_path):
    a = harness.run_scenario(small_lti(tmp_path / "a"))
    b = harness.run_scenario(small_lti(tmp_path / "b", seed=5))
    ta = (tmp_path / "a" / "fig2" / "traces" / "point_00.csv").read_text().splitlines()[2:]
    tb = (tmp_path / "b" / "fig2" / "traces" / "point_00.csv").read_text().splitlines()[2:]
    assert ta != tb


def test_point_failures_are_recorded(tmp_path):
    cfg = small_lti(tmp_path, detection=DetectionParams(n_shots=2, sampling_period=20e-9))
    out = harness.run_scenario(cfg)
    assert not out.ok
    assert len(out.table.failures) == cfg.n_points
    assert all("ResolutionError" in r["error"] for r in out.table.rows)
    assert (tmp_path / "fig2" / "summary.json").exists()


def test_lti_engine_recovers_its_own_parameters(tmp_path):
    cfg = small_lti(tmp_path, detection=DetectionParams(n_shots=1, atom_fluct_rms=0.0, detector_noise_rms=0.0))
    table = harness.run_scenario(cfg).table
    np.testing.assert_allclose(table.column("fall"), table.column("fall_theory"), rtol=0.03)
    for i, r in enumerate(table.rows):
        k = harness.lti_kernel(cfg, i)
        assert r["integrated_phase"] == pytest.approx(k.phi0 * cfg.pulse(i).n_ph, rel=0.02)


def _table(cfg, integrated, fall=None):
    rows = []
    for i in range(cfg.n_points):
        r = harness._blank_row(cfg, i)
        r["integrated_phase"] = integrated[i]
        if fall is not None:
            r["fall"] = fall[i]
        rows.append(r)
    return harness.ResultTable(cfg, rows, harness.provenance(cfg))


def _plot_rows(text):
    lines = text.splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_plotdata_overlays():
    cfg = harness.get_preset("fig2")
    n_ph = cfg.pulse(0).n_ph
    delta = TWO_PI * np.array(cfg.windows_hz)
    c_true = 2.5e-2
    integrated = c_true * n_ph / delta * (1 - 2 * cfg.medium.gamma / delta)
    header, rows = _plot_rows(harness.export_plotdata(_table(cfg, integrated), "window"))
    assert "r2=1.0" in header or "r2=0.999" in header
    fits = np.array([float(r["integrated_fit"]) for r in rows])
    np.testing.assert_allclose(fits, integrated, rtol=1e-12)
    g0 = np.array([float(r["integrated_gamma0"]) for r in rows])
    np.testing.assert_allclose(g0 * delta, g0[0] * delta[0], rtol=1e-14)
    theory = float(rows[0]["fall_theory"])
    assert theory == pytest.approx(1.22e-6, rel=0.01)


def test_fit_coupling_const_r2():
    cfg = harness.get_preset("fig2")
    delta = TWO_PI * np.array(cfg.windows_hz)
    y = 3.0 / delta * (1 - 2 * cfg.medium.gamma / delta)
    c, r2 = harness.fit_coupling_const(cfg.windows_hz, y, 1.0, cfg.medium.gamma)
    assert c == pytest.approx(3.0, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_plotdata_tau_sweep_and_bad_kind():
    cfg = harness.get_preset("fig5")
    table = _table(cfg, np.ones(5), fall=np.full(5, 8e-7))
    header, rows = _plot_rows(harness.export_plotdata(table, "tau_s"))
    assert "kind=tau_s" in header
    assert [float(r["rise_identity"]) for r in rows] == list(cfg.tau_s)
    with pytest.raises(InvalidParameterError):
        harness.export_plotdata(table, "spectrum")


def test_result_table_invariants():
    cfg = harness.get_preset("fig2")
    with pytest.raises(InvalidParameterError):
        harness.ResultTable(cfg, [], harness.provenance(cfg))
    rows = [harness._blank_row(cfg, i) for i in range(cfg.n_points)]
    with pytest.raises(InvalidParameterError):
        harness.ResultTable(cfg, rows, {})


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv(harness.WORKERS_ENV, raising=False)
    assert harness.worker_count() == 1
    monkeypatch.setenv(harness.WORKERS_ENV, "4")
    assert harness.worker_count() == 4
    monkeypatch.setenv(harness.WORKERS_ENV, "zero")
    with pytest.raises(InvalidParameterError):
        harness.worker_count()
    monkeypatch.setenv(harness.WORKERS_ENV, "0")
    with pytest.raises(InvalidParameterError):
        harness.worker_count()


def test_trace_csv_round_trip(tmp_path):
    cfg = harness.get_preset("fig2")
    g = TimeGrid(-1e-6, 67e-9, 50)
    tr = PhaseTrace(g, np.sin(g.times * 1e6), stderr=np.full(50, 1e-4))
    path = tmp_path / "t.csv"
    path.write_text(harness.trace_csv(tr, cfg, 0))
    back = harness.read_trace_csv(path)
    np.testing.assert_allclose(back.phase, tr.phase, rtol=1e-11)
    np.testing.assert_allclose(back.stderr, tr.stderr, rtol=1e-11)
    assert back.grid.dt == pytest.approx(67e-9, rel=1e-9)


def test_read_trace_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,y\n0,1\n1,2\n")
    with pytest.raises(InvalidParameterError):
        harness.read_trace_csv(p)
    p.write_text("time_s,phase_rad,stderr_rad\n0,1,\n1,2,\n3,2,\n")
    with pytest.raises(InvalidParameterError):
        harness.read_trace_csv(p)


def test_engine_cross_check_weak_signal():
    cfg = harness.get_preset("validation-lti-vs-bloch").with_(windows_hz=(0.38e6, 4.0e6))
    rows = harness.compare_engines(cfg)
    for r in rows:
        assert r["error"] == ""
        assert r["rel_diff"] < 0.10
