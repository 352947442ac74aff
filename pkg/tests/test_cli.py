import json

import pytest

from polburst.cli import main
from polburst.config import ConfigError, resolve, sweep_points


def _body(path):
    return path.read_text()


def test_malformed_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cavity": {"cooperativity": 10, "kappa": -2}}))
    assert main(["rb-vstirap-sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "cavity.kappa" in capsys.readouterr().err


def test_bad_json_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "scheme": "rb_d1",\n  oops\n}')
    assert main(["rb-reprep", "--config", str(cfg)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_validation_errors_name_fields():
    with pytest.raises(ConfigError, match="stirap.n"):
        resolve("rb-reprep", {"stirap": {"n": 12}})
    with pytest.raises(ConfigError, match="sweep.axes"):
        resolve("rb-reprep", {"sweep": {"axes": [{"name": "T", "values": []}]}})
    with pytest.raises(ConfigError, match="scheme"):
        resolve("ideal-reprep-sweep", {"scheme": "rb_d1"})
    with pytest.raises(ConfigError, match="cavity"):
        resolve("rb-vstirap-sweep", {"cavity": {"g": 1.0, "cooperativity": 3, "kappa": 1}})


def test_presets_resolve():
    cfg = resolve("rb-pumping", {"scheme": "rb_d2", "pumping": "pumping-d2"})
    assert cfg["pumping"]["omega1"] == 57.5
    cfg = resolve("rb-vstirap-sweep", {"cavity": {"g": 11.0}})
    assert cfg["cavity"] == {"g": 11.0, "kappa": 2.0}


def test_sweep_points_order():
    cfg = {"sweep": {"axes": [{"name": "a", "values": [1, 2]}, {"name": "b", "start": 0, "stop": 1, "steps": 3}]}}
    pts = sweep_points(cfg)
    assert [(p["a"], p["b"]) for p in pts] == [(1, 0.0), (1, 0.5), (1, 1.0), (2, 0.0), (2, 0.5), (2, 1.0)]


def test_reprep_csv_and_manifest(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep": {"axes": [{"name": "omega", "values": [30.0, 41.0]}]}}))
    out = tmp_path / "o"
    assert main(["rb-reprep", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "rb-reprep.csv").read_text().strip().split("\n")
    assert lines[0] == "T_us,omega_mhz,n,a,efficiency"
    assert len(lines) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["conversions"]["mhz_per_gauss"] == 0.7
    assert man["config"]["stirap"]["n"] == 6
    assert "generated_at" in man
    assert (out / "envelopes.csv").read_text().startswith("t_us,omega_s_mhz,omega_p_mhz")


def test_determinism_with_jobs(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep": {"axes": [{"name": "mF", "values": [0, -1, 2]}]}}))
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["rb-vstirap-sweep", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["rb-vstirap-sweep", "--config", str(cfg), "--out", str(b)]) == 0
    assert main(["rb-vstirap-sweep", "--config", str(cfg), "--out", str(c), "--jobs", "3"]) == 0
    name = "rb-vstirap-sweep.csv"
    assert _body(a / name) == _body(b / name) == _body(c / name)


def test_bfield_scan_header(tmp_path):
    out = tmp_path / "o"
    assert main(["bfield-scan", "--set", 'sweep.axes=[{"name": "gauss", "values": [0, 1]}]', "--out", str(out)]) == 0
    lines = (out / "bfield-scan.csv").read_text().strip().split("\n")
    assert lines[0] == "splitting_mhz,field_G,phase_rad,coherence,p_H,p_pi"
    assert lines[2].startswith("0.7,1,")


def test_burst_verb(tmp_path):
    out = tmp_path / "o"
    assert main(["rb-burst", "--mode", "incoherent", "--n", "2", "--out", str(out)]) == 0
    rep = json.loads((out / "burst.json").read_text())
    assert rep["mode"] == "incoherent" and len(rep["cumulative_eff"]) == 2
    assert (out / "rb-burst.csv").read_text().startswith("n,p_H,p_pi,cumulative_eff,coincidence_rate_hz")


def test_simulation_failure_exits_1(tmp_path, capsys):
    # a stirap target level the scheme lacks is caught only when the physics is assembled
    out = tmp_path / "o"
    code = main(["rb-vstirap-sweep", "--set", "cavity.fock_dim=2", "--set", "pulse.T=0.5",
                 "--set", 'sweep.axes=[{"name": "mF", "values": [5]}]', "--out", str(out)])
    assert code == 1
    assert "simulation failed" in capsys.readouterr().err
