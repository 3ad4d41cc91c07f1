import csv
import json

import pytest

from kvn.cli import EXIT_CONFIG, EXIT_IDENTITY_FAILED, EXIT_NUMERICAL, EXIT_OK, main
from kvn.scenarios import bundled_path, bundled_scenarios


def _projectile(**changes):
    raw = json.loads(bundled_path("projectile").read_text())
    for key, value in changes.items():
        raw[key] = value
    return raw


def _write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def _series(directory):
    with open(directory / "series.csv") as fh:
        return list(csv.DictReader(fh))


def test_bundled_scenarios_listed():
    assert set(bundled_scenarios()) == {"cyclotron", "damped", "free", "harmonic", "projectile", "two_particle"}


def test_projectile_run(tmp_path):
    out = tmp_path / "out"
    code = main(["--quiet", "run", str(bundled_path("projectile")), "--out", str(out)])
    assert code == EXIT_OK
    rows = _series(out)
    last = rows[-1]
    assert float(last["t"]) == pytest.approx(1.0)
    # y0 + v0 t - g t^2 / 2 with y0 = 0, v0 = 4.9, g = 9.8
    assert float(last["<y>"]) == pytest.approx(0.0, abs=1e-4)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["name"] == "projectile"
    assert {"versions", "norm_drift", "wall_time_s", "snapshots"} <= set(manifest)
    assert manifest["norm_drift"] < 1e-12
    for snap in manifest["snapshots"]:
        assert (out / snap["file"]).exists()


def test_reruns_are_bit_identical(tmp_path):
    cfg = _write(tmp_path, _projectile(t_final=0.05))
    main(["--quiet", "--threads", "1", "run", cfg, "--out", str(tmp_path / "a")])
    main(["--quiet", "--threads", "1", "run", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


def test_nonpositive_dt(tmp_path, capsys):
    for dt in (0.0, -0.001):
        raw = _projectile()
        raw["backend"] = {"name": "splitstep", "dt": dt}
        assert main(["--quiet", "run", _write(tmp_path, raw), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "dt" in capsys.readouterr().err


def test_unknown_force_builtin(tmp_path, capsys):
    raw = _projectile()
    raw["dynamics"]["forces"] = [{"name": "antigravity"}]
    assert main(["--quiet", "run", _write(tmp_path, raw)]) == EXIT_CONFIG
    assert "dynamics.forces[0].name" in capsys.readouterr().err


@pytest.mark.parametrize("mutate, field", [
    (lambda r: r.pop("grid"), "grid"),
    (lambda r: r.update(cadence=0), "cadence"),
    (lambda r: r.update(t_final=0.0015), "t_final"),
    (lambda r: r.update(colour="red"), "colour"),
    (lambda r: r["backend"].update(name="leapfrog"), "backend.name"),
    (lambda r: r["dynamics"]["forces"].append({"name": "linear_drag"}), "backend.name"),
])
def test_invalid_configs_name_the_field(tmp_path, capsys, mutate, field):
    raw = _projectile()
    mutate(raw)
    assert main(["--quiet", "run", _write(tmp_path, raw)]) == EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    assert main(["--quiet", "run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--quiet", "run", str(bad)]) == EXIT_CONFIG


def test_margin_breach_exits_3(tmp_path, capsys):
    raw = {
        "name": "runaway",
        "grid": {"config_dim": 1, "points": [64, 64], "position_extent": [[-4.0, 4.0]],
                 "velocity_extent": [[-4.5, 4.5]]},
        "packet": {"position": [0.0], "velocity": [2.0], "position_width": [0.5], "velocity_width": [0.4]},
        "dynamics": {"kind": "free"},
        "backend": {"name": "splitstep", "dt": 0.01},
        "t_final": 2.0,
    }
    assert main(["--quiet", "run", _write(tmp_path, raw), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
    assert "boundary" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KVN_OUT_DIR", str(tmp_path / "env"))
    assert main(["--quiet", "run", _write(tmp_path, _projectile(t_final=0.01))]) == EXIT_OK
    assert (tmp_path / "env" / "series.csv").exists()


def test_bad_arguments():
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["verify", "--grid", "48"]) == EXIT_CONFIG


def _verify(tmp_path, *extra):
    out = tmp_path / "verify"
    code = main(["--quiet", "verify", "--out", str(out), *extra])
    with open(out / "verify.csv") as fh:
        rows = list(csv.DictReader(fh))
    return code, rows


def test_verify_default(tmp_path):
    code, rows = _verify(tmp_path)
    assert code == EXIT_OK
    assert list(rows[0]) == ["identity_id", "state_index", "residual", "tolerance", "pass"]
    assert all(r["pass"] == "pass" for r in rows)
    ids = {r["identity_id"] for r in rows}
    assert any(i.startswith("algebra.") for i in ids) and any(i.startswith("galilei.") for i in ids)
    assert len(ids) >= 40


def test_verify_coarse_grid(tmp_path):
    code, rows = _verify(tmp_path, "--grid", "32")
    assert code == EXIT_OK
    assert all(r["pass"] == "pass" for r in rows)


def test_verify_catches_broken_lambda(tmp_path):
    code, rows = _verify(tmp_path, "--break-lambda-sign")
    assert code == EXIT_IDENTITY_FAILED
    failing = {r["identity_id"] for r in rows if r["pass"] == "fail"}
    assert "algebra.Xlambda[x]" in failing
