import json

import numpy as np
import pytest

from kvn.errors import ConfigError
from kvn.scenarios import ScenarioConfig, bundled_path, run_scenario


def _load(name, **changes):
    raw = json.loads(bundled_path(name).read_text())
    raw.update(changes)
    return raw


def test_bundled_configs_parse():
    for name in ("cyclotron", "damped", "free", "harmonic", "projectile", "two_particle"):
        cfg = ScenarioConfig.from_dict(_load(name))
        assert cfg.name == name


def test_analytic_backend_matches_splitstep(tmp_path):
    raw = _load("harmonic", t_final=0.5)
    split = run_scenario(ScenarioConfig.from_dict(raw), tmp_path / "s")
    raw["backend"] = {"name": "analytic", "dt": 0.001}
    exact = run_scenario(ScenarioConfig.from_dict(raw), tmp_path / "a")
    assert np.max(np.abs(split.final.amplitudes - exact.final.amplitudes)) < 1e-4
    r = exact.series.positions[-1][0]
    assert r == pytest.approx(np.cos(0.5), abs=1e-8)


def test_momentum_run_without_vector_potential(tmp_path):
    raw = _load("harmonic", t_final=0.2)
    vel = run_scenario(ScenarioConfig.from_dict(raw), tmp_path / "v")
    raw["representation"] = "momentum"
    mom = run_scenario(ScenarioConfig.from_dict(raw), tmp_path / "m")
    assert mom.final.representation == "momentum"
    assert np.max(np.abs(vel.final.amplitudes - mom.final.amplitudes)) < 1e-12
    np.testing.assert_allclose(mom.series.velocities[-1], vel.series.velocities[-1], atol=1e-12)


def test_oracle_columns_follow_newton(tmp_path):
    res = run_scenario(ScenarioConfig.from_dict(_load("projectile", t_final=0.5)), tmp_path / "p")
    ref = res.series.reference[-1]
    assert ref[0] == pytest.approx(4.9 * 0.5 - 4.9 * 0.25, abs=1e-9)
    assert ref[1] == pytest.approx(4.9 - 9.8 * 0.5, abs=1e-9)


@pytest.mark.parametrize("changes, field", [
    ({"representation": "momentum"}, "representation"),
    ({"dynamics": {"kind": "two_particle", "masses": [1.0, 1.0], "forces": [{"name": "harmonic_coupling"}]},
      "grid": {"config_dim": 1, "points": [32, 32], "position_extent": [[-4, 4]], "velocity_extent": [[-4, 4]]},
      "packet": {"position": [0.0], "velocity": [0.0], "position_width": [0.5], "velocity_width": [0.5]}},
     "grid.config_dim"),
    ({"dynamics": {"kind": "two_particle", "masses": [1.0, -1.0], "forces": [{"name": "harmonic_coupling"}]}},
     "dynamics.mass"),
    ({"backend": {"name": "analytic", "dt": 0.01}}, "backend.name"),
])
def test_pair_config_errors(changes, field):
    raw = _load("two_particle")
    raw.update(changes)
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        ScenarioConfig.from_dict(raw)


def test_forced_parameter_checks():
    raw = _load("projectile")
    raw["dynamics"]["forces"] = [{"name": "uniform_gravity", "g": 9.8, "strength": 2}]
    with pytest.raises(ConfigError, match="strength"):
        ScenarioConfig.from_dict(raw)
    raw = _load("projectile")
    raw["dynamics"]["potentials"] = [{"name": "uniform_B"}]
    with pytest.raises(ConfigError, match="uniform_B needs config_dim 2"):
        ScenarioConfig.from_dict(raw)
