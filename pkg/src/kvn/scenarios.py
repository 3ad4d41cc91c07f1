"""Scenario configuration files and the scenario runner.

A scenario is a JSON object::

    {
      "name": "projectile",
      "grid": {"config_dim": 1, "points": [128, 128],
               "position_extent": [[-16.0, 17.225]], "velocity_extent": [[-18.9, 18.9]],
               "axis_names": ["y", "vy"]},
      "packet": {"position": [0.0], "velocity": [4.9],
                 "position_width": [2.0], "velocity_width": [2.0]},
      "dynamics": {"kind": "forced", "mass": 1.0,
                   "forces": [{"name": "uniform_gravity", "g": 9.8}],
                   "potentials": []},
      "backend": {"name": "splitstep", "dt": 0.001},
      "t_final": 1.0,
      "cadence": 10,
      "snapshot_every": 0,
      "representation": "velocity"
    }

``dynamics.kind`` is ``free``, ``forced`` or ``two_particle`` (then
``masses`` replaces ``mass`` and the grid axes are ``x1, x2, v1, v2``).
Forces and potentials are named built-ins with numeric parameters.
``backend`` also accepts ``interpolation_order``, ``interpolation`` and
``foot_substeps``; ``analytic`` needs dynamics with a closed form (free,
uniform gravity, isotropic quadratic well).  ``cadence`` is the number of
steps between series samples; ``snapshot_every`` is the number of steps
between snapshots (0 writes the initial and final states only).
``output_dir`` is optional.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import DEFAULT_CADENCE, ObservableSeries
from .errors import ConfigError, PropagationError
from .forces import (
    ForceField,
    PotentialPair,
    force_from_potentials,
    harmonic_coupling,
    linear_drag,
    quadratic,
    uniform_B,
    uniform_gravity,
    zero_force,
)
from .grid import MOMENTUM, TWO_PARTICLE_AXIS_NAMES, VELOCITY, GridSpec, build_grid, gaussian_packet
from .interpolation import BSPLINE, LAGRANGE
from .liouvillian import FORCED, FREE, TWO_PARTICLE, LiouvillianSpec
from .propagator import (
    ANALYTIC,
    BACKENDS,
    SPLITSTEP,
    AnalyticScenario,
    FlowMap,
    PropagatorConfig,
    check_margin,
    evolve,
)
from .representations import evolve_momentum, to_momentum
from .snapshot import write_snapshot

_TOP_KEYS = {"name", "grid", "packet", "dynamics", "backend", "t_final", "cadence", "snapshot_every",
             "output_dir", "representation"}
_REQUIRED = ("name", "grid", "packet", "dynamics", "backend", "t_final")

#: Parameters accepted by each built-in, with defaults.
FORCE_PARAMS = {
    "uniform_gravity": {"g": 9.8, "axis": None},
    "linear_drag": {"gamma": 0.1},
    "harmonic_coupling": {"k": 1.0},
}
POTENTIAL_PARAMS = {
    "quadratic": {"k": 1.0, "center": 0.0},
    "uniform_B": {"B": 1.0},
}


def _require(obj, key, where):
    if key not in obj:
        raise ConfigError(f"{where}{key}", "is required")
    return obj[key]


def _number(value, field, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"must be a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(field, "must be finite")
    if positive and not value > 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(field, f"must be an integer, got {value!r}")
    return int(value) if integer else float(value)


def _vector(value, n, field):
    if np.isscalar(value):
        value = [value] * n
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(field, f"needs {n} entries, got {value!r}")
    return [_number(v, f"{field}[{i}]") for i, v in enumerate(value)]


def _builtin(entry, table, field, kind):
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(field, f"each {kind} needs a 'name'")
    name = entry["name"]
    if name not in table:
        raise ConfigError(f"{field}.name", f"unknown {kind} builtin {name!r}; known: {sorted(table)}")
    params = dict(table[name])
    for key, value in entry.items():
        if key == "name":
            continue
        if key not in params:
            raise ConfigError(f"{field}.{key}", f"unknown parameter for {name}")
        params[key] = value
    return name, params


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """A validated scenario (see the module docstring for the JSON schema)."""

    raw: dict
    name: str
    grid_spec: GridSpec
    center: tuple
    widths: tuple
    kind: str
    masses: tuple
    forces: tuple
    potentials: tuple
    propagator: PropagatorConfig
    t_final: float
    cadence: int
    snapshot_every: int
    representation: str
    output_dir: str | None

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config", "must be a JSON object")
        for key in raw:
            if key not in _TOP_KEYS:
                raise ConfigError(key, "unknown configuration key")
        for key in _REQUIRED:
            _require(raw, key, "")
        name = raw["name"]
        if not isinstance(name, str) or not name:
            raise ConfigError("name", "must be a nonempty string")

        g = raw["grid"]
        if not isinstance(g, dict):
            raise ConfigError("grid", "must be an object")
        d = _number(_require(g, "config_dim", "grid."), "grid.config_dim", integer=True)
        if d not in (1, 2):
            raise ConfigError("grid.config_dim", "must be 1 or 2")
        points = _require(g, "points", "grid.")
        points = [points] * (2 * d) if np.isscalar(points) else points
        points = [_number(p, f"grid.points[{i}]", positive=True, integer=True) for i, p in enumerate(points)]
        try:
            spec = GridSpec(d, tuple(points), _require(g, "position_extent", "grid."),
                            _require(g, "velocity_extent", "grid."), axis_names=g.get("axis_names"))
        except (ValueError, TypeError) as exc:
            raise ConfigError("grid", str(exc)) from exc

        p = raw["packet"]
        if not isinstance(p, dict):
            raise ConfigError("packet", "must be an object")
        r0 = _vector(_require(p, "position", "packet."), d, "packet.position")
        v0 = _vector(_require(p, "velocity", "packet."), d, "packet.velocity")
        sr = _vector(_require(p, "position_width", "packet."), d, "packet.position_width")
        sv = _vector(_require(p, "velocity_width", "packet."), d, "packet.velocity_width")
        if min(sr + sv) <= 0:
            raise ConfigError("packet", "widths must be positive")

        dyn = raw["dynamics"]
        if not isinstance(dyn, dict):
            raise ConfigError("dynamics", "must be an object")
        kind = dyn.get("kind", FORCED)
        if kind not in (FREE, FORCED, TWO_PARTICLE):
            raise ConfigError("dynamics.kind", f"must be one of free, forced, two_particle; got {kind!r}")
        if kind == TWO_PARTICLE:
            if d != 2:
                raise ConfigError("grid.config_dim", "two_particle dynamics needs config_dim 2")
            if g.get("axis_names") is None:
                spec = GridSpec(d, spec.points_per_axis, spec.position_extent, spec.velocity_extent,
                                axis_names=TWO_PARTICLE_AXIS_NAMES)
            elif tuple(g["axis_names"]) != TWO_PARTICLE_AXIS_NAMES:
                raise ConfigError("grid.axis_names", f"two_particle grids use {TWO_PARTICLE_AXIS_NAMES}")
            masses = tuple(_vector(dyn.get("masses", [1.0, 1.0]), 2, "dynamics.masses"))
        else:
            masses = (_number(dyn.get("mass", 1.0), "dynamics.mass"),) * d
        if min(masses) <= 0:
            raise ConfigError("dynamics.mass", "masses must be positive")
        forces = tuple(_builtin(e, FORCE_PARAMS, f"dynamics.forces[{i}]", "force")
                       for i, e in enumerate(dyn.get("forces", [])))
        pots = tuple(_builtin(e, POTENTIAL_PARAMS, f"dynamics.potentials[{i}]", "potential")
                     for i, e in enumerate(dyn.get("potentials", [])))
        if kind == FREE and (forces or pots):
            raise ConfigError("dynamics.kind", "free dynamics takes no forces or potentials")
        for i, (fname, _) in enumerate(forces):
            if (fname == "harmonic_coupling") != (kind == TWO_PARTICLE):
                raise ConfigError(f"dynamics.forces[{i}].name",
                                  "harmonic_coupling is the two_particle force and only applies there")
        for i, (pname, _) in enumerate(pots):
            if pname == "uniform_B" and d != 2:
                raise ConfigError(f"dynamics.potentials[{i}].name", "uniform_B needs config_dim 2")
        for key in dyn:
            if key not in ("kind", "mass", "masses", "forces", "potentials"):
                raise ConfigError(f"dynamics.{key}", "unknown key")

        b = raw["backend"]
        if not isinstance(b, dict):
            raise ConfigError("backend", "must be an object")
        bname = _require(b, "name", "backend.")
        if bname not in BACKENDS:
            raise ConfigError("backend.name", f"must be one of {BACKENDS}, got {bname!r}")
        dt = _number(_require(b, "dt", "backend."), "backend.dt")
        if not dt > 0:
            raise ConfigError("backend.dt", f"dt must be positive, got {dt!r}")
        order = _number(b.get("interpolation_order", 3), "backend.interpolation_order", integer=True)
        interp = b.get("interpolation", BSPLINE)
        if interp not in (BSPLINE, LAGRANGE):
            raise ConfigError("backend.interpolation", f"must be {BSPLINE!r} or {LAGRANGE!r}")
        substeps = _number(b.get("foot_substeps", 1), "backend.foot_substeps", positive=True, integer=True)
        for key in b:
            if key not in ("name", "dt", "interpolation_order", "interpolation", "foot_substeps"):
                raise ConfigError(f"backend.{key}", "unknown key")
        t_final = _number(raw["t_final"], "t_final", positive=True)
        n_steps = int(round(t_final / dt))
        if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
            raise ConfigError("t_final", f"must be a positive multiple of dt = {dt:g}")
        try:
            prop = PropagatorConfig(bname, dt, n_steps, order, interp, substeps)
        except ValueError as exc:
            raise ConfigError("backend", str(exc)) from exc

        cadence = _number(raw.get("cadence", DEFAULT_CADENCE), "cadence", positive=True, integer=True)
        snap = _number(raw.get("snapshot_every", 0), "snapshot_every", integer=True)
        if snap < 0:
            raise ConfigError("snapshot_every", "must be >= 0")
        rep = raw.get("representation", VELOCITY)
        if rep not in (VELOCITY, MOMENTUM):
            raise ConfigError("representation", f"must be {VELOCITY!r} or {MOMENTUM!r}")
        out = raw.get("output_dir")
        if out is not None and not isinstance(out, str):
            raise ConfigError("output_dir", "must be a string")

        cfg = cls(raw, name, spec, (tuple(r0), tuple(v0)), (tuple(sr), tuple(sv)), kind, masses, forces, pots,
                  prop, t_final, cadence, snap, rep, out)
        cfg._check_backend()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(raw)

    # -- derived objects ---------------------------------------------------

    @property
    def config_dim(self) -> int:
        return self.grid_spec.config_dim

    def potential_pair(self) -> PotentialPair:
        d = self.config_dim
        parts = []
        for name, params in self.potentials:
            if name == "quadratic":
                parts.append(quadratic(d, float(params["k"]), params["center"]))
            else:
                parts.append(uniform_B(float(params["B"])))
        phis = [p.phi for p in parts if p.phi is not None]
        As = [p.A for p in parts if p.A is not None]
        phi = None
        if phis:
            phi = (lambda fs: (lambda *r: sum(f(*r) for f in fs)))(phis)
        A = None
        if As:
            A = tuple((lambda comps: (lambda *r: sum(c(*r) for c in comps)))([a[i] for a in As]) for i in range(d))
        label = " + ".join(p.label for p in parts) or "none"
        return PotentialPair(d, phi=phi, A=A, label=label)

    def force_field(self) -> ForceField:
        d = self.config_dim
        total = zero_force(d)
        for name, params in self.forces:
            if name == "uniform_gravity":
                axis = params["axis"]
                total = total + uniform_gravity(d, float(params["g"]), self.masses[0],
                                                None if axis is None else int(axis))
            elif name == "linear_drag":
                total = total + linear_drag(d, float(params["gamma"]))
            else:
                total = total + harmonic_coupling(float(params["k"]))
        if self.potentials:
            total = total + force_from_potentials(self.potential_pair())
        return total

    def liouvillian(self) -> LiouvillianSpec:
        grid = build_grid(self.grid_spec)
        if self.kind == FREE:
            return LiouvillianSpec.free(grid)
        force = self.force_field()
        if self.kind == TWO_PARTICLE:
            f1, f2 = (ForceField((c,), force.depends_on_velocity, True, force.label) for c in force.components)
            return LiouvillianSpec.two_particle(grid, f1, f2, *self.masses)
        return LiouvillianSpec.forced(grid, force, self.masses[0])

    def analytic_scenario(self) -> AnalyticScenario | None:
        """Closed form matching the dynamics, or ``None``."""
        if self.kind == FREE:
            return AnalyticScenario("free")
        if self.kind != FORCED:
            return None
        if len(self.forces) == 1 and not self.potentials and self.forces[0][0] == "uniform_gravity":
            params = self.forces[0][1]
            axis = params["axis"]
            return AnalyticScenario("projectile", g=float(params["g"]),
                                    gravity_axis=None if axis is None else int(axis))
        if len(self.potentials) == 1 and not self.forces and self.potentials[0][0] == "quadratic":
            params = self.potentials[0][1]
            if np.all(np.asarray(params["center"], float) == 0):
                return AnalyticScenario("harmonic", omega=float(np.sqrt(float(params["k"]) / self.masses[0])))
        return None

    def _check_backend(self):
        name = self.propagator.backend
        if name == ANALYTIC and self.analytic_scenario() is None:
            raise ConfigError("backend.name", "no closed form for these dynamics; use splitstep or semilagrangian")
        if name == SPLITSTEP and any(n == "linear_drag" for n, _ in self.forces):
            raise ConfigError("backend.name", "split-step needs a velocity-independent force")
        if name == SPLITSTEP and any(n == "uniform_B" for n, _ in self.potentials):
            raise ConfigError("backend.name", "split-step needs a velocity-independent force")
        if self.representation == MOMENTUM:
            if self.kind == TWO_PARTICLE:
                raise ConfigError("representation", "the momentum representation is for one particle")
            has_A = any(n == "uniform_B" for n, _ in self.potentials)
            if name == ANALYTIC or (name == SPLITSTEP and has_A):
                raise ConfigError("representation", f"the {name} backend is not available for momentum runs")

    def output_path(self, override=None) -> Path:
        base = override or self.output_dir or os.environ.get("KVN_OUT_DIR") or "kvn_out"
        return Path(base)


def bundled_scenarios() -> list:
    """Names of the scenario files shipped with the package."""
    root = resources.files("kvn") / "data" / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    return resources.files("kvn") / "data" / "scenarios" / f"{name}.json"


# ----------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class RunResult:
    series: ObservableSeries
    final: object
    manifest: dict
    directory: Path


def _versions() -> dict:
    import numba
    import scipy

    return {"kvn": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def run_scenario(cfg: ScenarioConfig, out_dir=None, threads: int | None = None, log=None) -> RunResult:
    """Evolve the scenario and write ``series.csv``, snapshots and ``manifest.json``."""
    start = time.perf_counter()
    directory = cfg.output_path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    spec = cfg.liouvillian()
    grid = spec.grid
    force = spec.force
    psi0 = gaussian_packet(grid, cfg.center, cfg.widths)
    potentials = cfg.potential_pair()
    momentum = cfg.representation == MOMENTUM
    if momentum:
        psi0 = to_momentum(psi0, potentials, cfg.masses[0])
    prop = cfg.propagator
    masses = np.array(cfg.masses)

    series = ObservableSeries(grid.axis_names)
    oracle = FlowMap(force, masses, min(prop.dt, 1e-3))
    r0, v0 = (np.array(x, float) for x in cfg.center)
    state = {"z": list(r0) + list(v0), "t": 0.0}
    snapshots = []

    def snapshot(step, psi):
        fname = f"snapshot_{step:07d}.kvnf"
        write_snapshot(directory / fname, psi)
        snapshots.append({"file": fname, "step": step, "time": psi.time})

    def sample(step, psi):
        # spectral backends wrap silently at the periodic boundary; catch it at every sample
        check_margin(psi)
        state["z"] = oracle.forward(state["z"], psi.time - state["t"])
        state["t"] = psi.time
        ref = np.array([float(x) for x in state["z"]])
        series.record(psi, None if momentum else force, masses, potentials if momentum else None, ref)

    def callback(step, psi):
        if not np.all(np.isfinite(psi.amplitudes)):
            raise PropagationError(f"non-finite amplitudes at step {step}")
        if step % cfg.cadence == 0 or step == prop.n_steps:
            sample(step, psi)
        if (cfg.snapshot_every and step % cfg.snapshot_every == 0) or step == prop.n_steps:
            snapshot(step, psi)
        if log is not None and step % max(1, prop.n_steps // 10) == 0:
            log(f"step {step}/{prop.n_steps}  t = {psi.time:.6g}  norm = {psi.norm():.15f}")

    sample(0, psi0)
    snapshot(0, psi0)
    if momentum:
        final = evolve_momentum(psi0, potentials, force, prop, cfg.masses[0], callback)
    else:
        final = evolve(psi0, spec, prop, scenario=cfg.analytic_scenario(), callback=callback)
    series.to_csv(directory / "series.csv")
    r_end, v_end = series.positions[-1], series.velocities[-1]
    manifest = {
        "config": cfg.raw,
        "versions": _versions(),
        "threads": threads,
        "steps": prop.n_steps,
        "dt": prop.dt,
        "t_final": final.time,
        "norm_initial": series.norms[0],
        "norm_final": series.norms[-1],
        "norm_drift": series.norm_drift,
        "final_centroid": {"position": list(map(float, r_end)), "velocity": list(map(float, v_end))},
        "series": "series.csv",
        "snapshots": snapshots,
        "wall_time_s": time.perf_counter() - start,
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return RunResult(series, final, manifest, directory)
