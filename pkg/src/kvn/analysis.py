"""Observables, Ehrenfest residuals and centroid-versus-trajectory checks."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AnalysisError
from .forces import ForceField, PotentialPair
from .grid import MOMENTUM, WavefunctionField, gaussian_packet
from .propagator import AnalyticScenario, FlowMap, PropagatorConfig, evolve

#: Allowed deviation of ``||psi||^2`` from one in :func:`expectation`.
NORM_TOLERANCE = 1e-6
#: Imaginary part tolerated (and discarded) in an expectation value.
IMAG_TOLERANCE = 1e-10
#: Minimal packet width, in grid cells, for the centroid-tracking check.
MIN_CELLS_PER_SIGMA = 3.0
#: Default sampling cadence (steps between series samples).
DEFAULT_CADENCE = 10


def _check_normalized(psi: WavefunctionField, tolerance: float) -> None:
    n2 = psi.norm() ** 2
    if abs(n2 - 1.0) > tolerance:
        raise AnalysisError(f"state is not normalized: ||psi||^2 = {n2:.12g}")


def _observable_values(grid, observable):
    if callable(observable):
        return np.asarray(observable(grid))
    if isinstance(observable, (str, int, np.integer)):
        return grid.coordinate(observable)
    return np.asarray(observable)


def expectation(psi: WavefunctionField, observable, norm_tolerance: float = NORM_TOLERANCE) -> float:
    """``<O> = sum O |psi|^2 dV`` for a multiplicative observable.

    ``observable`` is an axis name or index, a callable ``grid -> array``
    or an array broadcastable to the grid.
    """
    _check_normalized(psi, norm_tolerance)
    values = _observable_values(psi.grid, observable)
    dens = np.abs(psi.amplitudes) ** 2
    total = np.sum(values * dens) * psi.grid.cell_volume
    if np.iscomplexobj(total):
        if abs(total.imag) > IMAG_TOLERANCE:
            raise AnalysisError(f"observable is not Hermitian: imaginary part {total.imag:.3e}")
        total = total.real
    return float(total)


def variance(psi: WavefunctionField, axis) -> float:
    mean = expectation(psi, axis)
    return expectation(psi, lambda g: (g.coordinate(axis) - mean) ** 2)


def centroid(psi: WavefunctionField, norm_tolerance: float = NORM_TOLERANCE):
    """``(<R>, <V>)`` from the one-axis marginals of ``|psi|^2``."""
    _check_normalized(psi, norm_tolerance)
    grid = psi.grid
    dens = np.abs(psi.amplitudes) ** 2
    means = []
    for a in range(grid.ndim):
        others = tuple(b for b in range(grid.ndim) if b != a)
        marginal = dens.sum(axis=others)
        means.append(float(np.dot(marginal, grid.coords[a]) * grid.cell_volume))
    d = grid.config_dim
    return np.array(means[:d]), np.array(means[d:])


def kinetic_centroid(psi: WavefunctionField, potentials: PotentialPair | None = None, mass: float = 1.0):
    """``(<R>, <V>)`` for either representation; momentum fields use ``V = (p - A) / m``."""
    r, v = centroid(psi)
    if psi.representation == MOMENTUM and potentials is not None and potentials.has_vector_potential:
        grid = psi.grid
        pos = [grid.coordinate(a) for a in range(grid.config_dim)]
        A = potentials.A_values(pos)
        v = v - np.array([expectation(psi, lambda g, a=a: A[a]) for a in range(grid.config_dim)]) / mass
    return r, v


def mean_force(psi: WavefunctionField, force: ForceField) -> np.ndarray:
    """``<F(R, V)>`` on a velocity-representation field."""
    values = force.on_grid(psi.grid)
    return np.array([expectation(psi, f) for f in values])


def phase_residual(psi: WavefunctionField) -> float:
    """``max |Im psi| / max |psi|``: zero while the phase function stays zero."""
    peak = float(np.max(np.abs(psi.amplitudes)))
    return float(np.max(np.abs(psi.amplitudes.imag))) / peak if peak else 0.0


# ----------------------------------------------------------------------------
# time series


@dataclass
class ObservableSeries:
    """Centroids, norms and (optionally) mean forces sampled along a run.

    ``reference`` holds the Newtonian trajectory from the initial centroid
    when an oracle was attached (the ``x..., v...`` CSV columns).
    """

    axis_names: tuple
    times: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    forces: list = field(default_factory=list)
    reference: list = field(default_factory=list)

    @property
    def config_dim(self) -> int:
        return len(self.axis_names) // 2

    def append(self, t, norm, r, v, force=None, reference=None):
        t = float(t)
        if self.times and not t > self.times[-1]:
            raise AnalysisError(f"series times must increase strictly: {t} after {self.times[-1]}")
        vals = [norm, *np.ravel(r), *np.ravel(v)]
        if force is not None:
            vals += list(np.ravel(force))
        if not np.all(np.isfinite(vals)):
            raise AnalysisError(f"non-finite observable at t = {t}")
        self.times.append(t)
        self.norms.append(float(norm))
        self.positions.append(np.asarray(r, float))
        self.velocities.append(np.asarray(v, float))
        if force is not None:
            self.forces.append(np.asarray(force, float))
        if reference is not None:
            self.reference.append(np.asarray(reference, float))

    def record(self, psi: WavefunctionField, force: ForceField | None = None, mass: float = 1.0,
               potentials: PotentialPair | None = None, reference=None):
        # backend norm error is recorded in the norm column; observables use the normalized state
        norm = psi.norm()
        unit = psi.replace(psi.amplitudes / norm)
        r, v = kinetic_centroid(unit, potentials, mass)
        f = mean_force(unit, force) if force is not None and psi.representation != MOMENTUM else None
        self.append(psi.time, norm, r, v, f, reference)

    def arrays(self):
        return (np.array(self.times), np.array(self.norms), np.array(self.positions),
                np.array(self.velocities))

    @property
    def norm_drift(self) -> float:
        n = np.array(self.norms)
        return float(np.max(np.abs(n - n[0]))) if n.size else 0.0

    def header(self) -> list:
        d = self.config_dim
        pos, vel = self.axis_names[:d], self.axis_names[d:]
        cols = ["t"]
        if self.reference:
            cols += list(pos) + list(vel)
        cols += ["norm"] + [f"<{n}>" for n in pos] + [f"<{n}>" for n in vel]
        return cols

    def rows(self) -> list:
        out = []
        for k, t in enumerate(self.times):
            row = [t]
            if self.reference:
                row += list(self.reference[k])
            row += [self.norms[k], *self.positions[k], *self.velocities[k]]
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([repr(float(x)) for x in row])


def record_run(psi0: WavefunctionField, spec, config: PropagatorConfig, cadence: int = DEFAULT_CADENCE,
               force: ForceField | None = None, mass: float = 1.0, analytic: AnalyticScenario | None = None,
               oracle: bool = True, oracle_dt: float = 1e-3, on_sample: Callable | None = None):
    """Evolve ``psi0`` and sample the series every ``cadence`` steps (and at the end).

    With ``oracle`` and a ``force``, the Newtonian trajectory from the
    initial centroid is integrated alongside.  ``on_sample(step, psi)`` is
    called at every sample, including the initial state (step 0).
    """
    if cadence < 1:
        raise AnalysisError("cadence must be a positive number of steps")
    series = ObservableSeries(psi0.grid.axis_names)
    flow = FlowMap(force, mass, min(oracle_dt, config.dt)) if (oracle and force is not None) else None
    state = {"z": None, "t": psi0.time}

    def sample(step, psi):
        ref = None
        if flow is not None:
            if state["z"] is None:
                r, v = centroid(psi)
                state["z"] = list(r) + list(v)
            else:
                state["z"] = flow.forward(state["z"], psi.time - state["t"])
            state["t"] = psi.time
            ref = np.array([float(x) for x in state["z"]])
        series.record(psi, force, mass, reference=ref)
        if on_sample is not None:
            on_sample(step, psi)

    sample(0, psi0)

    def callback(step, psi):
        if step % cadence == 0 or step == config.n_steps:
            sample(step, psi)

    final = evolve(psi0, spec, config, scenario=analytic, callback=callback)
    return final, series


# ----------------------------------------------------------------------------
# Ehrenfest relations


@dataclass(frozen=True)
class EhrenfestReport:
    """Largest ``|d<R>/dt - <V>|`` and ``|d<V>/dt - <F>/m|`` over interior samples."""

    position: float
    velocity: float

    def passed(self, tolerance: float) -> bool:
        return self.position < tolerance and self.velocity < tolerance


def ehrenfest_residual(series: ObservableSeries, mass: float = 1.0) -> EhrenfestReport:
    """Second-order central differences of the sampled centroids.

    The series must be uniformly sampled, have at least three samples and
    carry mean forces (record it with a force).
    """
    t, _, r, v = series.arrays()
    if t.size < 3:
        raise AnalysisError(f"need at least 3 samples for central differences, got {t.size}")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise AnalysisError("series is not uniformly sampled")
    if len(series.forces) != t.size:
        raise AnalysisError("series carries no mean forces; record it with the force field")
    f = np.array(series.forces)
    dr = (r[2:] - r[:-2]) / (2 * h[0])
    dv = (v[2:] - v[:-2]) / (2 * h[0])
    pos = float(np.max(np.abs(dr - v[1:-1])))
    vel = float(np.max(np.abs(dv - f[1:-1] / mass)))
    return EhrenfestReport(pos, vel)


# ----------------------------------------------------------------------------
# centroid against the Newtonian trajectory


@dataclass(frozen=True)
class DeviationReport:
    """Phase-space distance between the packet centroid and the oracle trajectory."""

    scenario: str
    sigma: float
    times: tuple
    deviations: tuple

    @property
    def max_dev(self) -> float:
        return float(max(self.deviations))

    @property
    def t_of_max(self) -> float:
        return float(self.times[int(np.argmax(self.deviations))])

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "sigma": self.sigma, "max_dev": self.max_dev,
                "t_of_max": self.t_of_max}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def check_resolution(grid, sigma, min_cells: float = MIN_CELLS_PER_SIGMA) -> None:
    """Raise if a packet of width ``sigma`` spans fewer than ``min_cells`` cells on some axis."""
    sig = np.broadcast_to(np.asarray(sigma, float), (grid.ndim,))
    cells = sig / grid.spacing
    if np.any(cells < min_cells):
        a = int(np.argmin(cells))
        raise AnalysisError(
            f"sigma = {sig[a]:g} is under-resolved on axis {grid.axis_names[a]!r}: "
            f"{cells[a]:.2f} cells, need at least {min_cells:g}"
        )


def klimontovich_deviation(name: str, spec, center: Sequence, sigma, config: PropagatorConfig,
                           analytic: AnalyticScenario | None = None, oracle_dt: float = 1e-3,
                           record_every: int = 1) -> DeviationReport:
    """Track the centroid of a narrow packet against ``flow_oracle``.

    ``spec`` is a :class:`~kvn.liouvillian.LiouvillianSpec`; the packet has
    width ``sigma`` on every axis (a scalar, or one value per axis) and is
    centred at ``center = (r0, v0)``.  The duration is ``config.duration``.
    """
    grid = spec.grid
    check_resolution(grid, sigma)
    d = grid.config_dim
    sig = np.broadcast_to(np.asarray(sigma, float), (grid.ndim,))
    psi0 = gaussian_packet(grid, center, (sig[:d], sig[d:]))
    force = spec.force
    mass = spec.masses[0]
    r0, v0 = centroid(psi0)
    flow = FlowMap(force, mass, min(oracle_dt, config.dt))
    z = list(r0) + list(v0)
    times, devs = [0.0], [0.0]
    state = {"z": z, "t": 0.0}

    def callback(step, psi):
        if step % record_every and step != config.n_steps:
            return
        t = psi.time - psi0.time
        state["z"] = flow.forward(state["z"], t - state["t"])
        state["t"] = t
        r, v = centroid(psi)
        ref = np.array([float(x) for x in state["z"]])
        devs.append(float(np.linalg.norm(np.concatenate([r, v]) - ref)))
        times.append(t)

    evolve(psi0, spec, config, scenario=analytic, callback=callback)
    return DeviationReport(name, float(sig[0]) if np.all(sig == sig[0]) else tuple(sig), tuple(times), tuple(devs))
