"""Time evolution ``psi(t) = exp(-i t L) psi(0)`` and the trajectory oracle.

Three backends are available:

``analytic``
    Closed forms for the free particle, uniform gravity and the harmonic
    oscillator, realized by exact spectral shifts and shears.
``splitstep``
    Strang splitting of ``V.lambda_x`` (a shear in position) and
    ``F(x).lambda_v / m`` (a shear in velocity) for velocity-independent
    forces.  Every substep is an exact spectral shift, hence unitary.
``semilagrangian``
    Backward characteristics from a 4th-order Runge-Kutta integrator and
    tensor-product interpolation at their feet.  Handles any force.  For
    compressible flows (for example drag) the update carries the
    half-density factor ``exp(-1/2 * integral of div u)`` along the
    characteristic, which keeps the continuum scheme norm preserving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import spectral
from .errors import ForceError, MarginError, PropagationError
from .forces import ForceField, PotentialPair, vertical_axis
from .grid import MOMENTUM, VELOCITY, WavefunctionField
from .interpolation import BSPLINE, FactorizedInterpolator, Interpolator, stencil_offsets
from .liouvillian import LiouvillianSpec

ANALYTIC = "analytic"
SPLITSTEP = "splitstep"
SEMILAGRANGIAN = "semilagrangian"
BACKENDS = (ANALYTIC, SPLITSTEP, SEMILAGRANGIAN)

#: Relative amplitude allowed on the boundary band before a margin error.
MARGIN_TOLERANCE = 1e-2


@dataclass(frozen=True)
class PropagatorConfig:
    """Backend choice and step control.

    ``foot_substeps`` splits the characteristic integration over one step
    into that many RK4 substeps (semi-Lagrangian only).
    """

    backend: str
    dt: float
    n_steps: int
    interpolation_order: int = 3
    interpolation: str = BSPLINE
    foot_substeps: int = 1

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        stencil_offsets(self.interpolation_order, self.interpolation)
        if self.foot_substeps < 1:
            raise ValueError("foot_substeps must be >= 1")

    @property
    def duration(self) -> float:
        return self.dt * self.n_steps


# ----------------------------------------------------------------------------
# shared helpers


def _shear(values, grid, axis, amount):
    return spectral.translate(values, grid, axis, amount)


def edge_amplitude(values: np.ndarray, band: Sequence[int]) -> float:
    """Largest |amplitude| within ``band[a]`` cells of each boundary, relative to the peak."""
    peak = float(np.max(np.abs(values)))
    if peak == 0:
        return 0.0
    worst = 0.0
    for a, w in enumerate(band):
        w = int(w)
        if w <= 0:
            continue
        lo = np.take(values, range(w), axis=a)
        hi = np.take(values, range(values.shape[a] - w, values.shape[a]), axis=a)
        worst = max(worst, float(np.max(np.abs(lo))), float(np.max(np.abs(hi))))
    return worst / peak


def check_margin(psi: WavefunctionField, band=2, tolerance: float = MARGIN_TOLERANCE) -> None:
    """Raise :class:`MarginError` if the state reaches the boundary band."""
    bands = [band] * psi.grid.ndim if np.isscalar(band) else list(band)
    rel = edge_amplitude(psi.amplitudes, bands)
    if rel > tolerance:
        raise MarginError(
            f"state amplitude {rel:.2e} (relative) within the boundary band; enlarge the domain"
        )


# ----------------------------------------------------------------------------
# analytic backend


@dataclass(frozen=True)
class AnalyticScenario:
    """A closed-form dynamics: ``free``, ``projectile`` or ``harmonic``.

    ``gravity_axis`` selects the position axis along which gravity acts
    (default: ``y``, or the only axis in one dimension).
    """

    kind: str
    g: float = 9.8
    omega: float = 1.0
    gravity_axis: int | None = None

    def __post_init__(self):
        if self.kind not in ("free", "projectile", "harmonic"):
            raise ValueError(f"unknown analytic scenario {self.kind!r}")
        if self.kind == "harmonic" and not self.omega > 0:
            raise ValueError("harmonic scenario needs omega > 0")


def evolve_analytic(scenario: AnalyticScenario, state, t: float):
    """Evolve a field, or a ket label ``(r, v)``, by the closed form.

    Labels move forward along the trajectory, fields are pulled back:
    ``psi(z, t) = psi0(Phi_{-t}(z))``.
    """
    if isinstance(scenario, str):
        scenario = AnalyticScenario(scenario)
    if isinstance(state, WavefunctionField):
        return _analytic_field(scenario, state, t)
    r, v = (np.array(x, dtype=float) for x in state)
    if scenario.kind == "free":
        return r + v * t, v.copy()
    if scenario.kind == "projectile":
        j = np.zeros_like(r)
        j[vertical_axis(len(r)) if scenario.gravity_axis is None else scenario.gravity_axis] = 1.0
        return r + v * t - 0.5 * scenario.g * t**2 * j, v - scenario.g * t * j
    w = scenario.omega
    c, s = np.cos(w * t), np.sin(w * t)
    return r * c + v / w * s, -w * r * s + v * c


def _analytic_field(scenario, psi, t):
    grid = psi.grid
    d = grid.config_dim
    a = psi.amplitudes
    if scenario.kind in ("free", "projectile"):
        if scenario.kind == "projectile":
            axis = vertical_axis(d) if scenario.gravity_axis is None else scenario.gravity_axis
            a = _shear(a, grid, d + axis, -scenario.g * t)
        for i in range(d):
            a = _shear(a, grid, i, grid.coordinate(d + i) * t)
        if scenario.kind == "projectile":
            a = _shear(a, grid, axis, 0.5 * scenario.g * t**2)
    else:
        for i in range(d):
            # phase-space flow turns (x, v / omega) clockwise by omega t
            a = spectral.rotate(a, grid, i, d + i, -scenario.omega * t, scenario.omega)
    return psi.replace(a, time=psi.time + t)


# ----------------------------------------------------------------------------
# split-step backend


def evolve_splitstep(psi: WavefunctionField, spec: LiouvillianSpec, config: PropagatorConfig,
                     callback: Callable | None = None) -> WavefunctionField:
    """Strang splitting: half kick, drift, half kick.

    ``callback(step, field)`` is called after every step when given.
    """
    if spec.force.depends_on_velocity:
        raise ForceError("split-step needs a velocity-independent force; use the semilagrangian backend")
    grid = spec.grid
    d = grid.config_dim
    dt = config.dt
    kicks = [] if spec.is_free else [f / m for f, m in zip(spec.force.on_grid(grid), spec.masses)]
    # velocity-independent: keep one sample along the velocity axes
    vel0 = (slice(None),) * d + (slice(0, 1),) * d
    kicks = [np.broadcast_to(k, grid.shape)[vel0] for k in kicks]
    drifts = [grid.coordinate(d + i) * dt for i in range(d)]

    def kick(a, tau):
        for i, acc in enumerate(kicks):
            if np.any(acc):
                a = _shear(a, grid, d + i, acc * tau)
        return a

    def drift(a):
        for i in range(d):
            a = _shear(a, grid, i, drifts[i])
        return a

    a = psi.amplitudes
    # every shear maps real arrays to real arrays; real data takes the real-transform path
    if not np.any(a.imag):
        a = a.real
    t0 = psi.time
    for n in range(config.n_steps):
        a = kick(a, 0.5 * dt)
        a = drift(a)
        a = kick(a, 0.5 * dt)
        if callback is not None:
            callback(n + 1, psi.replace(a, time=t0 + (n + 1) * dt))
    return psi.replace(a, time=t0 + config.n_steps * dt)


# ----------------------------------------------------------------------------
# characteristic flows


@dataclass(frozen=True, eq=False)
class PhaseFlow:
    """Phase-space velocity field ``u(z)`` of a first-order Liouvillian.

    ``velocity`` maps a list of 2d coordinate arrays to 2d arrays;
    ``divergence`` maps the same input to ``div u``.  When
    ``accel_position_independent`` is true the last d components of ``u``
    depend on velocity coordinates only.
    """

    config_dim: int
    velocity: Callable
    divergence: Callable
    accel_position_independent: bool = False
    label: str = "flow"


def velocity_flow(spec: LiouvillianSpec) -> PhaseFlow:
    """Characteristics of ``L`` in the velocity representation."""
    d = spec.grid.config_dim
    force = spec.force
    masses = np.array(spec.masses)

    def u(z):
        r, v = list(z[:d]), list(z[d:])
        f = force(r, v)
        return list(v) + [fa / m for fa, m in zip(f, masses)]

    def div(z):
        r, v = list(z[:d]), list(z[d:])
        return force.velocity_divergence(r, v, masses)

    return PhaseFlow(d, u, div, not force.depends_on_position or not _samples_position(force), force.label)


def _samples_position(force: ForceField, samples: int = 16, seed: int = 3) -> bool:
    """True if the force changes when only positions are perturbed at random points."""
    d = force.config_dim
    rng = np.random.default_rng(seed)
    r = list(rng.uniform(-1, 1, size=(d, samples)))
    v = list(rng.uniform(-1, 1, size=(d, samples)))
    r2 = [x + rng.uniform(0.5, 1.5, size=samples) for x in r]
    a, b = force(r, v), force(r2, v)
    return any(np.max(np.abs(x - y)) > 1e-13 * (1 + np.max(np.abs(x))) for x, y in zip(a, b))


def momentum_flow(potentials: PotentialPair, total_force: ForceField, mass: float = 1.0) -> PhaseFlow:
    """Characteristics of the momentum-representation Liouvillian.

    The grid's last d axes carry ``p / m``.  With ``V = (p - A(r)) / m``::

        dr/dt = V,    dp/dt = F(r, V) + (V . grad) A
    """
    d = potentials.config_dim

    def parts(z):
        r = list(z[:d])
        p = [mass * x for x in z[d:]]
        A = potentials.A_values(r)
        V = [(pa - aa) / mass for pa, aa in zip(p, A)]
        return r, p, A, V

    def u(z):
        r, p, A, V = parts(z)
        f = total_force(r, V)
        dA = potentials.grad_A(r)
        dp = [f[b] + sum(V[a] * dA[a][b] for a in range(d)) for b in range(d)]
        return list(V) + [x / mass for x in dp]

    def div(z):
        # d(dr_a/dt)/dr_a = -div A / m cancels the A-term of d(dp_b/dt)/dp_b, so
        # only the velocity divergence of the force survives
        r, p, A, V = parts(z)
        return total_force.velocity_divergence(r, V, [mass] * d)

    # without A the flow is the velocity flow with p = m v
    factorizable = not potentials.has_vector_potential and (
        not total_force.depends_on_position or not _samples_position(total_force))
    return PhaseFlow(d, u, div, factorizable, f"momentum[{potentials.label}]")


def rk4_characteristics(flow: PhaseFlow, z: Sequence[np.ndarray], duration: float, substeps: int = 1,
                        with_divergence: bool = False):
    """Integrate ``dz/ds = u(z)`` over ``duration`` (negative = backward).

    Returns the end points and, optionally, ``integral of div u ds`` along
    the path (signed with the direction of integration).
    """
    h = duration / substeps
    z = [np.array(x, dtype=float) for x in z]
    shape = np.broadcast_shapes(*(x.shape for x in z))
    z = [np.broadcast_to(x, shape).copy() for x in z]
    acc = np.zeros(shape)

    def f(y):
        return [np.broadcast_to(np.asarray(x, float), shape) for x in flow.velocity(y)]

    def g(y):
        return np.broadcast_to(np.asarray(flow.divergence(y), float), shape)

    for _ in range(substeps):
        k1 = f(z)
        y2 = [a + 0.5 * h * b for a, b in zip(z, k1)]
        k2 = f(y2)
        y3 = [a + 0.5 * h * b for a, b in zip(z, k2)]
        k3 = f(y3)
        y4 = [a + h * b for a, b in zip(z, k3)]
        k4 = f(y4)
        if with_divergence:
            acc = acc + h / 6.0 * (g(z) + 2 * g(y2) + 2 * g(y3) + g(y4))
        z = [a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(z, k1, k2, k3, k4)]
    return (z, acc) if with_divergence else z


# ----------------------------------------------------------------------------
# semi-Lagrangian backend


class SemiLagrangianStepper:
    """One-step map ``psi -> psi(Phi_{-dt}(z)) * jacobian`` for a fixed flow.

    The feet of all grid points are computed once, since the flow is
    autonomous and the step is fixed.  A foot outside the box is not wrapped
    around: the state is taken to vanish there, so the output point is set
    to zero.  :meth:`check` makes sure this assumption holds by requiring the
    state to be negligible on the boundary band read by the stencils.
    """

    def __init__(self, grid, flow: PhaseFlow, config: PropagatorConfig):
        self.grid = grid
        dt = config.dt
        d = grid.config_dim
        order, kind = config.interpolation_order, config.interpolation
        self.band = len(stencil_offsets(order, kind)) // 2 + 1
        outside = np.zeros(grid.shape, dtype=bool)
        if grid.ndim == 4 and flow.accel_position_independent:
            # velocity feet depend on v only; integrate on the velocity plane
            vx, vy = np.meshgrid(grid.coords[2], grid.coords[3], indexing="ij")
            zeros = [np.zeros_like(vx) for _ in range(d)]
            feet, integ = rk4_characteristics(flow, zeros + [vx, vy], -dt, config.foot_substeps, True)
            shifts = [-feet[a] for a in range(d)]   # r_foot = r - shift(v)
            self._interp = FactorizedInterpolator(grid, feet[d:], shifts, order, kind)
            jac = np.exp(0.5 * integ)[None, None, :, :]
            for a in range(d):
                outside |= self._outside(grid.coordinate(a) - shifts[a][None, None], a)
                outside |= self._outside(feet[d + a][None, None], d + a)
        else:
            pts = [np.broadcast_to(grid.coordinate(a), grid.shape) for a in range(grid.ndim)]
            feet, integ = rk4_characteristics(flow, pts, -dt, config.foot_substeps, True)
            self._interp = Interpolator(grid, feet, order, kind)
            jac = np.exp(0.5 * integ)
            for a in range(grid.ndim):
                outside |= self._outside(feet[a], a)
        # integral is taken backwards in time, so exp(+integ/2) = exp(-1/2 int_fwd div)
        factor = None if np.allclose(jac, 1.0, rtol=0, atol=1e-15) else jac
        if outside.any():
            keep = (~outside).astype(float)
            factor = keep if factor is None else keep * factor
        self._factor = factor

    def _outside(self, foot, axis):
        g = self.grid
        return (foot < g.lower[axis]) | (foot >= g.upper[axis])

    def boundary_amplitude(self, values: np.ndarray) -> float:
        """Largest amplitude on the band read across the boundary, relative to the peak."""
        return edge_amplitude(values, [self.band] * self.grid.ndim)

    def check(self, values: np.ndarray) -> None:
        rel = self.boundary_amplitude(values)
        if rel > MARGIN_TOLERANCE:
            raise MarginError(
                f"state has relative amplitude {rel:.2e} where characteristic feet leave the grid; "
                f"enlarge the domain"
            )

    def __call__(self, values: np.ndarray) -> np.ndarray:
        out = self._interp(values)
        if self._factor is not None:
            out = out * self._factor
        return out


def evolve_semilagrangian(psi: WavefunctionField, spec, config: PropagatorConfig,
                          callback: Callable | None = None, check_every: int = 1) -> WavefunctionField:
    """Semi-Lagrangian evolution under ``spec``.

    ``spec`` is a :class:`LiouvillianSpec` (velocity representation) or a
    :class:`PhaseFlow` (for example from :func:`momentum_flow`).
    """
    flow = spec if isinstance(spec, PhaseFlow) else velocity_flow(spec)
    grid = psi.grid
    if not isinstance(spec, PhaseFlow) and spec.grid != grid:
        raise PropagationError("state grid differs from the Liouvillian grid")
    stepper = SemiLagrangianStepper(grid, flow, config)
    a = psi.amplitudes
    t0 = psi.time
    stepper.check(a)
    for n in range(config.n_steps):
        a = stepper(a)
        if (n + 1) % check_every == 0 or n + 1 == config.n_steps:
            stepper.check(a)
        if not np.all(np.isfinite(a[(0,) * grid.ndim])):
            raise PropagationError("non-finite amplitudes during semi-Lagrangian step")
        if callback is not None:
            callback(n + 1, psi.replace(a, time=t0 + (n + 1) * config.dt))
    return psi.replace(a, time=t0 + config.n_steps * config.dt)


def evolve(psi: WavefunctionField, spec, config: PropagatorConfig, scenario: AnalyticScenario | None = None,
           callback: Callable | None = None) -> WavefunctionField:
    """Dispatch on ``config.backend``.

    The analytic backend needs ``scenario``; it is evaluated at every step
    time when a callback is given so that series can be recorded.
    """
    if config.backend == ANALYTIC:
        if scenario is None:
            raise ValueError("the analytic backend needs a scenario with a closed form")
        if callback is not None:
            for n in range(config.n_steps):
                callback(n + 1, evolve_analytic(scenario, psi, (n + 1) * config.dt))
        return evolve_analytic(scenario, psi, config.duration)
    if config.backend == SPLITSTEP:
        return evolve_splitstep(psi, spec, config, callback)
    return evolve_semilagrangian(psi, spec, config, callback)


# ----------------------------------------------------------------------------
# trajectory oracle


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray


class FlowMap:
    """Newtonian flow ``dr/dt = v``, ``dv/dt = F/m`` by a fixed-step integrator.

    ``mass`` is a scalar or one value per configuration component.

    ``method`` is ``"rk4"`` (any force) or ``"leapfrog"`` (velocity Verlet,
    symplectic, velocity-independent forces only).  ``box`` is an optional
    sequence of 2d ``(lo, hi)`` intervals that the trajectory may not leave.
    """

    def __init__(self, force: ForceField, mass: float = 1.0, dt: float = 1e-3, method: str = "rk4", box=None):
        if method not in ("rk4", "leapfrog"):
            raise ValueError(f"unknown integrator {method!r}")
        if method == "leapfrog" and force.depends_on_velocity:
            raise ForceError("leapfrog needs a velocity-independent force")
        if not dt > 0:
            raise ValueError("dt must be positive")
        d = force.config_dim
        self.force = force
        self.masses = np.broadcast_to(np.asarray(mass, dtype=float), (d,)).copy()
        if np.any(self.masses <= 0):
            raise ForceError("masses must be positive")
        self.dt = float(dt)
        self.method = method
        self.box = None if box is None else np.asarray(box, dtype=float)
        self._flow = PhaseFlow(
            d,
            lambda z: list(z[d:]) + [f / m for f, m in zip(force(list(z[:d]), list(z[d:])), self.masses)],
            lambda z: 0.0,
        )

    def _steps(self, t):
        n = max(1, int(np.ceil(abs(t) / self.dt - 1e-9)))
        return n, t / n

    def _check_box(self, z):
        if self.box is None:
            return
        for a, (lo, hi) in enumerate(self.box):
            if np.any(z[a] < lo) or np.any(z[a] > hi):
                raise PropagationError(f"trajectory leaves the bounding box along coordinate {a}")

    def _advance(self, z, h):
        d = self.force.config_dim
        if self.method == "rk4":
            return rk4_characteristics(self._flow, z, h, 1)
        r, v = list(z[:d]), list(z[d:])
        a0 = [f / m for f, m in zip(self.force(r, v), self.masses)]
        vh = [x + 0.5 * h * y for x, y in zip(v, a0)]
        r = [x + h * y for x, y in zip(r, vh)]
        a1 = [f / m for f, m in zip(self.force(r, vh), self.masses)]
        v = [x + 0.5 * h * y for x, y in zip(vh, a1)]
        return r + v

    def forward(self, z0, t: float, samples: int | None = None):
        """End point after time ``t`` (negative for backward)."""
        z = [np.array(x, dtype=float) for x in z0]
        n, h = self._steps(t)
        for _ in range(n):
            z = self._advance(z, h)
            self._check_box(z)
        return z

    def backward(self, z, t: float):
        return self.forward(z, -t)

    def trajectory(self, z0, t: float) -> Trajectory:
        d = self.force.config_dim
        z = [np.array(x, dtype=float) for x in z0]
        n, h = self._steps(t)
        times = [0.0]
        states = [np.array([float(x) for x in z])]
        for k in range(n):
            z = self._advance(z, h)
            self._check_box(z)
            times.append((k + 1) * h)
            states.append(np.array([float(x) for x in z]))
        s = np.array(states)
        return Trajectory(np.array(times), s[:, :d], s[:, d:])


def flow_oracle(force: ForceField, mass: float, z0, t: float, dt: float = 1e-3, method: str = "rk4",
                box=None) -> Trajectory:
    """Sampled Newtonian trajectory from ``z0 = (r0..., v0...)``."""
    z0 = np.asarray(z0, dtype=float).ravel()
    if z0.size != 2 * force.config_dim:
        raise ValueError(f"initial point needs {2 * force.config_dim} coordinates")
    return FlowMap(force, mass, dt, method, box).trajectory(list(z0), t)
