"""Liouvillian generators for free, forced and two-particle systems.

For one particle in d dimensions::

    L = V_a lambda_{x_a} + (1/2m) (F_a lambda_{v_a} + lambda_{v_a} F_a)

with the force sampled pointwise on the grid.  The free Liouvillian is the
first term alone and the two-particle generator is the sum of the two
single-particle forms on a grid with axes ``(x1, x2, v1, v2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import ForceError, GridError
from .forces import ForceField, PotentialPair, force_from_potentials, zero_force
from .grid import TWO_PARTICLE_AXIS_NAMES, Grid, GridSpec, WavefunctionField, build_grid
from .operators import LinearOperator, coordinate, multiplication, shift_generator

FREE = "free"
FORCED = "forced"
TWO_PARTICLE = "two_particle"


@dataclass(frozen=True, eq=False)
class LiouvillianSpec:
    """Recipe for a Liouvillian: kind, force, per-component masses and grid.

    Use the :meth:`free`, :meth:`forced` and :meth:`two_particle`
    constructors.  ``masses`` has one entry per configuration axis (for two
    particles, one per particle).
    """

    kind: str
    grid: Grid
    force: ForceField
    masses: tuple

    def __post_init__(self):
        grid = self.grid if isinstance(self.grid, Grid) else build_grid(self.grid)
        object.__setattr__(self, "grid", grid)
        if self.kind == TWO_PARTICLE and (grid.config_dim != 2 or grid.axis_names != TWO_PARTICLE_AXIS_NAMES):
            raise GridError("two-particle Liouvillians need a grid with axes (x1, x2, v1, v2)")
        if self.force.config_dim != grid.config_dim:
            raise ForceError(
                f"force has {self.force.config_dim} components but the grid has "
                f"{grid.config_dim} configuration axes"
            )
        masses = tuple(float(m) for m in self.masses)
        if len(masses) != grid.config_dim or min(masses) <= 0:
            raise ForceError(f"need {grid.config_dim} positive masses, got {self.masses!r}")
        object.__setattr__(self, "masses", masses)

    @classmethod
    def free(cls, grid):
        g = grid if isinstance(grid, Grid) else build_grid(grid)
        return cls(FREE, g, zero_force(g.config_dim), (1.0,) * g.config_dim)

    @classmethod
    def forced(cls, grid, force: ForceField, mass: float = 1.0):
        g = grid if isinstance(grid, Grid) else build_grid(grid)
        return cls(FORCED, g, force, (float(mass),) * g.config_dim)

    @classmethod
    def two_particle(cls, grid, force1, force2, m1: float = 1.0, m2: float = 1.0):
        """``force1``/``force2`` are callables ``(r, v) -> F`` over both particles,
        or single-component :class:`ForceField` objects."""
        f1, vel1 = _single_component(force1)
        f2, vel2 = _single_component(force2)
        force = ForceField((f1, f2), vel1 or vel2, True, "two-particle")
        return cls(TWO_PARTICLE, grid, force, (m1, m2))

    @property
    def is_free(self) -> bool:
        return self.kind == FREE


def _single_component(f):
    if isinstance(f, ForceField):
        if f.config_dim != 1:
            raise ForceError("per-particle force must have exactly one component")
        return f.components[0], f.depends_on_velocity
    if callable(f):
        return f, True
    raise ForceError("per-particle force must be callable")


def two_particle_grid(n, position_extent, velocity_extent, max_points=None) -> Grid:
    """Grid with axes ``(x1, x2, v1, v2)``; both particles share the extents."""
    kwargs = {} if max_points is None else {"max_points": max_points}
    pos = tuple(position_extent)
    vel = tuple(velocity_extent)
    if np.isscalar(pos[0]):
        pos = (pos, pos)
    if np.isscalar(vel[0]):
        vel = (vel, vel)
    spec = GridSpec(2, (n,) * 4 if np.isscalar(n) else tuple(n), pos, vel,
                    axis_names=TWO_PARTICLE_AXIS_NAMES, **kwargs)
    return build_grid(spec)


def build_liouvillian(spec: LiouvillianSpec) -> LinearOperator:
    """Hermitian generator ``L`` for ``spec`` acting on velocity fields."""
    grid = spec.grid
    d = grid.config_dim
    forced = not spec.is_free
    force_values = spec.force.on_grid(grid) if forced else None

    def act(psi: WavefunctionField) -> WavefunctionField:
        if psi.grid != grid:
            raise GridError("state grid differs from the Liouvillian grid")
        a = psi.amplitudes
        out = np.zeros(grid.shape, dtype=np.complex128)
        for i in range(d):
            out += grid.coordinate(d + i) * spectral.lambda_apply(a, grid, i)
        if forced:
            for i in range(d):
                f = force_values[i]
                if not np.any(f):
                    continue
                lam = spectral.lambda_apply(a, grid, d + i)
                sym = f * lam + spectral.lambda_apply(f * a, grid, d + i)
                out += sym / (2.0 * spec.masses[i])
        return psi.replace(out)

    label = "V.lambda_x" if spec.is_free else "V.lambda_x + {F.lambda_v}/2m"
    return LinearOperator(act, label, True)


def force_operator(force: ForceField, component: int) -> LinearOperator:
    """Multiplicative operator for one force component."""
    return multiplication(lambda grid: force.on_grid(grid)[component], f"F_{component}")


def lagrangian_operator(p: PotentialPair, mass: float = 1.0) -> LinearOperator:
    """Multiplication by ``m V^2/2 - phi(r) + V.A(r)``."""

    def values(grid):
        r, v = grid.positions(), grid.velocities()
        A = p.A_values(r)
        return (
            0.5 * mass * sum(x**2 for x in v)
            - p.phi_values(r)
            + sum(va * aa for va, aa in zip(v, A))
        )

    return multiplication(values, "Lagrangian")


def lagrangian_superop_residual(p: PotentialPair, total_force: ForceField, psi: WavefunctionField,
                                mass: float = 1.0) -> list:
    """Per-component ``||Phi_a[Lag] psi - F_nc_a psi|| / ||psi||``.

    ``Phi_a[Lag] = -[L, [lambda_{v_a}, Lag]] - i [lambda_{x_a}, Lag]`` with
    ``L`` built from ``total_force`` and the nonconservative remainder
    ``F_nc = total_force - force_from_potentials(p)``.
    """
    grid = psi.grid
    d = grid.config_dim
    if p.config_dim != d or total_force.config_dim != d:
        raise ForceError("potentials, force and grid dimensions differ")
    L = build_liouvillian(LiouvillianSpec.forced(grid, total_force, mass))
    lag = lagrangian_operator(p, mass)
    remainder = total_force - force_from_potentials(p)
    fnc = remainder.on_grid(grid)
    lag_psi = lag(psi)
    out = []
    norm = psi.norm()
    for a in range(d):
        lam_v = shift_generator(d + a)
        lam_x = shift_generator(a)
        # inner bracket C = [lambda_v, Lag]; apply -[L, C] literally
        def inner(phi, lam_v=lam_v):
            return lam_v(lag(phi)) - lag(lam_v(phi))

        c_psi = inner(psi)
        term1 = -(L(c_psi) - inner(L(psi)))
        term2 = -1j * (lam_x(lag_psi) - lag(lam_x(psi)))
        diff = term1 + term2 - psi.replace(fnc[a] * psi.amplitudes)
        out.append(diff.norm() / norm)
    return out


@dataclass(frozen=True)
class ConstraintReport:
    passed: bool
    translation_deviation: float
    boost_deviation: float


def two_particle_force_constraint(force1, force2, samples: int = 64, seed: int = 11,
                                  tolerance: float = 1e-8) -> ConstraintReport:
    """Test invariance of pair forces under common translations and boosts.

    Forces are sampled at random points ``(x1, x2, v1, v2)`` and re-evaluated
    after ``x_i -> x_i + a`` and, separately, ``v_i -> v_i + b``.  Passes
    iff both maximal deviations are below ``tolerance``.
    """
    f1, _ = _single_component(force1)
    f2, _ = _single_component(force2)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2.0, 2.0, size=(4, samples))
    shift = rng.uniform(-3.0, 3.0, size=samples)
    boost = rng.uniform(-3.0, 3.0, size=samples)
    r, v = [pts[0], pts[1]], [pts[2], pts[3]]
    rt = [pts[0] + shift, pts[1] + shift]
    vb = [pts[2] + boost, pts[3] + boost]
    dev_t = dev_b = 0.0
    for f in (f1, f2):
        base = np.broadcast_to(np.asarray(f(r, v), float), (samples,))
        dev_t = max(dev_t, float(np.max(np.abs(np.asarray(f(rt, v), float) - base))))
        dev_b = max(dev_b, float(np.max(np.abs(np.asarray(f(r, vb), float) - base))))
    return ConstraintReport(dev_t < tolerance and dev_b < tolerance, dev_t, dev_b)


def two_particle_operators(m1: float = 1.0, m2: float = 1.0) -> dict:
    """Centre-of-mass and relative coordinates with their shift generators."""
    M = m1 + m2
    X1, X2, V1, V2 = (coordinate(a) for a in TWO_PARTICLE_AXIS_NAMES)
    lx1, lx2, lv1, lv2 = (shift_generator(a) for a in TWO_PARTICLE_AXIS_NAMES)
    return {
        "R_cm": (m1 / M) * X1 + (m2 / M) * X2,
        "V_cm": (m1 / M) * V1 + (m2 / M) * V2,
        "R_rel": X1 - X2,
        "V_rel": V1 - V2,
        "lambda_r_cm": lx1 + lx2,
        "lambda_v_cm": lv1 + lv2,
        "lambda_r_rel": (m2 / M) * lx1 - (m1 / M) * lx2,
        "lambda_v_rel": (m2 / M) * lv1 - (m1 / M) * lv2,
    }
