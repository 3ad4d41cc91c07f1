"""Velocity and momentum representations and the gauge map between them.

A velocity-representation field ``psi(r, v)`` and its momentum-representation
image ``phi(r, p)`` are related by

    phi(r, p) = psi(r, (p - A(r)) / m)

which is a position-dependent shift of the velocity axes by ``A(r) / m``.
The momentum field lives on the same grid: its last d axes hold ``p / m``.
On momentum fields the canonical momentum ``P = m V + A`` is plain
multiplication by ``p`` and the shift generator along a position axis is the
derivative at fixed ``p`` (the primed ``lambda'_x``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import ForceError, GridError, MarginError, PropagationError
from .forces import ForceField, PotentialPair, force_from_potentials, partial_derivative
from .grid import MOMENTUM, VELOCITY, WavefunctionField
from .liouvillian import LiouvillianSpec
from .operators import LinearOperator, OperatorIdentity, coordinate, multiplication, shift_generator
from .propagator import (
    MARGIN_TOLERANCE,
    SEMILAGRANGIAN,
    SPLITSTEP,
    PropagatorConfig,
    edge_amplitude,
    evolve,
    evolve_semilagrangian,
    momentum_flow,
)

TO_MOMENTUM = "to_momentum"
TO_VELOCITY = "to_velocity"


@dataclass(frozen=True, eq=False)
class GaugeContext:
    """Static vector potential, mass and direction of a representation change."""

    potentials: PotentialPair
    mass: float = 1.0
    direction: str = TO_MOMENTUM

    def __post_init__(self):
        if self.direction not in (TO_MOMENTUM, TO_VELOCITY):
            raise ValueError(f"direction must be {TO_MOMENTUM!r} or {TO_VELOCITY!r}")
        if not self.mass > 0:
            raise ForceError(f"mass must be positive, got {self.mass!r}")

    def inverse(self) -> "GaugeContext":
        other = TO_VELOCITY if self.direction == TO_MOMENTUM else TO_MOMENTUM
        return GaugeContext(self.potentials, self.mass, other)


def _velocity_shifts(potentials: PotentialPair, grid, mass: float) -> list:
    """``A_i(r) / m`` as arrays of size one along the velocity axes."""
    d = grid.config_dim
    if potentials.config_dim != d:
        raise ForceError(f"potentials have {potentials.config_dim} components, grid has {d}")
    r = [grid.coordinate(a) for a in range(d)]
    shape = tuple(grid.shape[:d]) + (1,) * d
    return [np.broadcast_to(a / mass, shape) for a in potentials.A_values(r)]


def _slice_label(grid, index) -> str:
    d = grid.config_dim
    where = ", ".join(f"{grid.axis_names[a]}={grid.coords[a][i]:.4g}" for a, i in enumerate(index[:d]))
    return f"position slice {tuple(int(i) for i in index[:d])} ({where})"


def _check_slices(values: np.ndarray, grid, shifts, tolerance: float = MARGIN_TOLERANCE) -> None:
    """Per position slice: the shift fits the velocity box and leaves the edges clear."""
    d = grid.config_dim
    peak = float(np.max(np.abs(values)))
    if peak == 0:
        return
    vel_axes = tuple(range(d, 2 * d))
    slice_peak = np.max(np.abs(values), axis=vel_axes) / peak
    occupied = slice_peak > tolerance
    for i, s in enumerate(shifts):
        too_far = occupied & (np.abs(s.reshape(grid.shape[:d])) >= 0.5 * grid.widths[d + i])
        if too_far.any():
            idx = np.argwhere(too_far)[0]
            raise MarginError(
                f"gauge shift {float(s.reshape(grid.shape[:d])[tuple(idx)]):.4g} along "
                f"{grid.axis_names[d + i]!r} exceeds half the velocity extent at {_slice_label(grid, idx)}"
            )
    band = np.zeros(grid.shape[:d])
    mag = np.abs(values)
    for i in range(d):
        ax = d + i
        n = grid.shape[ax]
        lo = np.take(mag, range(2), axis=ax)
        hi = np.take(mag, range(n - 2, n), axis=ax)
        band = np.maximum(band, np.max(np.maximum(lo, hi), axis=vel_axes))
    band /= peak
    if np.max(band) > tolerance:
        idx = np.unravel_index(int(np.argmax(band)), band.shape)
        raise MarginError(
            f"shifted state reaches the velocity boundary (relative amplitude {np.max(band):.2e}) "
            f"at {_slice_label(grid, idx)}; enlarge the velocity extent"
        )


def gauge_transform(ctx: GaugeContext, psi: WavefunctionField) -> WavefunctionField:
    """Change representation: ``phi(r, p) = psi(r, (p - A(r)) / m)`` or its inverse.

    Every position slice is shifted along the velocity axes by its own
    spectral translation, so the map is exactly unitary on the grid.
    """
    grid = psi.grid
    source = VELOCITY if ctx.direction == TO_MOMENTUM else MOMENTUM
    if psi.representation != source:
        raise GridError(f"{ctx.direction} needs a {source}-representation field, got {psi.representation}")
    target = MOMENTUM if ctx.direction == TO_MOMENTUM else VELOCITY
    if not ctx.potentials.has_vector_potential:
        return psi.replace(np.array(psi.amplitudes), representation=target)
    d = grid.config_dim
    sign = 1.0 if ctx.direction == TO_MOMENTUM else -1.0
    shifts = [sign * s for s in _velocity_shifts(ctx.potentials, grid, ctx.mass)]
    a = psi.amplitudes
    for i in range(d):
        a = spectral.translate(a, grid, d + i, shifts[i])
    _check_slices(a, grid, shifts)
    return psi.replace(a, representation=target)


def to_momentum(psi, potentials: PotentialPair, mass: float = 1.0) -> WavefunctionField:
    return gauge_transform(GaugeContext(potentials, mass, TO_MOMENTUM), psi)


def to_velocity(phi, potentials: PotentialPair, mass: float = 1.0) -> WavefunctionField:
    return gauge_transform(GaugeContext(potentials, mass, TO_VELOCITY), phi)


def canonical_momentum(component: int, potentials: PotentialPair, mass: float = 1.0) -> LinearOperator:
    """``P = m V + A``: multiplication by ``p`` on momentum fields.

    On velocity fields the same operator multiplies by ``m v + A(r)``.
    """

    def act(psi):
        grid = psi.grid
        d = grid.config_dim
        values = mass * grid.coordinate(d + component)
        if psi.representation == VELOCITY and potentials.has_vector_potential:
            r = [grid.coordinate(a) for a in range(d)]
            values = values + potentials.A_values(r)[component]
        return psi.replace(psi.amplitudes * values)

    return LinearOperator(act, f"P_{component}", True)


def momentum_shift_generator(component: int, mass: float = 1.0) -> LinearOperator:
    """``lambda_p = lambda_v / m`` on the momentum grid."""
    def act(psi):
        d = psi.grid.config_dim
        return psi.replace(spectral.lambda_apply(psi.amplitudes, psi.grid, d + component) / mass)

    return LinearOperator(act, f"lambda_p{component}", True)


def momentum_liouvillian(p: PotentialPair, total_force: ForceField, mass: float, grid) -> LinearOperator:
    """Generator ``L'`` acting on momentum-representation fields.

    With ``V = (P - A) / m``, ``lambda_p = lambda_v / m`` and ``lambda'_x``
    the derivative at fixed ``p``::

        L' = V_a lambda'_{x_a} + (F_a lambda_{p_a} + lambda_{p_a} F_a) / 2
             + (d A_b / d x_a) ((P_a - A_a) lambda_{p_b} + lambda_{p_b} (P_a - A_a)) / 2m

    where ``F = F(R, V)`` is the total force.  The first term is not
    symmetrized, as in the textbook form; it is Hermitian whenever
    ``div A = 0`` (for example in the symmetric gauge).
    """
    d = grid.config_dim
    if p.config_dim != d or total_force.config_dim != d:
        raise ForceError(
            f"potentials ({p.config_dim}) and force ({total_force.config_dim}) must match the grid "
            f"({d} configuration axes)"
        )
    if not mass > 0:
        raise ForceError(f"mass must be positive, got {mass!r}")
    r = [grid.coordinate(a) for a in range(d)]
    A = p.A_values(r)
    V = [grid.coordinate(d + a) - A[a] / mass for a in range(d)]
    F = total_force(r, V)
    dA = p.grad_A(r) if p.has_vector_potential else None

    def lam_p(values, b):
        return spectral.lambda_apply(values, grid, d + b) / mass

    def act(psi: WavefunctionField) -> WavefunctionField:
        if psi.grid != grid:
            raise GridError("state grid differs from the Liouvillian grid")
        a = psi.amplitudes
        out = np.zeros(grid.shape, dtype=np.complex128)
        for i in range(d):
            out += V[i] * spectral.lambda_apply(a, grid, i)
        for b in range(d):
            f = np.broadcast_to(F[b], grid.shape)
            if np.any(f):
                out += 0.5 * (f * lam_p(a, b) + lam_p(f * a, b))
        if dA is not None:
            for i in range(d):
                for b in range(d):
                    g = dA[i][b]
                    if not np.any(g):
                        continue
                    # (P_i - A_i) = m V_i; the 1/2m prefactor leaves V_i / 2
                    out += 0.5 * g * (V[i] * lam_p(a, b) + lam_p(V[i] * a, b))
        return psi.replace(out)

    return LinearOperator(act, "L'", True)


def kinetic_velocity(component: int, potentials: PotentialPair, mass: float = 1.0) -> LinearOperator:
    """``V = (P - A) / m`` as a multiplication operator on momentum fields."""

    def values(grid):
        d = grid.config_dim
        r = [grid.coordinate(a) for a in range(d)]
        return grid.coordinate(d + component) - potentials.A_values(r)[component] / mass

    return multiplication(values, f"V_{component}")


# ----------------------------------------------------------------------------
# weak-form identities of the momentum representation


def _as_momentum(psi: WavefunctionField) -> WavefunctionField:
    return psi if psi.representation == MOMENTUM else psi.replace(representation=MOMENTUM)


def momentum_identities(potentials: PotentialPair, mass: float = 1.0) -> list:
    """Bracket table of ``{R, P, lambda'_r, lambda_p}`` plus the conjugation checks.

    All operators act on momentum fields.  ``representations.lambda_prime``
    checks ``C lambda_x C^-1 - (d A_b / d x_a) lambda_{p_b} = lambda'_x`` and
    ``representations.P`` checks ``C (m V + A) C^-1 = P`` with ``C`` the
    gauge map, realized through :func:`gauge_transform`.
    """
    d = potentials.config_dim
    i1 = LinearOperator(lambda psi: psi * 1j, "i", True)
    zero = LinearOperator(lambda psi: psi * 0.0, "0", True)
    X = [coordinate(a) for a in range(d)]
    P = [canonical_momentum(a, potentials, mass) for a in range(d)]
    lx = [shift_generator(a) for a in range(d)]
    lp = [momentum_shift_generator(a, mass) for a in range(d)]

    def br(a, b):
        return LinearOperator(lambda psi: a(_as_momentum(b(psi))) - b(a(psi)), f"[{a.label}, {b.label}]")

    def on_momentum(op):
        return LinearOperator(lambda psi: op(_as_momentum(psi)), op.label, op.hermitian_hint)

    ids = []
    for a in range(d):
        for b in range(d):
            delta = i1 if a == b else zero
            tag = f"[{a}{b}]" if d > 1 else ""
            ids.append(OperatorIdentity(f"representations.XP{tag}", on_momentum(br(X[a], P[b])), zero, True))
            ids.append(OperatorIdentity(f"representations.PP{tag}", on_momentum(br(P[a], P[b])), zero, True))
            ids.append(OperatorIdentity(f"representations.Xlambdap{tag}", on_momentum(br(X[a], lp[b])), zero))
            ids.append(OperatorIdentity(f"representations.Plambdaprime{tag}", on_momentum(br(P[a], lx[b])), zero))
            ids.append(OperatorIdentity(f"representations.Xlambdaprime{tag}", on_momentum(br(X[a], lx[b])), delta))
            ids.append(OperatorIdentity(f"representations.Plambdap{tag}", on_momentum(br(P[a], lp[b])), delta))

    def conj(op):
        def act(phi):
            phi = _as_momentum(phi)
            psi = to_velocity(phi, potentials, mass)
            return to_momentum(op(psi), potentials, mass)
        return act

    for a in range(d):
        tag = f"[{a}]" if d > 1 else ""
        cx = conj(lx[a])

        def lhs(phi, a=a, cx=cx):
            phi = _as_momentum(phi)
            out = cx(phi)
            if potentials.has_vector_potential:
                grid = phi.grid
                r = [grid.coordinate(k) for k in range(d)]
                dA = potentials.grad_A(r)
                for b in range(d):
                    out = out - lp[b](phi.replace(phi.amplitudes * dA[a][b]))
            return out

        ids.append(OperatorIdentity(f"representations.lambda_prime{tag}", LinearOperator(lhs, "C lx C^-1 - dA lp"),
                                    on_momentum(lx[a])))
        mv_plus_a = canonical_momentum(a, potentials, mass)
        ids.append(OperatorIdentity(f"representations.P{tag}", LinearOperator(conj(mv_plus_a), "C P C^-1"),
                                    on_momentum(P[a])))
    return ids


# ----------------------------------------------------------------------------
# cross-representation evolution


@dataclass(frozen=True)
class ConsistencyReport:
    """L-infinity discrepancy between the two evolution routes."""

    discrepancy: float
    via_velocity: WavefunctionField
    via_momentum: WavefunctionField


def evolve_momentum(phi: WavefunctionField, potentials: PotentialPair, total_force: ForceField,
                    config: PropagatorConfig, mass: float = 1.0, callback=None) -> WavefunctionField:
    """Evolve a momentum-representation field under ``L'``.

    Semi-Lagrangian steps follow the characteristics of ``L'``.  Without a
    vector potential ``L'`` equals ``L`` with ``p = m v``, so the split-step
    backend is available for velocity-independent forces as well.
    """
    if phi.representation != MOMENTUM:
        raise GridError("evolve_momentum needs a momentum-representation field")
    if config.backend == SEMILAGRANGIAN:
        flow = momentum_flow(potentials, total_force, mass)
        return evolve_semilagrangian(phi, flow, config, callback)
    if config.backend == SPLITSTEP and not potentials.has_vector_potential:
        spec = LiouvillianSpec.forced(phi.grid, total_force, mass)
        return evolve(phi, spec, config, callback=callback)
    raise PropagationError(
        f"the {config.backend} backend is not available for the momentum Liouvillian with a vector potential"
    )


def representation_consistency(psi0: WavefunctionField, potentials: PotentialPair, total_force: ForceField,
                               config: PropagatorConfig, mass: float = 1.0) -> ConsistencyReport:
    """Compare ``C exp(-i t L) psi0`` with ``exp(-i t L') C psi0`` at ``t = config.duration``.

    The discrepancy is the largest absolute amplitude difference.
    """
    spec = LiouvillianSpec.forced(psi0.grid, total_force, mass)
    route_v = to_momentum(evolve(psi0, spec, config), potentials, mass)
    route_p = evolve_momentum(to_momentum(psi0, potentials, mass), potentials, total_force, config, mass)
    diff = float(np.max(np.abs(route_v.amplitudes - route_p.amplitudes)))
    return ConsistencyReport(diff, route_v, route_p)


# ----------------------------------------------------------------------------
# Poisson-bracket form


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """``H = |p - A(r)|^2 / 2m + phi(r)``."""

    potentials: PotentialPair
    mass: float = 1.0

    def value(self, r, p):
        A = self.potentials.A_values(list(r))
        kin = sum((pa - aa) ** 2 for pa, aa in zip(p, A)) / (2.0 * self.mass)
        return kin + self.potentials.phi_values(list(r))


def poisson_liouvillian_check(H: HamiltonianSpec, phi: WavefunctionField) -> float:
    """Relative residual ``||L' phi + i {phi, H}|| / ||phi||``.

    The Poisson bracket ``{f, H} = d_r f . d_p H - d_p f . d_r H`` uses
    spectral derivatives of the field and complex-step derivatives of ``H``
    evaluated on the grid, independently of how ``L'`` is assembled.
    """
    grid = phi.grid
    d = grid.config_dim
    m = H.mass
    r = [np.broadcast_to(grid.coordinate(a), grid.shape) for a in range(d)]
    p = [np.broadcast_to(m * grid.coordinate(d + a), grid.shape) for a in range(d)]

    def h(*z):
        return H.value(z[:d], z[d:])

    z = r + p
    a = phi.amplitudes
    bracket = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(d):
        dH_dp = partial_derivative(h, z, d + i)
        dH_dr = partial_derivative(h, z, i)
        dphi_dr = 1j * spectral.lambda_apply(a, grid, i)
        dphi_dp = 1j * spectral.lambda_apply(a, grid, d + i) / m
        bracket += dphi_dr * dH_dp - dphi_dp * dH_dr
    L = momentum_liouvillian(H.potentials, force_from_potentials(H.potentials), m, grid)
    lhs = L(_as_momentum(phi)).amplitudes
    diff = lhs - (-1j) * bracket
    return float(np.linalg.norm(diff) / np.linalg.norm(a))
