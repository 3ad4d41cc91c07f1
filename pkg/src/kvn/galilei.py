"""Galilei group actions on phase-space states and the algebra verification suite.

Generators, with ``lambda = -i d/d(axis)``::

    lambda_x              space translations
    lambda_v              velocity translations
    G_a = -lambda_{x_a} t - lambda_{v_a}      boosts (time label t)
    J   = X lambda_y - Y lambda_x + V_x lambda_{v_y} - V_y lambda_{v_x}

The central charge is zero: boosts carry no phase, and ``[G_a, lambda_{x_b}]``
vanishes identically.  On a grid with one configuration axis only the
rotation-free part of the algebra exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import GridError, MarginError
from .grid import Grid, WavefunctionField, build_grid, GridSpec
from .liouvillian import LiouvillianSpec, build_liouvillian
from .operators import (
    LinearOperator,
    OperatorIdentity,
    coordinate,
    default_test_states,
    identity_residual,
    memoized,
    shift_generator,
    zero_operator,
    commutator,
)
from .propagator import check_margin

SPACE_TRANSLATION = "space_translation"
VELOCITY_TRANSLATION = "velocity_translation"
BOOST = "boost"
ROTATION = "rotation"
GROUP_KINDS = (SPACE_TRANSLATION, VELOCITY_TRANSLATION, BOOST, ROTATION)

#: Time label used for the boost generator in the algebra suite.
SUITE_TIME = 0.7

#: Tolerances for identities that do / do not involve derivatives of products.
EXACT_TOLERANCE = 1e-10
DERIVATIVE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GroupElement:
    """One Galilei transformation.

    ``vector`` holds the translation ``a`` or velocity ``b`` (one entry per
    configuration axis); ``t_ref`` is the boost time label; ``theta`` the
    rotation angle.  Use the named constructors.
    """

    kind: str
    vector: tuple = ()
    t_ref: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group element kind {self.kind!r}")
        object.__setattr__(self, "vector", tuple(float(x) for x in np.atleast_1d(self.vector)))

    @classmethod
    def space_translation(cls, a):
        return cls(SPACE_TRANSLATION, a)

    @classmethod
    def velocity_translation(cls, b):
        return cls(VELOCITY_TRANSLATION, b)

    @classmethod
    def boost(cls, b, t_ref: float):
        return cls(BOOST, b, t_ref=float(t_ref))

    @classmethod
    def rotation(cls, theta: float):
        return cls(ROTATION, theta=float(theta))


def _check_vector(grid: Grid, vec, axes, what):
    if len(vec) != grid.config_dim:
        raise GridError(f"{what} needs {grid.config_dim} components, got {len(vec)}")
    for comp, ax in zip(vec, axes):
        if abs(comp) > grid.widths[ax] / 2:
            raise MarginError(
                f"{what} component {comp:g} along axis {grid.axis_names[ax]!r} exceeds half the grid extent"
            )


def apply_group_element(g: GroupElement, psi: WavefunctionField) -> WavefunctionField:
    """Active transformation of ``psi``: every ket ``|r, v>`` is moved by ``g``.

    All actions are exact spectral shifts (rotations as three shears), so
    they are unitary to round-off.  The result is checked for amplitude on
    the boundary band, which would signal support wrapped around the box.
    """
    grid = psi.grid
    d = grid.config_dim
    a = psi.amplitudes
    if g.kind == SPACE_TRANSLATION:
        _check_vector(grid, g.vector, range(d), "translation")
        for i, x in enumerate(g.vector):
            a = spectral.translate(a, grid, i, x)
    elif g.kind == VELOCITY_TRANSLATION:
        _check_vector(grid, g.vector, range(d, 2 * d), "velocity translation")
        for i, x in enumerate(g.vector):
            a = spectral.translate(a, grid, d + i, x)
    elif g.kind == BOOST:
        _check_vector(grid, g.vector, range(d, 2 * d), "boost")
        _check_vector(grid, tuple(x * g.t_ref for x in g.vector), range(d), "boost displacement")
        for i, x in enumerate(g.vector):
            a = spectral.translate(a, grid, i, x * g.t_ref)
            a = spectral.translate(a, grid, d + i, x)
    else:
        if d != 2:
            raise GridError("rotations need two configuration axes")
        a = spectral.rotate(a, grid, 0, 1, g.theta)
        a = spectral.rotate(a, grid, 2, 3, g.theta)
    out = psi.replace(a)
    check_margin(out)
    return out


# ----------------------------------------------------------------------------
# generators


def boost_generator(axis: int, t: float) -> LinearOperator:
    """``G_a = -lambda_{x_a} t - lambda_{v_a}`` (central charge zero)."""

    def act(psi, axis=axis):
        d = psi.grid.config_dim
        out = -spectral.lambda_apply(psi.amplitudes, psi.grid, d + axis)
        if t:
            out = out - t * spectral.lambda_apply(psi.amplitudes, psi.grid, axis)
        return psi.replace(out)

    return LinearOperator(act, f"G_{axis}(t={t:g})", True)


def rotation_generator() -> LinearOperator:
    """``J = X lambda_y - Y lambda_x + V_x lambda_{v_y} - V_y lambda_{v_x}``."""

    def act(psi):
        grid = psi.grid
        if grid.config_dim != 2:
            raise GridError("the rotation generator needs two configuration axes")
        a = psi.amplitudes
        out = grid.coordinate(0) * spectral.lambda_apply(a, grid, 1)
        out -= grid.coordinate(1) * spectral.lambda_apply(a, grid, 0)
        out += grid.coordinate(2) * spectral.lambda_apply(a, grid, 3)
        out -= grid.coordinate(3) * spectral.lambda_apply(a, grid, 2)
        return psi.replace(out)

    return LinearOperator(act, "J", True)


def rotation_generator_residual(psi: WavefunctionField, theta: float = 1e-4) -> float:
    """``|| (R(theta) - R(-theta)) psi / (2 theta) + i J psi || / ||psi||``."""
    plus = apply_group_element(GroupElement.rotation(theta), psi)
    minus = apply_group_element(GroupElement.rotation(-theta), psi)
    diff = (plus - minus) * (1.0 / (2.0 * theta)) + rotation_generator()(psi) * 1j
    return diff.norm() / psi.norm()


# ----------------------------------------------------------------------------
# identity catalogue


def _keep(a, b, include_diagonal):
    return include_diagonal or a != b


def kinematic_identities(grid: Grid, include_diagonal: bool = True) -> list:
    """Brackets among X, V, lambda_x and lambda_v on ``grid``.

    ``include_diagonal=False`` keeps only brackets between different
    configuration axes.
    """
    d = grid.config_dim
    X = [coordinate(i) for i in range(d)]
    V = [coordinate(d + i) for i in range(d)]
    LX = [shift_generator(i) for i in range(d)]
    LV = [shift_generator(d + i) for i in range(d)]
    one = LinearOperator(lambda psi: psi, "1", True)
    zero = zero_operator()
    names = grid.axis_names
    out = []
    for a in range(d):
        for b in range(d):
            if not _keep(a, b, include_diagonal):
                continue
            tag = f"[{names[a]},{names[b]}]" if a != b else f"[{names[a]}]"
            delta = 1j * one if a == b else zero
            out += [
                OperatorIdentity(f"algebra.XX{tag}", commutator(X[a], X[b]), zero, True, "[X_a, X_b] = 0"),
                OperatorIdentity(f"algebra.XV{tag}", commutator(X[a], V[b]), zero, True, "[X_a, V_b] = 0"),
                OperatorIdentity(f"algebra.VV{tag}", commutator(V[a], V[b]), zero, True, "[V_a, V_b] = 0"),
                OperatorIdentity(f"algebra.Xlambda{tag}", commutator(X[a], LX[b]), delta, a != b,
                                 "[X_a, lambda_x_b] = i delta_ab"),
                OperatorIdentity(f"algebra.Vlambda{tag}", commutator(V[a], LV[b]), delta, a != b,
                                 "[V_a, lambda_v_b] = i delta_ab"),
                OperatorIdentity(f"algebra.Xlambdav{tag}", commutator(X[a], LV[b]), zero, True,
                                 "[X_a, lambda_v_b] = 0"),
                OperatorIdentity(f"algebra.Vlambdax{tag}", commutator(V[a], LX[b]), zero, True,
                                 "[V_a, lambda_x_b] = 0"),
                OperatorIdentity(f"algebra.lambdaxlambdav{tag}", commutator(LX[a], LV[b]), zero, True,
                                 "[lambda_x_a, lambda_v_b] = 0"),
            ]
    return out


def galilei_identities(grid: Grid, t: float = SUITE_TIME, include_diagonal: bool = True) -> list:
    """Galilei algebra with the free Liouvillian, boosts at time label ``t``.

    ``include_diagonal=False`` drops the brackets that involve a single
    configuration axis; rotation identities are always included on a grid
    with two configuration axes.
    """
    d = grid.config_dim
    X = [coordinate(i) for i in range(d)]
    V = [coordinate(d + i) for i in range(d)]
    LX = [shift_generator(i) for i in range(d)]
    LV = [shift_generator(d + i) for i in range(d)]
    G = [boost_generator(i, t) for i in range(d)]
    L = build_liouvillian(LiouvillianSpec.free(grid))
    one = LinearOperator(lambda psi: psi, "1", True)
    zero = zero_operator()
    names = grid.axis_names
    out = []
    for a in range(d):
        na = names[a]
        if include_diagonal:
            out += [
                OperatorIdentity(f"galilei.gl[{na}]", commutator(G[a], L), 1j * LX[a], False,
                                 "[G_a, L] = i lambda_x_a"),
                OperatorIdentity(f"galilei.lambdaxL[{na}]", commutator(LX[a], L), zero, False,
                                 "[lambda_x_a, L] = 0"),
            ]
        for b in range(d):
            if not _keep(a, b, include_diagonal):
                continue
            tag = f"[{na},{names[b]}]"
            delta = one if a == b else zero
            out += [
                OperatorIdentity(f"galilei.lambdaxlambdax{tag}", commutator(LX[a], LX[b]), zero, True,
                                 "[lambda_x_a, lambda_x_b] = 0"),
                OperatorIdentity(f"galilei.GG{tag}", commutator(G[a], G[b]), zero, True, "[G_a, G_b] = 0"),
                OperatorIdentity(f"galilei.Glambda{tag}", commutator(G[a], LX[b]), zero, True,
                                 "[G_a, lambda_x_b] = i delta_ab M with M = 0"),
                OperatorIdentity(f"galilei.Glambdav{tag}", commutator(G[a], LV[b]), zero, True,
                                 "[G_a, lambda_v_b] = 0"),
                # operand order as implied by G R G^-1 = R - b t and G V G^-1 = V - b
                OperatorIdentity(f"galilei.xcommg{tag}", commutator(G[a], X[b]), (1j * t) * delta, a != b,
                                 "[G_a, X_b] = i delta_ab t"),
                OperatorIdentity(f"galilei.vcommg{tag}", commutator(G[a], V[b]), 1j * delta, a != b,
                                 "[G_a, V_b] = i delta_ab"),
            ]
    if d == 2:
        J = rotation_generator()
        # in the plane only J_z exists: [J, W_x] = i W_y and [J, W_y] = -i W_x
        pairs = [("x", X), ("v", V), ("lambdax", LX), ("lambdav", LV), ("G", G)]
        for label, W in pairs:
            out += [
                OperatorIdentity(f"galilei.j{label}[x]", commutator(J, W[0]), 1j * W[1], False,
                                 f"[J, {label}_x] = i {label}_y"),
                OperatorIdentity(f"galilei.j{label}[y]", commutator(J, W[1]), -1j * W[0], False,
                                 f"[J, {label}_y] = -i {label}_x"),
            ]
        out += [
            OperatorIdentity("galilei.jj", commutator(J, J), zero, True, "[J, J] = 0"),
            OperatorIdentity("galilei.JL", commutator(J, L), zero, False, "[J, L] = 0"),
        ]
    return out


@dataclass(frozen=True)
class SuiteRow:
    identity_id: str
    state_index: int
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.tolerance)


def run_identities(identities, states, exact_tol: float = EXACT_TOLERANCE,
                   derivative_tol: float = DERIVATIVE_TOLERANCE) -> list:
    """One :class:`SuiteRow` per identity and test state."""
    by_identity = {ident.identity_id: [] for ident in identities}
    for psi in states:
        with memoized(roots=[psi]):
            for ident in identities:
                by_identity[ident.identity_id].append(identity_residual(ident, [psi]).residuals[0])
    rows = []
    for ident in identities:
        tol = exact_tol if ident.exact else derivative_tol
        rows += [SuiteRow(ident.identity_id, k, float(r), tol) for k, r in enumerate(by_identity[ident.identity_id])]
    return rows


def algebra_suite(grid, t: float = SUITE_TIME, states=None, exact_tol: float = EXACT_TOLERANCE,
                  derivative_tol: float = DERIVATIVE_TOLERANCE, include_diagonal: bool | None = None) -> list:
    """Kinematic and Galilei identities on ``grid`` over the default test states.

    On a grid with two configuration axes the single-axis brackets are
    skipped by default (``include_diagonal=None``): they are the same
    relations the one-axis grid checks at higher resolution, and the 4-axis
    transforms dominate the cost.
    """
    grid = grid if isinstance(grid, Grid) else build_grid(grid)
    if include_diagonal is None:
        include_diagonal = grid.config_dim == 1
    states = default_test_states(grid) if states is None else states
    identities = kinematic_identities(grid, include_diagonal) + galilei_identities(grid, t, include_diagonal)
    return run_identities(identities, states, exact_tol, derivative_tol)


def suite_grid(config_dim: int, n: int, half_width: float = 5.0) -> Grid:
    """Symmetric verification grid ``[-h, h)`` on every axis."""
    ext = [(-half_width, half_width)] * config_dim
    return build_grid(GridSpec(config_dim, (n,) * (2 * config_dim), ext, ext))
