import numpy as np
import pytest

from kvn.errors import ForceError, GridError
from kvn.forces import (
    ForceField,
    force_from_potentials,
    harmonic_coupling,
    harmonic_force,
    linear_drag,
    quadratic,
    uniform_gravity,
)
from kvn.grid import GridSpec, build_grid, gaussian_packet, inner_product
from kvn.liouvillian import (
    LiouvillianSpec,
    build_liouvillian,
    lagrangian_superop_residual,
    two_particle_force_constraint,
    two_particle_grid,
    two_particle_operators,
)
from kvn.operators import (
    commutator_apply,
    coordinate,
    default_test_states,
    relative_norm,
    shift_generator,
)


@pytest.fixture(scope="module")
def states64(grid64):
    return default_test_states(grid64)


@pytest.fixture(scope="module")
def pair_grid():
    return two_particle_grid(32, (-5.0, 5.0), (-5.0, 5.0))


def _pair_states(grid, count=2, seed=5):
    """Packets of width 0.5 on the 32^4 box of half-width 5.

    That width balances the amplitude left at the periodic seam against the
    spectral content at the Nyquist wavenumber (both near exp(-25)), which
    is what round-off level brackets need at this resolution.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.uniform(-0.1, 0.1, 4)
        psi = gaussian_packet(grid, (c[:2], c[2:]), (0.5, 0.5))
        phase = sum(rng.uniform(-0.3, 0.3) * grid.coordinate(i) for i in range(4))
        out.append(psi.replace(psi.amplitudes * np.exp(1j * phase)))
    return out


def _residual(op_a, op_b, states):
    return max(relative_norm(op_a(s) - op_b(s), s) for s in states)


def test_free_liouvillian_against_analytic_derivative(grid64):
    x0, v0, sx, sv = 0.5, 1.0, 0.8, 0.6
    psi = gaussian_packet(grid64, (x0, v0), (sx, sv))
    x, v = grid64.coordinate("x"), grid64.coordinate("v")
    expected = v * (-1j) * (-(x - x0) / (2 * sx**2)) * psi.amplitudes
    out = build_liouvillian(LiouvillianSpec.free(grid64))(psi).amplitudes
    assert np.max(np.abs(out - expected)) < 1e-8


def test_projectile_liouvillian_term_by_term(grid2d):
    g = 9.8
    L = build_liouvillian(LiouvillianSpec.forced(grid2d, uniform_gravity(2, g)))
    composed = (coordinate("vx") @ shift_generator("x") + coordinate("vy") @ shift_generator("y")
                - g * shift_generator("vy"))
    states = default_test_states(grid2d, 2)
    assert _residual(L, composed, states) < 1e-10


def test_harmonic_liouvillian_term_by_term(grid64, states64):
    k, m = 4.0, 2.0
    L = build_liouvillian(LiouvillianSpec.forced(grid64, harmonic_force(1, k), m))
    composed = coordinate("v") @ shift_generator("x") - (k / m) * (coordinate("x") @ shift_generator("v"))
    assert _residual(L, composed, states64) < 1e-10


@pytest.mark.parametrize(
    "force",
    [None, harmonic_force(1, 2.0), linear_drag(1, 0.3), force_from_potentials(quadratic(1, 1.5)) + linear_drag(1, 0.2)],
    ids=["free", "harmonic", "drag", "quadratic+drag"],
)
def test_dynamical_brackets_and_hermiticity(grid64, states64, force):
    m = 1.5
    spec = LiouvillianSpec.free(grid64) if force is None else LiouvillianSpec.forced(grid64, force, m)
    L = build_liouvillian(spec)
    X, V = coordinate("x"), coordinate("v")
    for psi in states64:
        assert relative_norm(1j * commutator_apply(L, X, psi) - V(psi), psi) < 1e-8
        target = psi * 0.0 if force is None else psi.replace(force.on_grid(grid64)[0] * psi.amplitudes / m)
        assert relative_norm(1j * commutator_apply(L, V, psi) - target, psi) < 1e-6
    phi, psi = states64[:2]
    assert abs(inner_product(phi, L(psi)) - inner_product(L(phi), psi)) < 1e-8


def test_dimension_mismatch(grid64):
    with pytest.raises(ForceError):
        LiouvillianSpec.forced(grid64, uniform_gravity(2))
    with pytest.raises(ForceError):
        LiouvillianSpec.forced(grid64, uniform_gravity(1), mass=0.0)
    with pytest.raises(GridError):
        LiouvillianSpec.two_particle(grid64, lambda r, v: 0.0, lambda r, v: 0.0)


def test_state_on_other_grid_rejected(grid64, grid2d):
    L = build_liouvillian(LiouvillianSpec.free(grid64))
    with pytest.raises(GridError):
        L(default_test_states(grid2d, 1)[0])


def test_lagrangian_conservative_remainder_vanishes(grid64, states64):
    p = quadratic(1, 2.0)
    res = lagrangian_superop_residual(p, harmonic_force(1, 2.0), states64[0])
    assert max(res) < 1e-6


def test_lagrangian_drag_remainder(grid64, states64):
    p = quadratic(1, 2.0)
    total = harmonic_force(1, 2.0) + linear_drag(1, 0.4)
    for psi in states64[:2]:
        assert max(lagrangian_superop_residual(p, total, psi)) < 1e-6


def test_force_constraint_cases():
    k, gamma = 1.3, 0.7
    assert two_particle_force_constraint(lambda r, v: -k * (r[0] - r[1]), lambda r, v: k * (r[0] - r[1])).passed
    bad = two_particle_force_constraint(lambda r, v: -k * (r[0] + r[1]), lambda r, v: k * (r[0] + r[1]))
    assert not bad.passed and bad.translation_deviation > 1e-8
    assert two_particle_force_constraint(lambda r, v: -gamma * (v[0] - v[1]), lambda r, v: gamma * (v[0] - v[1])).passed
    boost = two_particle_force_constraint(lambda r, v: -gamma * v[0], lambda r, v: 0 * v[1])
    assert not boost.passed and boost.boost_deviation > 1e-8


def test_two_particle_equations_of_motion(pair_grid):
    m1, m2, k = 1.0, 2.0, 0.8
    f1, f2 = harmonic_coupling(k).components
    spec = LiouvillianSpec.two_particle(
        pair_grid, ForceField((f1,), False), ForceField((f2,), False), m1, m2)
    L = build_liouvillian(spec)
    forces = harmonic_coupling(k).on_grid(pair_grid)
    states = _pair_states(pair_grid)
    for psi in states:
        for i, (axis, m) in enumerate((("v1", m1), ("v2", m2))):
            target = psi.replace(forces[i] * psi.amplitudes / m)
            assert relative_norm(1j * commutator_apply(L, coordinate(axis), psi) - target, psi) < 1e-6
        for i, axis in enumerate(("x1", "x2")):
            target = coordinate(("v1", "v2")[i])(psi)
            assert relative_norm(1j * commutator_apply(L, coordinate(axis), psi) - target, psi) < 1e-8


def test_centre_of_mass_and_relative_brackets(pair_grid):
    ops = two_particle_operators(1.0, 3.0)
    coords = ("R_cm", "V_cm", "R_rel", "V_rel")
    gens = ("lambda_r_cm", "lambda_v_cm", "lambda_r_rel", "lambda_v_rel")
    states = _pair_states(pair_grid)
    for i, c in enumerate(coords):
        for j, g in enumerate(gens):
            expected = 1j if i == j else 0.0
            for psi in states:
                res = commutator_apply(ops[c], ops[g], psi) - psi * expected
                assert relative_norm(res, psi) < 1e-8, (c, g)
