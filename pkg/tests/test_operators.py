import numpy as np
import pytest

from kvn import spectral
from kvn.errors import AxisError, GridError
from kvn.grid import GridSpec, build_grid, gaussian_packet, inner_product
from kvn.operators import (
    OperatorIdentity,
    apply_multiplicative,
    apply_shift_generator,
    commutator,
    commutator_apply,
    coordinate,
    default_test_states,
    identity_operator,
    identity_residual,
    memoized,
    relative_norm,
    shift_generator,
    translation,
    zero_operator,
)

X, V = coordinate("x"), coordinate("v")
LX, LV = shift_generator("x"), shift_generator("v")


def _fd8(f, x, h):
    """8th-order centered first derivative of a callable."""
    c = [4 / 5, -1 / 5, 4 / 105, -1 / 280]
    return sum(ck * (f(x + (k + 1) * h) - f(x - (k + 1) * h)) for k, ck in enumerate(c)) / h


def test_coordinate_expectations(packet):
    assert inner_product(packet, apply_multiplicative("x", packet)).real == pytest.approx(0.0, abs=1e-8)
    assert inner_product(packet, apply_multiplicative("v", packet)).real == pytest.approx(2.0, abs=1e-8)


def test_multiplicative_operators_commute(packet):
    a = X(V(packet)).amplitudes
    b = V(X(packet)).amplitudes
    np.testing.assert_allclose(a, b, rtol=1e-15, atol=0)


def test_plane_wave_eigenfunction(grid64):
    k = grid64.wavenumbers[0][5]
    wave = np.exp(1j * k * grid64.coordinate("x")) * np.ones(grid64.shape)
    psi = gaussian_packet(grid64, (0, 0), (1, 1)).replace(wave)
    out = apply_shift_generator("x", psi).amplitudes
    np.testing.assert_allclose(out, k * wave, atol=1e-12)


def test_shift_generator_matches_finite_difference_oracle(grid64):
    x0, v0, sx, sv = 0.4, -0.2, 0.8, 0.6

    def amp(x, v):
        return np.exp(-((x - x0) ** 2) / (4 * sx**2) - (v - v0) ** 2 / (4 * sv**2))

    psi = gaussian_packet(grid64, (x0, v0), (sx, sv))
    x, v = grid64.coordinate("x"), grid64.coordinate("v")
    peak = np.unravel_index(np.argmax(psi.amplitudes.real), grid64.shape)
    scale = psi.amplitudes.real[peak] / amp(x, v)[peak]
    oracle = -1j * scale * _fd8(lambda s: amp(s, v), x, 0.01)
    got = apply_shift_generator("x", psi).amplitudes
    assert np.max(np.abs(got - oracle)) < 1e-6


def test_translation_moves_centroid(packet, grid64):
    a = 1.3
    moved = translation("x", a)(packet)
    mean = inner_product(moved, X(moved)).real
    assert mean == pytest.approx(a, abs=1e-8)


def test_translation_by_whole_cells_is_a_roll(grid64):
    # amplitude at the periodic seam is ~1e-12, which bounds the agreement
    packet = gaussian_packet(grid64, (0.5, 1.0), (1.0, 0.5))
    for axis, cells in (("x", 3), ("v", -2)):
        i = grid64.axis_index(axis)
        moved = spectral.translate(packet.amplitudes, grid64, axis, cells * grid64.spacing[i])
        np.testing.assert_allclose(moved, np.roll(packet.amplitudes, cells, axis=i), atol=1e-10)


@pytest.mark.parametrize(
    "a, b, expected, tol",
    [(X, LX, 1j, 1e-8), (V, LV, 1j, 1e-8), (X, LV, 0.0, 1e-10), (V, LX, 0.0, 1e-10), (LX, LV, 0.0, 1e-10)],
)
def test_canonical_commutators(grid64, a, b, expected, tol):
    for psi in default_test_states(grid64):
        out = commutator_apply(a, b, psi)
        assert relative_norm(out - psi * expected, psi) < tol


def test_linearity(grid64, rng):
    phi, psi = default_test_states(grid64, count=2)
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    op = X @ LX + 0.5 * (V @ LV) - LV
    lhs = op(phi * a + psi * b).amplitudes
    rhs = (op(phi) * a + op(psi) * b).amplitudes
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


@pytest.mark.parametrize("op", [X, V, LX, LV, X @ LV + LV @ X])
def test_weak_hermiticity(grid64, op):
    phi, psi = default_test_states(grid64, count=2)
    assert abs(inner_product(phi, op(psi)) - inner_product(op(phi), psi)) < 1e-8


def test_identity_residual_reports_per_state(grid64):
    states = default_test_states(grid64)
    ident = OperatorIdentity("xlambda", commutator(X, LX), 1j * identity_operator())
    report = identity_residual(ident, states)
    assert len(report.residuals) == len(states)
    assert report.max < 1e-8
    with pytest.raises(ValueError):
        identity_residual(ident, [])


def test_identity_residual_rejects_mixed_grids(grid64):
    other = build_grid(GridSpec(1, (32, 32), (-10, 10), (-5, 5)))
    states = default_test_states(grid64, 1) + default_test_states(other, 1)
    with pytest.raises(GridError):
        identity_residual(OperatorIdentity("z", X, X), states)


def test_position_generators_commute_in_two_dimensions(grid2d):
    ident = OperatorIdentity("lxly", commutator(shift_generator("x"), shift_generator("y")), zero_operator())
    assert identity_residual(ident, default_test_states(grid2d, 3)).max < 1e-10


def test_default_states_are_seeded_and_interior(grid64):
    a = default_test_states(grid64)
    b = default_test_states(grid64)
    assert len(a) == 5
    for s, t in zip(a, b):
        assert np.array_equal(s.amplitudes, t.amplitudes)
        assert abs(s.norm() - 1) < 1e-10
        assert np.max(np.abs(s.amplitudes[[0, -1], :])) < 1e-8
        assert np.max(np.abs(s.amplitudes[:, [0, -1]])) < 1e-8


def test_unknown_axis(packet):
    with pytest.raises(AxisError):
        apply_multiplicative("q", packet)
    with pytest.raises(AxisError):
        apply_shift_generator("q", packet)


def test_memoized_reuses_applications(packet):
    calls = []

    def act(psi):
        calls.append(1)
        return psi

    from kvn.operators import LinearOperator

    op = LinearOperator(act, "counted")
    with memoized():
        op(packet)
        op(packet)
    op(packet)
    assert len(calls) == 2


def test_flipped_sign_hook_breaks_canonical_bracket(packet):
    with spectral.flipped_lambda_sign():
        broken = relative_norm(commutator_apply(X, LX, packet) - packet * 1j, packet)
    restored = relative_norm(commutator_apply(X, LX, packet) - packet * 1j, packet)
    assert broken == pytest.approx(2.0, rel=1e-6)
    assert restored < 1e-8


def test_nyquist_symbol_zeroed(grid64):
    k = spectral.symbol(grid64, "x")
    assert k[32] == 0.0
    assert np.all(k[1:32] > 0)
