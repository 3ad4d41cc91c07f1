import numpy as np
import pytest

from kvn.analysis import centroid
from kvn.errors import GridError, MarginError
from kvn.galilei import (
    GroupElement,
    algebra_suite,
    apply_group_element,
    boost_generator,
    galilei_identities,
    rotation_generator_residual,
    run_identities,
    suite_grid,
)
from kvn.grid import gaussian_packet, inner_product
from kvn.liouvillian import LiouvillianSpec, build_liouvillian
from kvn.operators import commutator, default_test_states, identity_residual, OperatorIdentity, shift_generator, zero_operator


@pytest.fixture(scope="module")
def plane():
    """Two configuration axes, 32 points per axis, [-5, 5) everywhere."""
    return suite_grid(2, 32)


@pytest.fixture(scope="module")
def plane_packet(plane):
    return gaussian_packet(plane, ((1.0, 0.0), (0.0, 0.5)), (0.5, 0.5))


def test_space_translation_moves_centroid(grid64):
    psi = gaussian_packet(grid64, (0.0, 0.0), (0.5, 0.5))
    r, v = centroid(apply_group_element(GroupElement.space_translation(1.0), psi))
    assert r[0] == pytest.approx(1.0, abs=1e-8)
    assert v[0] == pytest.approx(0.0, abs=1e-8)


def test_velocity_translation_moves_velocity(grid64, packet):
    r, v = centroid(apply_group_element(GroupElement.velocity_translation(-1.5), packet))
    assert r[0] == pytest.approx(0.0, abs=1e-8)
    assert v[0] == pytest.approx(0.5, abs=1e-8)


def test_boost_moves_both_without_phase(grid64):
    x0, v0 = -0.5, 0.25
    psi = gaussian_packet(grid64, (x0, v0), (0.5, 0.5))
    out = apply_group_element(GroupElement.boost(0.5, 2.0), psi)
    r, v = centroid(out)
    assert r[0] == pytest.approx(x0 + 1.0, abs=1e-8)
    assert v[0] == pytest.approx(v0 + 0.5, abs=1e-8)
    # no phase factor: a real packet stays real
    assert np.max(np.abs(out.amplitudes.imag)) < 1e-12


def test_quarter_rotation(plane, plane_packet):
    r, v = centroid(apply_group_element(GroupElement.rotation(np.pi / 2), plane_packet))
    np.testing.assert_allclose(r, (0.0, 1.0), atol=1e-8)
    np.testing.assert_allclose(v, (-0.5, 0.0), atol=1e-8)


@pytest.mark.parametrize("g", [
    GroupElement.space_translation(1.3),
    GroupElement.velocity_translation(-0.7),
    GroupElement.boost(0.4, 1.5),
])
def test_actions_are_unitary_1d(grid64, packet, g):
    out = apply_group_element(g, packet)
    assert abs(out.norm() - packet.norm()) < 1e-10


def test_rotation_is_unitary(plane_packet):
    out = apply_group_element(GroupElement.rotation(0.9), plane_packet)
    assert abs(out.norm() - plane_packet.norm()) < 1e-10


def test_inner_products_preserved(grid64):
    a = gaussian_packet(grid64, (0.3, 0.5), (0.6, 0.6))
    b = gaussian_packet(grid64, (-0.2, 1.0), (0.5, 0.7))
    g = GroupElement.boost(0.3, 1.0)
    before = inner_product(a, b)
    after = inner_product(apply_group_element(g, a), apply_group_element(g, b))
    assert abs(after - before) < 1e-10


def test_translation_is_exponential_of_lambda(grid64, packet):
    a = 0.83
    n = grid64.shape[0]
    k = 2 * np.pi * np.fft.fftfreq(n, d=grid64.spacing[0])
    k[n // 2] = 0.0
    expected = np.fft.ifft(np.fft.fft(packet.amplitudes, axis=0) * np.exp(-1j * a * k)[:, None], axis=0)
    out = apply_group_element(GroupElement.space_translation(a), packet)
    assert np.max(np.abs(out.amplitudes - expected)) < 1e-14


def test_rotation_generator_realization(plane, plane_packet):
    assert rotation_generator_residual(plane_packet, 1e-4) < 1e-6


def test_boost_commutes_with_velocity_shift_exactly(plane):
    states = default_test_states(plane, count=2)
    for a in range(2):
        for b in range(2):
            ident = OperatorIdentity("Glv", commutator(boost_generator(a, 0.7), shift_generator(2 + b)),
                                     zero_operator(), True)
            assert identity_residual(ident, states).max < 1e-10


def test_boost_against_free_liouvillian(grid64):
    states = default_test_states(grid64)
    L = build_liouvillian(LiouvillianSpec.free(grid64))
    ident = OperatorIdentity("gl", commutator(boost_generator(0, 0.7), L), 1j * shift_generator(0))
    assert identity_residual(ident, states).max < 1e-8


def test_boost_and_translation_commute(grid64, packet):
    boost = GroupElement.boost(0.5, 1.2)
    shift = GroupElement.space_translation(-0.8)
    one = apply_group_element(boost, apply_group_element(shift, packet))
    two = apply_group_element(shift, apply_group_element(boost, packet))
    assert np.max(np.abs(one.amplitudes - two.amplitudes)) < 1e-10


def test_parameter_beyond_half_extent(grid64, packet):
    with pytest.raises(MarginError, match="'x'"):
        apply_group_element(GroupElement.space_translation(10.5), packet)
    with pytest.raises(MarginError, match="boost displacement"):
        apply_group_element(GroupElement.boost(1.0, 20.0), packet)


def test_translation_into_wall_is_detected(grid64):
    psi = gaussian_packet(grid64, (5.0, 0.0), (0.5, 0.5))
    with pytest.raises(MarginError):
        apply_group_element(GroupElement.space_translation(4.0), psi)


def test_rotation_needs_two_axes(grid64, packet):
    with pytest.raises(GridError):
        apply_group_element(GroupElement.rotation(0.1), packet)


def test_unknown_kind():
    with pytest.raises(ValueError):
        GroupElement("scaling", (1.0,))


def test_wrong_vector_length(plane, plane_packet):
    with pytest.raises(GridError):
        apply_group_element(GroupElement.space_translation(1.0), plane_packet)


def test_suite_one_axis_passes():
    rows = algebra_suite(suite_grid(1, 64))
    assert rows and all(r.passed for r in rows)
    ids = {r.identity_id for r in rows}
    assert {"galilei.gl[x]", "galilei.lambdaxL[x]", "galilei.Glambda[x,x]", "algebra.Xlambda[x]"} <= ids


def test_suite_plane_contains_rotation_rows(plane):
    rows = algebra_suite(plane)
    failed = [(r.identity_id, r.residual) for r in rows if not r.passed]
    assert not failed
    ids = {r.identity_id for r in rows}
    assert {"galilei.JL", "galilei.jx[x]", "galilei.jG[y]", "galilei.Glambda[x,y]"} <= ids


def test_central_charge_is_zero(grid64):
    rows = run_identities([i for i in galilei_identities(grid64) if i.identity_id.startswith("galilei.Glambda")],
                          default_test_states(grid64))
    assert max(r.residual for r in rows) < 1e-10


def test_flipped_lambda_is_caught(grid64):
    from kvn import spectral

    with spectral.flipped_lambda_sign():
        rows = algebra_suite(grid64)
    assert any(not r.passed and r.identity_id.startswith("algebra.Xlambda") for r in rows)
    assert any(not r.passed and r.identity_id.startswith("galilei.gl") for r in rows)
