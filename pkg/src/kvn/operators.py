"""Operator algebra on wavefunction fields.

The irreducible set consists of the multiplicative coordinates X and V and
the shift generators ``lambda_x = -i d/dx`` and ``lambda_v = -i d/dv``.
Operators compose with ``+``, ``-``, scalar ``*`` and ``@`` (composition,
right operand applied first).  Identities between operator expressions are
checked in weak form: both sides are applied to smooth, interior-supported
test states and the residual norm is reported.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import spectral
from .errors import GridError
from .grid import Grid, WavefunctionField, gaussian_packet

_memo_state = threading.local()


@contextlib.contextmanager
def memoized(roots=None):
    """Reuse operator applications within the block.

    Results are keyed on the identity of the operator object and of the
    input field.  With ``roots`` only applications to those fields are
    cached, which bounds memory when many composite expressions are applied
    to the same few states.  Cached inputs are kept alive, so identities are
    never recycled while the block is active.
    """
    outer = getattr(_memo_state, "cache", None)
    outer_roots = getattr(_memo_state, "roots", None)
    _memo_state.cache = {} if outer is None else outer
    _memo_state.roots = None if roots is None else {id(r): r for r in roots}
    try:
        yield
    finally:
        _memo_state.roots = outer_roots
        if outer is None:
            _memo_state.cache = None


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """A linear map WavefunctionField -> WavefunctionField."""

    action: Callable[[WavefunctionField], WavefunctionField]
    label: str
    hermitian_hint: bool = False

    def __call__(self, psi: WavefunctionField) -> WavefunctionField:
        cache = getattr(_memo_state, "cache", None)
        roots = getattr(_memo_state, "roots", None)
        if cache is None or (roots is not None and id(psi) not in roots):
            return self.action(psi)
        key = (id(self), id(psi))
        hit = cache.get(key)
        if hit is None:
            hit = (self, psi, self.action(psi))
            cache[key] = hit
        return hit[2]

    def __repr__(self):
        return f"LinearOperator({self.label})"

    def __add__(self, other):
        if not isinstance(other, LinearOperator):
            return NotImplemented
        return LinearOperator(
            lambda psi: self(psi) + other(psi),
            f"({self.label} + {other.label})",
            self.hermitian_hint and other.hermitian_hint,
        )

    def __sub__(self, other):
        if not isinstance(other, LinearOperator):
            return NotImplemented
        return LinearOperator(
            lambda psi: self(psi) - other(psi),
            f"({self.label} - {other.label})",
            self.hermitian_hint and other.hermitian_hint,
        )

    def __neg__(self):
        return LinearOperator(lambda psi: -self(psi), f"-{self.label}", self.hermitian_hint)

    def __mul__(self, scalar):
        if isinstance(scalar, LinearOperator) or not np.isscalar(scalar):
            return NotImplemented
        real = np.isrealobj(scalar)
        return LinearOperator(
            lambda psi: self(psi) * scalar, f"{_fmt(scalar)}*{self.label}", self.hermitian_hint and real
        )

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, LinearOperator):
            return NotImplemented
        return LinearOperator(lambda psi: self(other(psi)), f"{self.label} {other.label}")


def _fmt(scalar):
    if np.iscomplexobj(scalar) and complex(scalar).real == 0:
        return f"{complex(scalar).imag:g}i"
    return f"{scalar:g}" if np.isrealobj(scalar) else f"({scalar})"


def identity_operator() -> LinearOperator:
    return LinearOperator(lambda psi: psi, "1", True)


def zero_operator() -> LinearOperator:
    return LinearOperator(lambda psi: psi.replace(np.zeros_like(psi.amplitudes)), "0", True)


def multiplication(values: Callable[[Grid], np.ndarray], label: str, hermitian: bool = True) -> LinearOperator:
    """Pointwise multiplication by ``values(grid)`` (broadcastable array)."""

    def act(psi):
        return psi.replace(psi.amplitudes * values(psi.grid))

    return LinearOperator(act, label, hermitian)


def coordinate(axis) -> LinearOperator:
    """Multiplication by the coordinate of a named axis (X, Y, V_x, ...)."""
    return multiplication(lambda grid: grid.coordinate(axis), _axis_label("", axis))


def shift_generator(axis) -> LinearOperator:
    """``-i d/d(axis)``, realized spectrally."""

    def act(psi):
        return psi.replace(spectral.lambda_apply(psi.amplitudes, psi.grid, axis))

    return LinearOperator(act, _axis_label("lambda_", axis), True)


def translation(axis, amount) -> LinearOperator:
    """``exp(-i amount lambda_axis)``: exact spectral translation."""

    def act(psi):
        return psi.replace(spectral.translate(psi.amplitudes, psi.grid, axis, amount))

    return LinearOperator(act, f"exp(-i {amount} lambda_{axis})")


def _axis_label(prefix, axis):
    return f"{prefix}{axis}" if prefix else f"{str(axis).upper()}"


def apply_multiplicative(symbol, psi: WavefunctionField) -> WavefunctionField:
    """Multiply ``psi`` by the coordinate of axis ``symbol``."""
    return psi.replace(psi.amplitudes * psi.grid.coordinate(symbol))


def apply_shift_generator(symbol, psi: WavefunctionField) -> WavefunctionField:
    """Apply ``-i d/d(symbol)`` to ``psi``."""
    return psi.replace(spectral.lambda_apply(psi.amplitudes, psi.grid, symbol))


def commutator(a: LinearOperator, b: LinearOperator) -> LinearOperator:
    return LinearOperator(lambda psi: commutator_apply(a, b, psi), f"[{a.label}, {b.label}]")


def commutator_apply(a: LinearOperator, b: LinearOperator, psi: WavefunctionField) -> WavefunctionField:
    """``A(B(psi)) - B(A(psi))``; identically zero when ``a is b``."""
    if a is b:
        return psi.replace(np.zeros_like(psi.amplitudes))
    return a(b(psi)) - b(a(psi))


def relative_norm(diff: WavefunctionField, ref: WavefunctionField) -> float:
    scale = ref.norm()
    return diff.norm() / scale if scale > 0 else diff.norm()


@dataclass(frozen=True)
class OperatorIdentity:
    """A postulated relation ``lhs == rhs`` between operator expressions.

    ``exact`` marks identities whose evaluation involves no spectral
    derivative of a product; those are expected to hold to round-off.
    """

    identity_id: str
    lhs: LinearOperator
    rhs: LinearOperator
    exact: bool = False
    description: str = ""


@dataclass(frozen=True)
class IdentityReport:
    identity_id: str
    residuals: tuple

    @property
    def max(self) -> float:
        return max(self.residuals)


def identity_residual(identity: OperatorIdentity, test_states: Sequence[WavefunctionField]) -> IdentityReport:
    """Relative residuals ``||(lhs - rhs) psi|| / ||psi||`` per test state."""
    if not test_states:
        raise ValueError("identity_residual needs at least one test state")
    grid = test_states[0].grid
    out = []
    for psi in test_states:
        if psi.grid != grid:
            raise GridError("test states live on different grids")
        out.append(relative_norm(identity.lhs(psi) - identity.rhs(psi), psi))
    return IdentityReport(identity.identity_id, tuple(out))


#: Test-state widths and centers as fractions of each axis half-width.
TEST_WIDTH_RANGE = (0.09, 0.10)
TEST_CENTER_RANGE = 0.05


def default_test_states(grid, count: int = 5, seed: int = 20240611) -> list:
    """Seeded Gaussian packets with randomized interior centers and widths.

    Widths are drawn per axis from ``TEST_WIDTH_RANGE`` times the axis
    half-width and centers from within ``TEST_CENTER_RANGE`` of the axis
    midpoint, so every packet has a wide amplitude margin and is resolved by
    several grid cells.
    """
    rng = np.random.default_rng(seed)
    d = grid.config_dim
    half = grid.widths / 2.0
    mid = (grid.lower + grid.upper) / 2.0
    states = []
    for _ in range(count):
        widths = rng.uniform(*TEST_WIDTH_RANGE, size=grid.ndim) * half
        centers = mid + rng.uniform(-TEST_CENTER_RANGE, TEST_CENTER_RANGE, size=grid.ndim) * half
        # random smooth phase makes the states genuinely complex
        psi = gaussian_packet(grid, (centers[:d], centers[d:]), (widths[:d], widths[d:]))
        kick = rng.uniform(-1.0, 1.0, size=grid.ndim)
        phase = sum(kick[i] * (grid.coordinate(i) - mid[i]) / (8.0 * widths[i]) for i in range(grid.ndim))
        states.append(psi.replace(psi.amplitudes * np.exp(1j * phase)))
    return states
