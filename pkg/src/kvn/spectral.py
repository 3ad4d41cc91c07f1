"""FFT kernels: spectral derivative and exact translations along one axis.

The shift generator ``lambda = -i d/dx`` is diagonal in Fourier space with
eigenvalue ``k``.  The Nyquist eigenvalue is set to zero so that the
discrete operator stays Hermitian; the same symbol is used in the
translation ``exp(-i a lambda)``, which then maps real arrays to real arrays
and is exactly unitary.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import scipy.fft

_WORKERS = 1
# Sign applied to every derivative symbol.  Only the fault-injection hook of
# the verification driver changes it, to prove the suite catches a broken
# shift generator.
_LAMBDA_SIGN = 1.0


def set_workers(n: int) -> None:
    """Number of threads used by the FFT kernels."""
    global _WORKERS
    _WORKERS = max(1, int(n))


@contextmanager
def flipped_lambda_sign():
    """Temporarily replace ``lambda`` by ``-lambda`` (test hook)."""
    global _LAMBDA_SIGN
    old = _LAMBDA_SIGN
    _LAMBDA_SIGN = -old
    try:
        yield
    finally:
        _LAMBDA_SIGN = old


def symbol(grid, axis) -> np.ndarray:
    """Derivative symbol k along ``axis`` with the Nyquist entry zeroed."""
    i = grid.axis_index(axis)
    k = np.array(grid.wavenumbers[i])
    n = grid.shape[i]
    k[n // 2] = 0.0
    return _LAMBDA_SIGN * k


def lambda_apply(values: np.ndarray, grid, axis) -> np.ndarray:
    """Apply ``-i d/d(axis)`` spectrally to an amplitude array."""
    i = grid.axis_index(axis)
    spec = scipy.fft.fft(values, axis=i, workers=_WORKERS)
    spec *= grid.broadcast(symbol(grid, i), i)
    return scipy.fft.ifft(spec, axis=i, overwrite_x=True, workers=_WORKERS)


def translate(values: np.ndarray, grid, axis, amount) -> np.ndarray:
    """Evaluate ``values`` at ``coordinate - amount`` along ``axis``.

    ``amount`` is a scalar or an array that broadcasts against the grid with
    size one along ``axis``; in the second case every grid line is shifted by
    its own distance (a shear).  Equivalent to ``exp(-i amount lambda)``.
    Real input is shifted with real transforms and stays real; besides
    halving the work this keeps the round-off norm drift of long split-step
    runs well below that of the complex transforms.
    """
    i = grid.axis_index(axis)
    amount = np.asarray(amount, dtype=float)
    if amount.ndim and amount.shape[i] != 1:
        raise ValueError("shift amount must not vary along the shifted axis")
    real = not np.iscomplexobj(values)
    if not np.any(amount):
        return np.array(values, dtype=float if real else np.complex128)
    if real:
        n = grid.shape[i]
        k = symbol(grid, i)[: n // 2 + 1]
        spec = scipy.fft.rfft(values, axis=i, workers=_WORKERS)
        spec *= np.exp(-1j * grid.broadcast(k, i) * amount)
        return scipy.fft.irfft(spec, n=n, axis=i, overwrite_x=True, workers=_WORKERS)
    k = grid.broadcast(symbol(grid, i), i)
    spec = scipy.fft.fft(values, axis=i, workers=_WORKERS)
    spec *= np.exp(-1j * k * amount)
    return scipy.fft.ifft(spec, axis=i, overwrite_x=True, workers=_WORKERS)


def rotate(values: np.ndarray, grid, axis_a, axis_b, angle: float, scale: float = 1.0) -> np.ndarray:
    """Move the field by a counterclockwise rotation in the ``(a, b / scale)`` plane.

    The result is ``values(R(-angle) z)``.  The rotation is split into pieces
    of at most a quarter turn, each realized exactly as three shears
    ``R = S_a S_b S_a`` with ``S_a: a -> a - tan(phi/2) b`` and
    ``S_b: b -> b + sin(phi) a``.
    """
    ia, ib = grid.axis_index(axis_a), grid.axis_index(axis_b)
    pieces = max(1, int(np.ceil(abs(angle) / (np.pi / 2) - 1e-12)))
    phi = angle / pieces
    t = np.tan(phi / 2.0)
    s = np.sin(phi)
    a = grid.coordinate(ia)
    b = grid.coordinate(ib)
    out = values
    for _ in range(pieces):
        out = translate(out, grid, ia, -t * b / scale)
        out = translate(out, grid, ib, s * a * scale)
        out = translate(out, grid, ia, -t * b / scale)
    return out
