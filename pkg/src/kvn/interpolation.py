"""Periodic tensor-product interpolation at arbitrary points.

Two families are provided:

* B-splines of odd degree (1, 3, 5).  Degree > 1 needs the coefficient
  prefilter, delegated to :func:`scipy.ndimage.spline_filter1d` in
  ``grid-wrap`` mode.
* Cubic Lagrange (4-point stencil, no prefilter).

Evaluation is a pure gather: every output point reads a small stencil of
coefficients, so the kernels parallelize over output points and the result
does not depend on the thread count.
"""

from __future__ import annotations

from math import comb, factorial

import numba
import numpy as np
from scipy.ndimage import spline_filter1d

BSPLINE = "bspline"
LAGRANGE = "lagrange"


def stencil_offsets(order: int, kind: str = BSPLINE) -> np.ndarray:
    """Integer offsets, relative to ``floor(position)``, read by the stencil."""
    if kind == LAGRANGE:
        if order != 3:
            raise ValueError("Lagrange interpolation is available for order 3 only")
        return np.arange(-1, 3)
    if order not in (1, 3, 5):
        raise ValueError(f"unsupported B-spline order {order}; use 1, 3 or 5")
    half = (order + 1) // 2
    return np.arange(-half + 1, half + 1)


@numba.njit(parallel=True, cache=True)
def _bspline_weights(frac, offsets, coeffs, n, inv_fact):
    """Centered cardinal B-spline of degree ``n`` at ``frac - offsets`` (truncated-power form)."""
    npts = frac.shape[0]
    s = offsets.shape[0]
    out = np.empty((npts, s))
    half = (n + 1) / 2.0
    for p in numba.prange(npts):
        for j in range(s):
            t = frac[p] - offsets[j] + half
            acc = 0.0
            for k in range(n + 2):
                u = t - k
                if u > 0.0:
                    acc += coeffs[k] * u**n
            out[p, j] = acc * inv_fact
    return out


def stencil_weights(frac: np.ndarray, order: int, kind: str = BSPLINE) -> np.ndarray:
    """Weights for fractional positions ``frac`` in [0, 1); shape (..., S)."""
    offsets = stencil_offsets(order, kind)
    a = np.asarray(frac, dtype=float)[..., None]
    if kind == LAGRANGE:
        nodes = offsets.astype(float)
        w = np.ones(a.shape[:-1] + (len(nodes),))
        for j, xj in enumerate(nodes):
            for m, xm in enumerate(nodes):
                if m != j:
                    w[..., j] *= (a[..., 0] - xm) / (xj - xm)
        return w
    flat = np.ascontiguousarray(a.reshape(-1))
    coeffs = np.array([(-1) ** k * comb(order + 1, k) for k in range(order + 2)], dtype=float)
    w = _bspline_weights(flat, offsets.astype(float), coeffs, order, 1.0 / factorial(order))
    return w.reshape(a.shape[:-1] + (len(offsets),))


def prefilter(values: np.ndarray, axes, order: int, kind: str = BSPLINE) -> np.ndarray:
    """Interpolation coefficients of a periodic complex array along ``axes``."""
    if kind == LAGRANGE or order == 1:
        return np.asarray(values, dtype=np.complex128)
    re = np.array(values.real, dtype=float)
    im = np.array(values.imag, dtype=float)
    for ax in axes:
        re = spline_filter1d(re, order=order, axis=ax, mode="grid-wrap")
        im = spline_filter1d(im, order=order, axis=ax, mode="grid-wrap")
    return re + 1j * im


def locate(positions: np.ndarray, lower: float, spacing: float, n: int, order: int, kind: str = BSPLINE):
    """Base index (wrapped, already offset by the first stencil entry) and weights."""
    s = (np.asarray(positions, dtype=float) - lower) / spacing
    base = np.floor(s)
    w = stencil_weights(s - base, order, kind)
    first = stencil_offsets(order, kind)[0]
    idx = np.mod(base.astype(np.int64) + first, n)
    return idx, w


@numba.njit(parallel=True, cache=True)
def _gather2(coef, i0, i1, w0, w1):
    n0, n1 = coef.shape
    npts = i0.shape[0]
    s0 = w0.shape[1]
    s1 = w1.shape[1]
    out = np.empty(npts, dtype=np.complex128)
    for p in numba.prange(npts):
        acc = 0j
        for a in range(s0):
            ia = (i0[p] + a) % n0
            inner = 0j
            for b in range(s1):
                inner += w1[p, b] * coef[ia, (i1[p] + b) % n1]
            acc += w0[p, a] * inner
        out[p] = acc
    return out


@numba.njit(parallel=True, cache=True)
def _gather4(coef, i0, i1, i2, i3, w0, w1, w2, w3):
    n0, n1, n2, n3 = coef.shape
    flat = coef.ravel()
    npts = i0.shape[0]
    s = w0.shape[1]
    out = np.empty(npts, dtype=np.complex128)
    for p in numba.prange(npts):
        # flat offsets of the wrapped stencil rows along each axis
        ja = np.empty(s, dtype=np.int64)
        jb = np.empty(s, dtype=np.int64)
        jc = np.empty(s, dtype=np.int64)
        je = np.empty(s, dtype=np.int64)
        for k in range(s):
            ja[k] = ((i0[p] + k) % n0) * (n1 * n2 * n3)
            jb[k] = ((i1[p] + k) % n1) * (n2 * n3)
            jc[k] = ((i2[p] + k) % n2) * n3
            je[k] = (i3[p] + k) % n3
        re = 0.0
        im = 0.0
        for a in range(s):
            for b in range(s):
                wab = w0[p, a] * w1[p, b]
                base_ab = ja[a] + jb[b]
                for c in range(s):
                    base = base_ab + jc[c]
                    inner_re = 0.0
                    inner_im = 0.0
                    for e in range(s):
                        v = flat[base + je[e]]
                        inner_re += w3[p, e] * v.real
                        inner_im += w3[p, e] * v.imag
                    wc = wab * w2[p, c]
                    re += wc * inner_re
                    im += wc * inner_im
        out[p] = complex(re, im)
    return out


class Interpolator:
    """Precomputed gather from a fixed set of evaluation points.

    ``points`` is a sequence of per-axis coordinate arrays, all with the
    grid shape (the evaluation point for every output grid point).
    """

    def __init__(self, grid, points, order: int = 3, kind: str = BSPLINE):
        if grid.ndim not in (2, 4):
            raise ValueError("interpolation supports 2-axis and 4-axis grids")
        self.grid = grid
        self.order = order
        self.kind = kind
        self._idx = []
        self._w = []
        for a in range(grid.ndim):
            idx, w = locate(np.ravel(points[a]), grid.lower[a], grid.spacing[a], grid.shape[a], order, kind)
            self._idx.append(np.ascontiguousarray(idx))
            self._w.append(np.ascontiguousarray(w))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        coef = prefilter(values, range(self.grid.ndim), self.order, self.kind)
        coef = np.ascontiguousarray(coef)
        if self.grid.ndim == 2:
            out = _gather2(coef, *self._idx, *self._w)
        else:
            out = _gather4(coef, *self._idx, *self._w)
        return out.reshape(self.grid.shape)


class FactorizedInterpolator:
    """Gather for 4-axis flows whose velocity feet do not depend on position.

    The foot of ``(r, v)`` is ``(r - s(v), u(v))``.  The tensor-product
    evaluation then separates into a velocity-plane gather shared by all
    positions followed by per-velocity line gathers along each position
    axis, which is identical to the full 4-d stencil sum at a fraction of
    the cost.
    """

    def __init__(self, grid, velocity_feet, position_shifts, order: int = 3, kind: str = BSPLINE):
        if grid.ndim != 4:
            raise ValueError("factorized interpolation needs a 4-axis grid")
        self.grid = grid
        self.order = order
        self.kind = kind
        nv = grid.shape[2] * grid.shape[3]
        self._vidx, self._vw = [], []
        for a in (2, 3):
            idx, w = locate(np.ravel(velocity_feet[a - 2]), grid.lower[a], grid.spacing[a], grid.shape[a], order, kind)
            self._vidx.append(np.ascontiguousarray(idx))
            self._vw.append(np.ascontiguousarray(w))
        self._pidx, self._pw = [], []
        for a in (0, 1):
            # foot position x - s(v); relative to the output x_j it is a pure index shift
            shift = np.ravel(position_shifts[a]) / grid.spacing[a]
            base = np.floor(-shift)
            w = stencil_weights(-shift - base, order, kind)
            first = stencil_offsets(order, kind)[0]
            self._pidx.append(base.astype(np.int64) + first)
            self._pw.append(np.ascontiguousarray(w))
        self._nv = nv

    def __call__(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        n0, n1, n2, n3 = g.shape
        coef = prefilter(values, range(4), self.order, self.kind)
        # velocity-plane gather: treat (x, y) as a batch of planes
        planes = np.ascontiguousarray(coef.reshape(n0 * n1, n2, n3).transpose(1, 2, 0))
        h = _gather_planes(planes, self._vidx[0], self._vidx[1], self._vw[0], self._vw[1])
        # h has shape (n2*n3, n0*n1); now shift along x then y per velocity point
        h = h.reshape(self._nv, n0, n1)
        h = _shift_lines(h, self._pidx[0], self._pw[0], axis=0)
        h = _shift_lines(h, self._pidx[1], self._pw[1], axis=1)
        return np.ascontiguousarray(h.reshape(n2, n3, n0, n1).transpose(2, 3, 0, 1))


@numba.njit(parallel=True, cache=True)
def _gather_planes(planes, i0, i1, w0, w1):
    n0, n1, nb = planes.shape
    npts = i0.shape[0]
    s = w0.shape[1]
    out = np.empty((npts, nb), dtype=np.complex128)
    for p in numba.prange(npts):
        for q in range(nb):
            out[p, q] = 0j
        for a in range(s):
            ia = (i0[p] + a) % n0
            for b in range(s):
                ib = (i1[p] + b) % n1
                wab = w0[p, a] * w1[p, b]
                for q in range(nb):
                    out[p, q] += wab * planes[ia, ib, q]
    return out


@numba.njit(parallel=True, cache=True)
def _shift_x(h, idx, w):
    nv, n0, n1 = h.shape
    s = w.shape[1]
    out = np.empty_like(h)
    for m in numba.prange(nv):
        for i in range(n0):
            for j in range(n1):
                acc = 0j
                for c in range(s):
                    acc += w[m, c] * h[m, (i + idx[m] + c) % n0, j]
                out[m, i, j] = acc
    return out


@numba.njit(parallel=True, cache=True)
def _shift_y(h, idx, w):
    nv, n0, n1 = h.shape
    s = w.shape[1]
    out = np.empty_like(h)
    for m in numba.prange(nv):
        for i in range(n0):
            for j in range(n1):
                acc = 0j
                for c in range(s):
                    acc += w[m, c] * h[m, i, (j + idx[m] + c) % n1]
                out[m, i, j] = acc
    return out


def _shift_lines(h, idx, w, axis):
    return _shift_x(h, idx, w) if axis == 0 else _shift_y(h, idx, w)
