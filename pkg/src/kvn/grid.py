"""Discretized position-velocity space, state storage and initial states.

A grid covers ``config_dim`` position axes followed by the same number of
velocity axes.  Every axis is periodic and left-edge sampled,
``x_j = x_min + j * dx`` with ``dx = (x_max - x_min) / N``.  Amplitude arrays
are stored as dense N-d arrays in row-major order with the position axes
first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AxisError, GridError, MarginError

#: Default ceiling on the number of grid points (64**4 complex doubles, 256 MiB).
DEFAULT_MAX_POINTS = 2**24

#: Distance from every boundary, in widths, required of a Gaussian packet.
PACKET_MARGIN = 5.0

DEFAULT_AXIS_NAMES = {
    1: ("x", "v"),
    2: ("x", "y", "vx", "vy"),
}

TWO_PARTICLE_AXIS_NAMES = ("x1", "x2", "v1", "v2")

VELOCITY = "velocity"
MOMENTUM = "momentum"


def _as_interval(value, label):
    lo, hi = (float(v) for v in value)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise GridError(f"{label} must be an interval of positive width, got {value!r}")
    return (lo, hi)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular periodic box in position-velocity space.

    Parameters
    ----------
    config_dim : int
        Configuration-space dimension d (1 or 2).
    points_per_axis : sequence of int
        2d point counts, positions first.  Each must be a power of two >= 8.
    position_extent, velocity_extent : sequence of (lo, hi)
        d half-open intervals each.
    axis_names : sequence of str, optional
        Names for the 2d axes.  Defaults to ``x, v`` or ``x, y, vx, vy``.
    max_points : int
        Memory cap on the total number of points.
    """

    config_dim: int
    points_per_axis: tuple
    position_extent: tuple
    velocity_extent: tuple
    periodic: bool = True
    axis_names: tuple | None = None
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        d = int(self.config_dim)
        if d not in (1, 2):
            raise GridError(f"config_dim must be 1 or 2, got {self.config_dim!r}")
        counts = tuple(int(n) for n in self.points_per_axis)
        if len(counts) != 2 * d:
            raise GridError(f"expected {2 * d} point counts, got {len(counts)}")
        for n in counts:
            if n < 8 or n & (n - 1):
                raise GridError(f"axis point count {n} is not a power of two >= 8")
        pos = tuple(_as_interval(e, "position_extent") for e in _nested(self.position_extent, d))
        vel = tuple(_as_interval(e, "velocity_extent") for e in _nested(self.velocity_extent, d))
        if not self.periodic:
            raise GridError("only periodic grids are supported")
        names = self.axis_names or DEFAULT_AXIS_NAMES[d]
        names = tuple(str(n) for n in names)
        if len(names) != 2 * d or len(set(names)) != len(names):
            raise GridError(f"axis_names must be {2 * d} distinct names, got {names!r}")
        total = int(np.prod(counts, dtype=np.int64))
        if total > self.max_points:
            raise GridError(f"grid has {total} points, above the cap of {self.max_points}")
        object.__setattr__(self, "config_dim", d)
        object.__setattr__(self, "points_per_axis", counts)
        object.__setattr__(self, "position_extent", pos)
        object.__setattr__(self, "velocity_extent", vel)
        object.__setattr__(self, "axis_names", names)

    @classmethod
    def uniform(cls, config_dim, n, position_extent, velocity_extent, **kwargs):
        """Same point count ``n`` on every axis."""
        return cls(config_dim, (n,) * (2 * config_dim), position_extent, velocity_extent, **kwargs)

    @property
    def extents(self):
        return self.position_extent + self.velocity_extent


def _nested(extent, d):
    """Accept a bare (lo, hi) pair for d == 1."""
    extent = tuple(extent)
    if d == 1 and len(extent) == 2 and np.isscalar(extent[0]):
        return (extent,)
    if len(extent) != d:
        raise GridError(f"expected {d} intervals, got {len(extent)}")
    return extent


class Grid:
    """Coordinate and wavenumber arrays for a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.config_dim = spec.config_dim
        self.shape = spec.points_per_axis
        self.ndim = len(self.shape)
        self.axis_names = spec.axis_names
        self.size = int(np.prod(self.shape, dtype=np.int64))
        self.lower = np.array([lo for lo, _ in spec.extents])
        self.upper = np.array([hi for _, hi in spec.extents])
        self.widths = self.upper - self.lower
        self.spacing = self.widths / np.array(self.shape)
        self.coords = tuple(
            lo + dx * np.arange(n) for lo, dx, n in zip(self.lower, self.spacing, self.shape)
        )
        # standard FFT ordering, Nyquist entry included (value -pi/dx)
        self.wavenumbers = tuple(
            2.0 * np.pi * np.fft.fftfreq(n, d=dx) for n, dx in zip(self.shape, self.spacing)
        )
        self.cell_volume = float(np.prod(self.spacing))
        for arr in self.coords + self.wavenumbers:
            arr.flags.writeable = False

    def __eq__(self, other):
        return isinstance(other, Grid) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    def __repr__(self):
        return f"Grid({self.spec!r})"

    @property
    def position_axes(self):
        return tuple(range(self.config_dim))

    @property
    def velocity_axes(self):
        return tuple(range(self.config_dim, 2 * self.config_dim))

    def axis_index(self, axis) -> int:
        """Resolve an axis name (or integer index) to its index."""
        if isinstance(axis, (int, np.integer)):
            if 0 <= axis < self.ndim:
                return int(axis)
            raise AxisError(f"axis index {axis} out of range for {self.ndim}-axis grid")
        try:
            return self.axis_names.index(axis)
        except ValueError:
            raise AxisError(f"unknown axis {axis!r}; grid axes are {self.axis_names}") from None

    def partner(self, axis) -> int:
        """Index of the conjugate axis: position <-> velocity of the same component."""
        i = self.axis_index(axis)
        d = self.config_dim
        return i + d if i < d else i - d

    def broadcast(self, values, axis):
        """Reshape a 1-d array along ``axis`` so it broadcasts over the grid."""
        shape = [1] * self.ndim
        shape[self.axis_index(axis)] = -1
        return np.reshape(values, shape)

    def coordinate(self, axis):
        """Broadcastable coordinate samples of ``axis``."""
        i = self.axis_index(axis)
        return self.broadcast(self.coords[i], i)

    def positions(self):
        return [self.coordinate(i) for i in self.position_axes]

    def velocities(self):
        return [self.coordinate(i) for i in self.velocity_axes]

    def interior(self, axis, value, margin):
        """True when ``value`` is at least ``margin`` inside the axis interval."""
        i = self.axis_index(axis)
        return self.lower[i] + margin <= value <= self.upper[i] - margin


def build_grid(spec: GridSpec, max_points: int | None = None) -> Grid:
    """Build coordinate and wavenumber arrays for ``spec``.

    ``max_points`` optionally tightens the memory cap stored on the spec.
    """
    if not isinstance(spec, GridSpec):
        raise GridError(f"expected a GridSpec, got {type(spec).__name__}")
    total = int(np.prod(spec.points_per_axis, dtype=np.int64))
    if max_points is not None and total > max_points:
        raise GridError(f"grid has {total} points, above the cap of {max_points}")
    return Grid(spec)


def _as_grid(grid) -> Grid:
    return grid if isinstance(grid, Grid) else build_grid(grid)


@dataclass(frozen=True, eq=False)
class WavefunctionField:
    """Complex amplitudes on a grid; the classical state.

    The amplitude array is made read-only on construction, so a field can be
    shared freely.  ``representation`` is ``"velocity"`` for psi(r, v) or
    ``"momentum"`` for phi(r, p), where the last d axes then hold p / m.
    """

    grid: Grid
    amplitudes: np.ndarray
    time: float = 0.0
    representation: str = VELOCITY

    def __post_init__(self):
        grid = _as_grid(self.grid)
        arr = np.asarray(self.amplitudes, dtype=np.complex128)
        if arr.shape != grid.shape:
            if arr.size != grid.size:
                raise GridError(f"amplitude array has {arr.size} entries, grid has {grid.size}")
            arr = arr.reshape(grid.shape)
        if arr.flags.writeable:
            arr.flags.writeable = False
        if self.representation not in (VELOCITY, MOMENTUM):
            raise GridError(f"unknown representation {self.representation!r}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "amplitudes", arr)
        object.__setattr__(self, "time", float(self.time))

    def replace(self, amplitudes=None, time=None, representation=None):
        return WavefunctionField(
            self.grid,
            self.amplitudes if amplitudes is None else amplitudes,
            self.time if time is None else time,
            self.representation if representation is None else representation,
        )

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real * self.grid.cell_volume))

    def density(self):
        return DensityField(self.grid, self.grid.axis_names, np.abs(self.amplitudes) ** 2)

    def _check(self, other):
        if not isinstance(other, WavefunctionField):
            return NotImplemented
        if other.grid != self.grid:
            raise GridError("fields live on different grids")
        if other.representation != self.representation:
            raise GridError("fields are in different representations")
        return None

    def __add__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return self.replace(self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return self.replace(self.amplitudes - other.amplitudes)

    def __neg__(self):
        return self.replace(-self.amplitudes)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self.replace(self.amplitudes * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityField:
    """Nonnegative density over the axes named in ``axes``."""

    grid: Grid
    axes: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if np.any(vals < 0):
            raise GridError("density values must be nonnegative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "axes", tuple(self.axes))

    @property
    def cell_volume(self):
        idx = [self.grid.axis_index(a) for a in self.axes]
        return float(np.prod(self.grid.spacing[idx])) if idx else 1.0

    def total(self) -> float:
        return float(self.values.sum() * self.cell_volume)


def inner_product(psi1: WavefunctionField, psi2: WavefunctionField) -> complex:
    """<psi1|psi2> as a cell-volume weighted sum, conjugate-linear in ``psi1``."""
    if psi1.grid != psi2.grid:
        raise GridError("inner product of fields on different grids")
    return complex(np.vdot(psi1.amplitudes, psi2.amplitudes) * psi1.grid.cell_volume)


def marginal_density(psi: WavefunctionField, axes: Sequence = ()) -> DensityField:
    """Integrate |psi|^2 over the named ``axes``; the rest are kept."""
    grid = psi.grid
    drop = sorted({grid.axis_index(a) for a in axes})
    values = np.abs(psi.amplitudes) ** 2
    if drop:
        values = values.sum(axis=tuple(drop)) * float(np.prod(grid.spacing[drop]))
    kept = tuple(n for i, n in enumerate(grid.axis_names) if i not in drop)
    return DensityField(grid, kept, values)


def _per_axis(value, d, label):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(d, arr[0])
    if arr.size != d:
        raise GridError(f"{label} needs {d} components, got {arr.size}")
    return arr


def gaussian_packet(grid, center, widths, margin: float = PACKET_MARGIN) -> WavefunctionField:
    """Normalized real product Gaussian.

    ``center = (r0, v0)`` and ``widths = (sigma_r, sigma_v)``; each entry is a
    scalar or a d-vector.  The amplitude is ``exp(-(x - x0)**2 / (4 sigma**2))``
    per axis, so the Born density has standard deviation sigma.
    """
    grid = _as_grid(grid)
    d = grid.config_dim
    r0, v0 = center
    sr, sv = widths
    c = np.concatenate([_per_axis(r0, d, "center position"), _per_axis(v0, d, "center velocity")])
    s = np.concatenate([_per_axis(sr, d, "position width"), _per_axis(sv, d, "velocity width")])
    if np.any(s <= 0):
        raise GridError("packet widths must be positive")
    amp = np.ones((), dtype=float)
    for i in range(grid.ndim):
        if not grid.interior(i, c[i], margin * s[i]):
            raise MarginError(
                f"packet center {c[i]:g} on axis {grid.axis_names[i]!r} is closer than "
                f"{margin:g} widths to the boundary"
            )
        factor = np.exp(-((grid.coords[i] - c[i]) ** 2) / (4.0 * s[i] ** 2))
        amp = amp[..., None] * factor if amp.ndim else factor
    amp = amp / np.sqrt(np.sum(amp**2) * grid.cell_volume)
    return WavefunctionField(grid, amp.astype(np.complex128))
