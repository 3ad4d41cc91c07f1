"""Binary snapshot files for wavefunction fields.

The time stamp is not part of the file; run manifests list it per file.

Layout (little-endian throughout)::

    4 bytes   magic "KVNF"
    uint32    format version
    uint8     representation tag (0 = velocity, 1 = momentum)
    uint32    config_dim d
    2d x uint32   point counts, positions first
    2d x 2 x float64   (lo, hi) extent per axis
    N x 2 x float64    amplitudes as (re, im) pairs, row-major
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import GridError
from .grid import MOMENTUM, VELOCITY, GridSpec, WavefunctionField, build_grid

MAGIC = b"KVNF"
VERSION = 1
_TAGS = {VELOCITY: 0, MOMENTUM: 1}
_NAMES = {v: k for k, v in _TAGS.items()}


def write_snapshot(path, psi: WavefunctionField) -> None:
    grid = psi.grid
    d = grid.config_dim
    head = MAGIC + struct.pack("<IBI", VERSION, _TAGS[psi.representation], d)
    head += struct.pack(f"<{2 * d}I", *grid.shape)
    head += struct.pack(f"<{4 * d}d", *np.ravel(np.column_stack([grid.lower, grid.upper])))
    data = np.ascontiguousarray(psi.amplitudes, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes(order="C"))


def read_snapshot(path, axis_names=None, time: float = 0.0) -> WavefunctionField:
    """Load a field; the format stores no time stamp, so ``time`` is supplied by the caller."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise GridError(f"{path}: not a snapshot file (bad magic)")
    version, tag, d = struct.unpack_from("<IBI", raw, 4)
    if version != VERSION:
        raise GridError(f"{path}: unsupported snapshot version {version}")
    if tag not in _NAMES:
        raise GridError(f"{path}: unknown representation tag {tag}")
    off = 4 + struct.calcsize("<IBI")
    counts = struct.unpack_from(f"<{2 * d}I", raw, off)
    off += 4 * 2 * d
    ext = np.array(struct.unpack_from(f"<{4 * d}d", raw, off)).reshape(2 * d, 2)
    off += 8 * 4 * d
    spec = GridSpec(d, counts, [tuple(e) for e in ext[:d]], [tuple(e) for e in ext[d:]], axis_names=axis_names)
    grid = build_grid(spec)
    amps = np.frombuffer(raw, dtype="<c16", offset=off)
    if amps.size != grid.size:
        raise GridError(f"{path}: expected {grid.size} amplitudes, found {amps.size}")
    return WavefunctionField(grid, amps.reshape(grid.shape).astype(np.complex128), time, _NAMES[tag])
