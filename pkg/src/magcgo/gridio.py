"""Binary dumps of fields on uniform 3D grids.

Layout (little-endian), a 64-byte header followed by the data in C order
with shape (nx, ny, nz, ncomp):

    offset  size  content
    0       8     magic b"MSGRID01"
    8       12    nx, ny, nz (uint32)
    20      4     ncomp (uint32)
    24      8     step (float64)
    32      24    origin x, y, z (float64)
    56      4     dtype tag: b"f8  " (float64) or b"c16 " (complex128)
    60      4     reserved, zero

Nodes outside the domain hold NaN.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"MSGRID01"
HEADER = struct.Struct("<8s3I I d 3d 4s 4x")
DTYPES = {b"f8  ": np.dtype("<f8"), b"c16 ": np.dtype("<c16")}
assert HEADER.size == 64


class GridFormatError(ValueError):
    pass


@dataclass
class GridDump:
    values: np.ndarray         # (nx, ny, nz, ncomp)
    step: float
    origin: np.ndarray


def write_grid(path, values, step, origin):
    """Write values of shape (nx, ny, nz) or (nx, ny, nz, ncomp)."""
    v = np.asarray(values)
    if v.ndim == 3:
        v = v[..., None]
    if v.ndim != 4:
        raise GridFormatError("grid values must have 3 or 4 dimensions")
    tag = b"c16 " if np.iscomplexobj(v) else b"f8  "
    v = np.ascontiguousarray(v, DTYPES[tag])
    head = HEADER.pack(MAGIC, *v.shape[:3], v.shape[3], float(step), *map(float, origin), tag)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(v.tobytes())


def read_grid(path) -> GridDump:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < HEADER.size:
            raise GridFormatError("truncated header")
        magic, nx, ny, nz, nc, step, ox, oy, oz, tag = HEADER.unpack(head)
        if magic != MAGIC:
            raise GridFormatError(f"bad magic {magic!r}")
        if tag not in DTYPES:
            raise GridFormatError(f"unknown dtype tag {tag!r}")
        dt = DTYPES[tag]
        count = nx * ny * nz * nc
        data = np.frombuffer(fh.read(count * dt.itemsize), dt)
    if data.size != count:
        raise GridFormatError("truncated data block")
    return GridDump(data.reshape(nx, ny, nz, nc).copy(), step, np.array([ox, oy, oz]))


def scatter_to_box(grid, interior_values):
    """Place per-node values of a forward Grid into its bounding box, NaN outside."""
    v = np.asarray(interior_values)
    shape = tuple(grid.dims) + v.shape[1:]
    out = np.full(shape, np.nan, complex if np.iscomplexobj(v) else float)
    out[tuple(grid.ijk.T)] = v
    return out


def write_grid_field(path, grid, interior_values):
    write_grid(path, scatter_to_box(grid, interior_values), grid.step, grid.origin)


def write_cube(path, points, values, n, mask=None):
    """Write values sampled on a reconstruction cube (points in C order of an n^3 lattice)."""
    v = np.asarray(values).reshape((n, n, n) + np.shape(values)[1:]).astype(
        complex if np.iscomplexobj(values) else float)
    if mask is not None:
        v[~np.asarray(mask).reshape(n, n, n)] = np.nan
    p = np.asarray(points).reshape(n, n, n, 3)
    step = float(p[1, 0, 0, 0] - p[0, 0, 0, 0])
    write_grid(path, v, step, p[0, 0, 0])
