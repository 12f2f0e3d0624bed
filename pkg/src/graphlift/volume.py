"""
3-D+t volume container with bit-exact raw file I/O (GLV1 format).

A volume holds one integer sample per (x, y, z, t) position, x varying
fastest.  Regular volumes are unsigned with ``bit_depth`` bits per sample
(default 12, typical of CT data).  Subband volumes produced by the lifting
transform are signed and may exceed the unsigned range by up to one bit in
each direction, so signed volumes admit ``[-2**(bit_depth+1),
2**(bit_depth+1) - 1]``.

GLV1 file layout (little-endian, 32-byte header):

    bytes  0..3   magic ``b"GLV1"``
    bytes  4..7   u32 bit_depth
    bytes  8..23  u32 nx, ny, nz, nt
    bytes 24..27  u32 flags (bit 0: payload is signed int16)
    bytes 28..31  u32 reserved, zero
    payload       nx*ny*nz*nt samples, 2 bytes each, u16 or i16 per flag,
                  x-fastest raster order (x, then y, then z, then t)

Node numbering inside a single frame follows the convention used
throughout this package: pixel (x, y), both 1-based, is node
``(y - 1) * nx + x`` (1-based).  Internal arrays are 0-based; the 1-based
numbers appear in documentation and error messages only.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass, field

import numpy as np

GLV_MAGIC = b"GLV1"
GLV_HEADER = struct.Struct("<4sIIIIIII")
GLV_FLAG_SIGNED = 1 << 0

MAX_BIT_DEPTH = 16        # unsigned payload must fit u16
MAX_SIGNED_BIT_DEPTH = 14  # signed range [-2**(bd+1), 2**(bd+1)-1] must fit i16


class FormatError(Exception):
    """A binary file violates its declared format (bad magic, size, range)."""


class Axis(enum.Enum):
    """Pairing axis for the temporal decomposition: frames over t or slices over z."""

    TEMPORAL = "t"
    SLICE = "z"


def sample_range(bit_depth, signed):
    """Inclusive (lo, hi) range of valid sample values."""
    if signed:
        return -(2 ** (bit_depth + 1)), 2 ** (bit_depth + 1) - 1
    return 0, 2**bit_depth - 1


def node_index(x, y, nx):
    """1-based node number of pixel (x, y), both 1-based, in a frame nx wide."""
    if not (1 <= x <= nx and 1 <= y):
        raise ValueError(f"pixel ({x}, {y}) outside a frame of width {nx}")
    return (y - 1) * nx + x


@dataclass(frozen=True, eq=False)
class Volume:
    """Immutable 3-D+t sample volume.

    ``data`` is stored as a read-only C-order array of shape
    (nt, nz, ny, nx) so that ``.ravel()`` yields the x-fastest raster
    order.  Construction validates the sample range and canonicalizes the
    dtype (uint16 unsigned, int16 signed).
    """

    data: np.ndarray
    bit_depth: int = 12
    signed: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 4:
            raise ValueError(f"volume data must be 4-D (nt, nz, ny, nx), got shape {arr.shape}")
        if any(n < 1 for n in arr.shape):
            raise ValueError(f"volume extents must all be >= 1, got {self.dims_of(arr)}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"volume samples must be integers, got dtype {arr.dtype}")
        limit = MAX_SIGNED_BIT_DEPTH if self.signed else MAX_BIT_DEPTH
        if not 1 <= self.bit_depth <= limit:
            raise ValueError(
                f"bit_depth {self.bit_depth} outside [1, {limit}] for "
                f"{'signed' if self.signed else 'unsigned'} volumes"
            )
        lo, hi = sample_range(self.bit_depth, self.signed)
        amin, amax = int(arr.min()), int(arr.max())
        if amin < lo or amax > hi:
            raise ValueError(
                f"sample range [{amin}, {amax}] exceeds [{lo}, {hi}] "
                f"for bit_depth {self.bit_depth}"
            )
        canon = np.array(arr, dtype=np.int16 if self.signed else np.uint16, order="C")
        canon.setflags(write=False)
        object.__setattr__(self, "data", canon)

    @staticmethod
    def dims_of(arr):
        nt, nz, ny, nx = arr.shape
        return (nx, ny, nz, nt)

    @property
    def dims(self):
        """(nx, ny, nz, nt)."""
        return self.dims_of(self.data)

    def __eq__(self, other):
        if not isinstance(other, Volume):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.signed == other.signed
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )

    def payload_bytes(self):
        """The sample payload exactly as stored in a GLV1 file."""
        dtype = "<i2" if self.signed else "<u2"
        return self.data.astype(dtype, copy=False).tobytes()


def write_bytes_atomic(path, payload):
    """Write ``payload`` to ``path`` via a temp file, so failures leave no partial file."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_volume(volume, path):
    """Write a Volume as a GLV1 file, bit-exact inverse of :func:`load_volume`."""
    flags = GLV_FLAG_SIGNED if volume.signed else 0
    nx, ny, nz, nt = volume.dims
    header = GLV_HEADER.pack(GLV_MAGIC, volume.bit_depth, nx, ny, nz, nt, flags, 0)
    write_bytes_atomic(path, header + volume.payload_bytes())


def load_volume(path):
    """Read a GLV1 file, validating header consistency and sample range.

    Rejects size mismatches and out-of-range samples outright: both signal
    a corrupt header rather than recoverable data.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < GLV_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, bit_depth, nx, ny, nz, nt, flags, reserved = GLV_HEADER.unpack_from(blob)
    if magic != GLV_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if reserved != 0 or flags & ~GLV_FLAG_SIGNED:
        raise FormatError(f"{path}: unknown flags/reserved bits set")
    if min(nx, ny, nz, nt) < 1:
        raise FormatError(f"{path}: zero extent in header dims {(nx, ny, nz, nt)}")
    signed = bool(flags & GLV_FLAG_SIGNED)
    count = nx * ny * nz * nt
    expected = GLV_HEADER.size + 2 * count
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload size mismatch (header implies {expected} bytes, file has {len(blob)})"
        )
    raw = np.frombuffer(blob, dtype="<i2" if signed else "<u2", offset=GLV_HEADER.size)
    samples = raw.reshape(nt, nz, ny, nx)
    try:
        return Volume(samples, bit_depth=bit_depth, signed=signed)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def extract_pair(volume, axis, pair_index, fixed_index):
    """Extract the frame pair (f_ref, f_cur) for one lifting step.

    ``pair_index`` is 1-based: pair p covers positions 2p-1 and 2p along
    ``axis`` (so pair 1 of a temporal stack is frames t=1 and t=2, the
    first frame being the odd/reference one).  ``fixed_index`` is the
    1-based position on the remaining stacking axis (z for temporal
    pairing, t for slice pairing).

    Returns two independent int64 copies of shape (ny, nx); mutating one
    affects neither the other nor the volume.
    """
    nx, ny, nz, nt = volume.dims
    if pair_index < 1:
        raise ValueError(f"pair_index must be >= 1, got {pair_index}")
    if axis is Axis.TEMPORAL:
        extent, fixed_extent, fixed_name = nt, nz, "z"
    else:
        extent, fixed_extent, fixed_name = nz, nt, "t"
    if 2 * pair_index > extent:
        raise ValueError(
            f"pair {pair_index} needs {axis.value}={2 * pair_index}, "
            f"but the {axis.value} extent is {extent}"
        )
    if not 1 <= fixed_index <= fixed_extent:
        raise ValueError(f"{fixed_name}={fixed_index} outside [1, {fixed_extent}]")
    a, b, f = 2 * pair_index - 2, 2 * pair_index - 1, fixed_index - 1
    if axis is Axis.TEMPORAL:
        ref, cur = volume.data[a, f], volume.data[b, f]
    else:
        ref, cur = volume.data[f, a], volume.data[f, b]
    return ref.astype(np.int64), cur.astype(np.int64)
