"""
Compensated integer Haar lifting on frame pairs and whole volumes.

Forward transform of a pair (f_ref, f_cur), flattened to vectors:

    H = f_cur - floor(J_P @ f_ref)          (prediction step)
    L = f_ref + floor(0.5 * (K_U @ H))      (update step)

and the inverse recomputes the identical floored quantities:

    f_ref = L - floor(0.5 * (K_U @ H))
    f_cur = H + floor(J_P @ f_ref)

Losslessness therefore hinges on the two floor(matvec) evaluations being
bit-identical between forward and inverse.  Both directions share one
kernel, :func:`floored_matvec`, whose per-row accumulation order is fixed
(sequential, ascending column, float64) and whose result is nudged by
``FLOOR_NUDGE`` before flooring: normalized rows carry rounding residue
on the order of 1e-13, enough to land an exactly-integer prediction a few
ulps *below* the integer and flip its floor.  The nudge absorbs that
residue; being part of the kernel, it is applied identically on both
sides and cannot affect invertibility.

The uncompensated transform is the same structure with identity warping:

    HP = f_cur - f_ref
    LP = f_ref + HP // 2      (floor division, matching floor(HP/2))

Side information: J_P/K_U depend on both frames, so a decoder cannot
rebuild them from the bands.  They are serialized per pair in the GLS1
format (all little-endian):

    bytes 0..3   magic b"GLS1"
    u32          version (1)
    u32          pair count
    per pair, J_P then K_U, each:
        u32 rows, u32 cols, u64 nnz,
        u64 row_offsets[rows + 1],
        u32 col_indices[nnz]        (0-based, sorted within each row),
        f64 weights[nnz]            (raw IEEE bit patterns)

Storing raw weight bits makes reconstruction immune to cross-platform
differences in exp().
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .graph import DEFAULT_LAMBDA, build_mc_pair, method_label
from .volume import Axis, FormatError, Volume, extract_pair, write_bytes_atomic

GLS_MAGIC = b"GLS1"
GLS_VERSION = 1
GLS_HEADER = struct.Struct("<4sII")
GLS_MAT_HEADER = struct.Struct("<IIQ")

# 2^-26: several orders above worst-case accumulation noise for any
# practical neighborhood (error ~ n * peak * 2^-53, i.e. radius ~90 on
# 12-bit data before this bound is approached), several orders below the
# integer floor quantum.
FLOOR_NUDGE = 2.0**-26


def floored_matvec(mat, vec, half=False):
    """floor(mat @ vec) or floor(0.5 * (mat @ vec)), as int64.

    The single kernel used by both transform directions.  ``mat`` must be
    CSR with sorted indices (scipy's matvec then accumulates each row
    sequentially in ascending-column order); the 0.5 scaling is exact and
    is applied inside the floored quantity.
    """
    acc = mat @ vec.astype(np.float64)
    if half:
        acc *= 0.5
    return np.floor(acc + FLOOR_NUDGE).astype(np.int64)


@dataclass
class BandPair:
    """One transformed frame pair: lowpass, highpass, and their operators.

    ``side`` is the (J_P, K_U) matrix pair for a compensated transform or
    None for the uncompensated one.  ``lp``/``hp`` keep the source frame
    shape; ``hp`` is signed.
    """

    lp: np.ndarray
    hp: np.ndarray
    side: tuple | None


@dataclass
class DecomposedVolume:
    """One Haar decomposition step of a volume along ``axis``.

    The lowpass and highpass bands have half the source extent along the
    decomposition axis and are stored as signed volumes (lowpass values
    can undershoot 0 and overshoot the unsigned maximum by up to a bit).
    ``side_info`` lists one (J_P, K_U) pair per transformed frame pair in
    canonical order: outer loop over the retained axis (z for temporal,
    t for slice), inner loop over pair index; None when uncompensated.
    """

    axis: Axis
    method: str
    lp_band: Volume
    hp_band: Volume
    side_info: list | None


def _check_input_pair(f_ref, f_cur, bit_depth):
    ref = np.asarray(f_ref)
    cur = np.asarray(f_cur)
    if ref.shape != cur.shape or ref.ndim != 2:
        raise ValueError(f"frame shapes must match and be 2-D: {ref.shape} vs {cur.shape}")
    for name, arr in (("f_ref", ref), ("f_cur", cur)):
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} must hold integer samples, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 2**bit_depth - 1:
            raise ValueError(f"{name} samples outside [0, {2**bit_depth - 1}]")
    return ref.astype(np.int64), cur.astype(np.int64)


def _check_band_ranges(lp, hp, bit_depth):
    # Provable output ranges; violations would mean a kernel bug.
    # HP is current minus a floored convex combination of reference values,
    # LP adds at most half the HP magnitude (floored) to a reference value.
    assert hp.min() >= -(2**bit_depth) and hp.max() <= 2**bit_depth - 1
    assert lp.min() >= -(2 ** (bit_depth + 1)) and lp.max() <= 2 ** (bit_depth + 1) - 1


def forward_pair(f_ref, f_cur, kind, lam=DEFAULT_LAMBDA, bit_depth=12):
    """Compensated forward transform of one frame pair."""
    ref, cur = _check_input_pair(f_ref, f_cur, bit_depth)
    jp, ku = build_mc_pair(ref, cur, kind, lam)
    shape = ref.shape
    h = cur.ravel() - floored_matvec(jp, ref.ravel())
    l = ref.ravel() + floored_matvec(ku, h, half=True)
    lp, hp = l.reshape(shape), h.reshape(shape)
    _check_band_ranges(lp, hp, bit_depth)
    return BandPair(lp=lp, hp=hp, side=(jp, ku))


def forward_uncompensated(f_ref, f_cur, bit_depth=12):
    """Plain integer Haar transform (identity warping), no side info."""
    ref, cur = _check_input_pair(f_ref, f_cur, bit_depth)
    hp = cur - ref
    lp = ref + hp // 2
    _check_band_ranges(lp, hp, bit_depth)
    return BandPair(lp=lp, hp=hp, side=None)


def inverse_pair(bands):
    """Bit-exact inverse of :func:`forward_pair` / :func:`forward_uncompensated`."""
    lp = np.asarray(bands.lp, dtype=np.int64)
    hp = np.asarray(bands.hp, dtype=np.int64)
    if lp.shape != hp.shape or lp.ndim != 2:
        raise ValueError(f"band shapes must match and be 2-D: {lp.shape} vs {hp.shape}")
    if bands.side is None:
        ref = lp - hp // 2
        cur = hp + ref
        return ref, cur
    jp, ku = bands.side
    n = lp.size
    if jp.shape != (n, n) or ku.shape != (n, n):
        raise ValueError(
            f"side matrices of shape {jp.shape}/{ku.shape} do not match {n}-pixel bands"
        )
    ref = lp.ravel() - floored_matvec(ku, hp.ravel(), half=True)
    cur = hp.ravel() + floored_matvec(jp, ref)
    return ref.reshape(lp.shape), cur.reshape(lp.shape)


def _pair_schedule(volume, axis):
    """Canonical (fixed_index, pair_index) order, both 1-based."""
    nx, ny, nz, nt = volume.dims
    extent, fixed_extent = (nt, nz) if axis is Axis.TEMPORAL else (nz, nt)
    if extent % 2 != 0:
        raise ValueError(
            f"{axis.value} extent {extent} is odd; decomposition requires an even extent"
        )
    return [(f, p) for f in range(1, fixed_extent + 1) for p in range(1, extent // 2 + 1)]


def decompose_volume(volume, axis, kind=None, lam=DEFAULT_LAMBDA, on_pair=None):
    """One compensated (or plain, kind=None) Haar step along ``axis``.

    Every frame pair along the axis is transformed independently for every
    position of the retained axis; side information is collected in the
    canonical order described on :class:`DecomposedVolume`.  ``on_pair``,
    if given, is called as ``on_pair(fixed_index, pair_index, seconds)``
    after each pair (1-based indices), e.g. for progress or timing output.
    """
    if volume.signed:
        raise ValueError("decomposition expects an unsigned source volume")
    nx, ny, nz, nt = volume.dims
    half = (nt // 2, nz, ny, nx) if axis is Axis.TEMPORAL else (nt, nz // 2, ny, nx)
    lp = np.zeros(half, dtype=np.int64)
    hp = np.zeros(half, dtype=np.int64)
    side = None if kind is None else []
    for fixed, pair in _pair_schedule(volume, axis):
        started = time.perf_counter()
        f_ref, f_cur = extract_pair(volume, axis, pair, fixed)
        if kind is None:
            bands = forward_uncompensated(f_ref, f_cur, bit_depth=volume.bit_depth)
        else:
            bands = forward_pair(f_ref, f_cur, kind, lam, bit_depth=volume.bit_depth)
            side.append(bands.side)
        if axis is Axis.TEMPORAL:
            lp[pair - 1, fixed - 1] = bands.lp
            hp[pair - 1, fixed - 1] = bands.hp
        else:
            lp[fixed - 1, pair - 1] = bands.lp
            hp[fixed - 1, pair - 1] = bands.hp
        if on_pair is not None:
            on_pair(fixed, pair, time.perf_counter() - started)
    return DecomposedVolume(
        axis=axis,
        method=method_label(kind),
        lp_band=Volume(lp, bit_depth=volume.bit_depth, signed=True),
        hp_band=Volume(hp, bit_depth=volume.bit_depth, signed=True),
        side_info=side,
    )


def reconstruct_volume(decomposed):
    """Bit-exact inverse of :func:`decompose_volume`."""
    lp_vol, hp_vol = decomposed.lp_band, decomposed.hp_band
    if lp_vol.dims != hp_vol.dims or lp_vol.bit_depth != hp_vol.bit_depth:
        raise ValueError(
            f"band mismatch: dims {lp_vol.dims}/{hp_vol.dims}, "
            f"bit depths {lp_vol.bit_depth}/{hp_vol.bit_depth}"
        )
    nx, ny, nzb, ntb = lp_vol.dims
    axis = decomposed.axis
    full = (2 * ntb, nzb, ny, nx) if axis is Axis.TEMPORAL else (ntb, 2 * nzb, ny, nx)
    pairs = ntb * nzb if axis is Axis.TEMPORAL else nzb * ntb
    side = decomposed.side_info
    if side is not None and len(side) != pairs:
        raise ValueError(f"side info holds {len(side)} pairs, bands imply {pairs}")
    out = np.zeros(full, dtype=np.int64)
    fixed_extent = nzb if axis is Axis.TEMPORAL else ntb
    pair_extent = ntb if axis is Axis.TEMPORAL else nzb
    record = 0
    for fixed in range(fixed_extent):
        for pair in range(pair_extent):
            if axis is Axis.TEMPORAL:
                lp, hp = lp_vol.data[pair, fixed], hp_vol.data[pair, fixed]
            else:
                lp, hp = lp_vol.data[fixed, pair], hp_vol.data[fixed, pair]
            bands = BandPair(
                lp=lp.astype(np.int64),
                hp=hp.astype(np.int64),
                side=None if side is None else side[record],
            )
            ref, cur = inverse_pair(bands)
            if axis is Axis.TEMPORAL:
                out[2 * pair, fixed], out[2 * pair + 1, fixed] = ref, cur
            else:
                out[fixed, 2 * pair], out[fixed, 2 * pair + 1] = ref, cur
            record += 1
    return Volume(out, bit_depth=lp_vol.bit_depth, signed=False)


def _pack_matrix(mat):
    rows, cols = mat.shape
    nnz = mat.nnz
    parts = [
        GLS_MAT_HEADER.pack(rows, cols, nnz),
        mat.indptr.astype("<u8").tobytes(),
        mat.indices.astype("<u4").tobytes(),
        mat.data.astype("<f8").tobytes(),  # raw IEEE bit patterns
    ]
    return b"".join(parts)


class _Cursor:
    def __init__(self, blob, path):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated (needed {n} bytes at offset {self.pos})")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out


def _unpack_matrix(cur):
    rows, cols, nnz = GLS_MAT_HEADER.unpack(cur.take(GLS_MAT_HEADER.size))
    indptr = np.frombuffer(cur.take(8 * (rows + 1)), dtype="<u8").astype(np.int64)
    indices = np.frombuffer(cur.take(4 * nnz), dtype="<u4").astype(np.int32)
    data = np.frombuffer(cur.take(8 * nnz), dtype="<f8").copy()
    if indptr[0] != 0 or indptr[-1] != nnz or np.any(np.diff(indptr) < 0):
        raise FormatError(f"{cur.path}: corrupt row offsets")
    if nnz and indices.max() >= cols:
        raise FormatError(f"{cur.path}: column index out of range")
    mat = csr_matrix((data, indices, indptr), shape=(rows, cols))
    if not mat.has_sorted_indices:
        raise FormatError(f"{cur.path}: column indices not sorted within rows")
    return mat


def save_side_info(records, path):
    """Serialize a decomposition's (J_P, K_U) list as a GLS1 file."""
    parts = [GLS_HEADER.pack(GLS_MAGIC, GLS_VERSION, len(records))]
    for jp, ku in records:
        parts.append(_pack_matrix(jp))
        parts.append(_pack_matrix(ku))
    write_bytes_atomic(path, b"".join(parts))


def load_side_info(path):
    """Read a GLS1 file back into a list of (J_P, K_U) pairs, bit-exact."""
    with open(path, "rb") as fh:
        blob = fh.read()
    cur = _Cursor(blob, path)
    magic, version, count = GLS_HEADER.unpack(cur.take(GLS_HEADER.size))
    if magic != GLS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != GLS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    records = []
    for _ in range(count):
        jp = _unpack_matrix(cur)
        ku = _unpack_matrix(cur)
        records.append((jp, ku))
    if cur.pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - cur.pos} trailing bytes")
    return records
