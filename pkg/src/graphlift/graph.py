"""
Inter-frame similarity graphs and their random-walk operator matrices.

Each pixel of the current frame is linked to its co-located pixel in the
reference frame plus a surrounding neighborhood (4-grid cross, 8-grid /
Chebyshev radius 1, or a general Chebyshev ball of radius r; radius 2 is
the classic 25-neighbor pattern).  Because the two frames form the two
parity classes of the node split, every link crosses frames and the
splitting is perfect by construction.

From the binary link pattern J (current rows, reference columns) the
pair of operators is derived in three steps:

    1. photometric weighting      w = exp(-lam * |ref(j) - cur(i)|)
    2. row degrees                d_i = sum_j w_ij
    3. normalization              entries w_ij / d_i  (row-stochastic)

K, the reverse-direction pattern, is the transpose of J, and its weight
matrix is exactly the transpose of J's (the weight formula is symmetric
in the absolute difference), so it is materialized by transposition, not
recomputation.

Determinism contract: column indices are stored sorted ascending within
each row, and every row reduction (degree sums, matvecs) accumulates
sequentially in that order in float64.  The lifting transform relies on
this to make its floor results reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

# Weights are clamped below by the smallest positive normal double:
# exp(-lam*|diff|) underflows to 0.0 once lam*|diff| > ~745 (|diff| ~ 1491
# at lam = 0.5), and a fully-underflowed row would make normalization
# divide by zero.  Clamping keeps every weight strictly positive without
# measurably changing any prediction.
MIN_WEIGHT = float(np.finfo(np.float64).tiny)

DEFAULT_LAMBDA = 0.5


@dataclass(frozen=True)
class Neighborhood:
    """Link pattern from a current-frame pixel into the reference frame.

    kind is one of ``"center"`` (self link only, reduces the transform to
    the plain integer Haar), ``"4grid"`` (self + von Neumann cross), or
    ``"radius"`` with ``radius >= 1`` (Chebyshev ball, (2r+1)^2 links;
    radius 1 is the 8-grid pattern, radius 2 the 25-neighbor one).
    """

    kind: str
    radius: int = 0

    def __post_init__(self):
        if self.kind not in ("center", "4grid", "radius"):
            raise ValueError(f"unknown neighborhood kind {self.kind!r}")
        if self.kind == "radius" and self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        if self.kind != "radius" and self.radius != 0:
            raise ValueError(f"{self.kind} neighborhood takes no radius")


CENTER_ONLY = Neighborhood("center")
FOUR_GRID = Neighborhood("4grid")
EIGHT_GRID = Neighborhood("radius", 1)


def chebyshev(radius):
    """Chebyshev-ball neighborhood of the given radius (>= 1)."""
    return Neighborhood("radius", radius)


def parse_method(text):
    """Parse a method string: none | center | 4grid | 8grid | radius:r.

    Returns ``None`` for the uncompensated transform, otherwise a
    Neighborhood.  ``8grid`` is the alias of ``radius:1``.
    """
    text = text.strip().lower()
    if text == "none":
        return None
    if text == "center":
        return CENTER_ONLY
    if text == "4grid":
        return FOUR_GRID
    if text == "8grid":
        return EIGHT_GRID
    if text.startswith("radius:"):
        try:
            r = int(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad radius in method {text!r}") from None
        return chebyshev(r)
    raise ValueError(f"unknown method {text!r} (expected none|center|4grid|8grid|radius:r)")


def method_label(kind):
    """Canonical report label for a neighborhood (or None = uncompensated)."""
    if kind is None:
        return "none"
    if kind.kind == "radius":
        return "8grid" if kind.radius == 1 else f"radius:{kind.radius}"
    return kind.kind


def neighborhood_offsets(kind):
    """(dx, dy) offsets of the pattern, sorted by (dy, dx).

    The sort order matters: applying the offsets in this order to a pixel
    yields its reference-frame neighbor nodes in ascending raster order,
    which is what keeps the CSR column indices sorted without an explicit
    sort pass.
    """
    if kind.kind == "center":
        return [(0, 0)]
    if kind.kind == "4grid":
        offs = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        r = kind.radius
        offs = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    return sorted(offs, key=lambda o: (o[1], o[0]))


def build_adjacency(dims, kind):
    """Binary link pattern J for a frame of ``dims = (nx, ny)`` pixels.

    Row i (current-frame node) holds a 1 in column j (reference-frame
    node) iff j's pixel lies at one of the pattern offsets from i's.
    Offsets falling outside the frame are clipped, so border rows have
    fewer entries; this matches the worked 4x4 example where corner node
    1 links only to nodes 1, 2 and 5.

    Returns a float64 CSR matrix with unit entries and sorted indices.
    """
    nx, ny = dims
    if nx < 1 or ny < 1:
        raise ValueError(f"frame dims must be >= 1, got {dims}")
    offsets = np.array(neighborhood_offsets(kind), dtype=np.int64)
    px = np.tile(np.arange(nx, dtype=np.int64), ny)
    py = np.repeat(np.arange(ny, dtype=np.int64), nx)
    # (node, offset) grids; C-order flattening scans nodes row-major and,
    # within each node, offsets in ascending (dy, dx) = ascending column.
    qx = px[:, None] + offsets[None, :, 0]
    qy = py[:, None] + offsets[None, :, 1]
    valid = (qx >= 0) & (qx < nx) & (qy >= 0) & (qy < ny)
    cols = (qy * nx + qx)[valid]
    counts = valid.sum(axis=1)
    indptr = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    mat = csr_matrix(
        (np.ones(len(cols), dtype=np.float64), cols.astype(np.int32), indptr),
        shape=(nx * ny, nx * ny),
    )
    mat.has_sorted_indices = True
    return mat


def weight_adjacency(adj, f_ref, f_cur, lam=DEFAULT_LAMBDA):
    """Weight every stored link (i, j) by exp(-lam * |f_ref(j) - f_cur(i)|).

    The pattern is untouched; only the entry values change.  Weights are
    clamped to ``MIN_WEIGHT`` (see above).
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    ref = _flat_frame(f_ref, adj.shape[1], "f_ref")
    cur = _flat_frame(f_cur, adj.shape[0], "f_cur")
    rows = np.repeat(np.arange(adj.shape[0]), np.diff(adj.indptr))
    diff = np.abs(ref[adj.indices] - cur[rows]).astype(np.float64)
    data = np.maximum(np.exp(-lam * diff), MIN_WEIGHT)
    out = csr_matrix((data, adj.indices.copy(), adj.indptr.copy()), shape=adj.shape)
    out.has_sorted_indices = True
    return out


def to_stochastic(weighted):
    """Divide each row by its degree, yielding transition probabilities.

    The degree of row i is the sequential ascending-column sum of its
    weights (computed as a matvec against a ones vector, which scipy
    accumulates in exactly that order).  Every row of the result sums to
    1 within 1e-12.
    """
    counts = np.diff(weighted.indptr)
    if np.any(counts == 0):
        row = int(np.nonzero(counts == 0)[0][0])
        raise ValueError(f"row {row + 1} has no links; cannot normalize an empty row")
    degree = weighted @ np.ones(weighted.shape[1])
    data = weighted.data / np.repeat(degree, counts)
    out = csr_matrix((data, weighted.indices.copy(), weighted.indptr.copy()), shape=weighted.shape)
    out.has_sorted_indices = True
    return out


def build_mc_pair(f_ref, f_cur, kind, lam=DEFAULT_LAMBDA):
    """Prediction/update operator pair (J_P, K_U) for one frame pair.

    J_P rows live on the current frame and average reference pixels;
    K_U rows live on the reference frame and average current-frame
    highpass values.  K's weights are the bit-exact transpose of J's.
    """
    if np.asarray(f_ref).shape != np.asarray(f_cur).shape:
        raise ValueError(
            f"frame shapes differ: {np.asarray(f_ref).shape} vs {np.asarray(f_cur).shape}"
        )
    ny, nx = np.asarray(f_ref).shape
    adj = build_adjacency((nx, ny), kind)
    w_j = weight_adjacency(adj, f_ref, f_cur, lam)
    w_k = w_j.T.tocsr()
    w_k.sort_indices()
    return to_stochastic(w_j), to_stochastic(w_k)


def _flat_frame(frame, expected, name):
    arr = np.asarray(frame)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must hold integer samples, got dtype {arr.dtype}")
    if arr.size != expected:
        raise ValueError(f"{name} has {arr.size} pixels, adjacency expects {expected}")
    return arr.astype(np.int64).ravel()
