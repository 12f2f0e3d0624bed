"""
Quality metrics for decomposed volumes: lowpass PSNR and highpass energy.

The lowpass band doubles as a half-rate preview of the sequence, so its
PSNR against the original frames measures preview quality; the mean
squared highpass coefficient measures how much signal the prediction
step failed to explain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .volume import Axis, extract_pair


def psnr(a, b, peak):
    """10*log10(peak^2 / MSE) in dB; +inf when the frames are identical."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(float(peak) ** 2 / mse)


def mean_energy(hp):
    """Mean squared coefficient of a highpass frame."""
    arr = np.asarray(hp, dtype=np.float64)
    return float(np.mean(arr * arr))


@dataclass(frozen=True)
class PairMetrics:
    """Metrics of one transformed frame pair."""

    psnr_ref_cur: float  # similarity of the two source frames
    psnr_ref_lp: float  # lowpass vs reference frame
    psnr_cur_lp: float  # lowpass vs current frame
    hp_mean_energy: float


@dataclass(frozen=True)
class AnalysisReport:
    """Per-pair metrics plus their unweighted means over all pairs."""

    axis: Axis
    method: str
    pairs: tuple

    def _mean(self, attr):
        return float(np.mean([getattr(p, attr) for p in self.pairs]))

    @property
    def mean_psnr_ref_cur(self):
        return self._mean("psnr_ref_cur")

    @property
    def mean_psnr_ref_lp(self):
        return self._mean("psnr_ref_lp")

    @property
    def mean_psnr_cur_lp(self):
        return self._mean("psnr_cur_lp")

    @property
    def mean_hp_energy(self):
        return self._mean("hp_mean_energy")


def analyze_decomposition(volume, decomposed):
    """PSNR/energy report of a decomposition against its source volume.

    PSNR uses peak = 2**bit_depth - 1 and compares the lowpass band to
    the originals at full range (lowpass overshoot is kept as-is, never
    clamped).  Pairs are visited in the decomposition's canonical order.
    """
    nx, ny, nz, nt = volume.dims
    lp_vol, hp_vol = decomposed.lp_band, decomposed.hp_band
    bx, by, bz, bt = lp_vol.dims
    axis = decomposed.axis
    expected = (nx, ny, nz, nt // 2) if axis is Axis.TEMPORAL else (nx, ny, nz // 2, nt)
    if (bx, by, bz, bt) != expected or lp_vol.bit_depth != volume.bit_depth:
        raise ValueError(
            f"decomposition (dims {(bx, by, bz, bt)}, bit depth {lp_vol.bit_depth}) "
            f"does not match volume (dims {volume.dims}, bit depth {volume.bit_depth})"
        )
    peak = 2**volume.bit_depth - 1
    fixed_extent = nz if axis is Axis.TEMPORAL else nt
    pair_extent = nt // 2 if axis is Axis.TEMPORAL else nz // 2
    rows = []
    for fixed in range(1, fixed_extent + 1):
        for pair in range(1, pair_extent + 1):
            f_ref, f_cur = extract_pair(volume, axis, pair, fixed)
            if axis is Axis.TEMPORAL:
                lp, hp = lp_vol.data[pair - 1, fixed - 1], hp_vol.data[pair - 1, fixed - 1]
            else:
                lp, hp = lp_vol.data[fixed - 1, pair - 1], hp_vol.data[fixed - 1, pair - 1]
            rows.append(
                PairMetrics(
                    psnr_ref_cur=psnr(f_ref, f_cur, peak),
                    psnr_ref_lp=psnr(f_ref, lp, peak),
                    psnr_cur_lp=psnr(f_cur, lp, peak),
                    hp_mean_energy=mean_energy(hp),
                )
            )
    return AnalysisReport(axis=axis, method=decomposed.method, pairs=tuple(rows))
