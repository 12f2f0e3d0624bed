"""
Synthetic 3-D+t test volumes with controlled deformation.

Real cardiac CT stacks are not redistributable, so these phantoms stand
in: a disk whose radius breathes sinusoidally over time (plus optional
per-sample noise so photometric matching is never exact), a translating
gradient ramp, a constant field, and pure noise.

All generation is deterministic: noise comes from numpy's PCG64 stream
seeded with the spec's 64-bit seed, drawn in a single ``integers()`` call
over the full volume shape, so the same spec always yields the same
volume on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import Volume, sample_range


@dataclass(frozen=True)
class Constant:
    value: int = 100


@dataclass(frozen=True)
class TranslatingGradient:
    """Sawtooth ramp along x translating by ``velocity`` pixels per frame."""

    velocity: float = 1.5


@dataclass(frozen=True)
class DeformingDisk:
    """Disk whose radius varies sinusoidally over t (cardiac-style motion).

    The phase advances slightly with z as well, so slice pairs see motion
    too.  ``noise_amplitude > 0`` adds independent uniform noise in
    [-a, a] to every sample, making similarity weights non-trivial;
    ``antialias`` renders a 1-pixel linear edge ramp instead of the
    default hard edge (hard edges show ghosting most clearly).
    """

    center: tuple | None = None  # (cx, cy), defaults to the frame center
    base_radius: float = 16.0
    radius_amplitude: float = 12.0
    period: float = 10.0
    noise_amplitude: int = 12
    seed: int = 0
    antialias: bool = False


@dataclass(frozen=True)
class NoiseField:
    """Uniform noise of the given half-range around mid-scale."""

    seed: int = 0
    amplitude: int | None = None  # None: fill the full sample range


@dataclass(frozen=True)
class PhantomSpec:
    kind: object
    dims: tuple = (64, 64, 4, 10)
    bit_depth: int = 12


def generate(spec):
    """Deterministically render a phantom volume from its spec."""
    nx, ny, nz, nt = spec.dims
    if min(spec.dims) < 1:
        raise ValueError(f"phantom dims must all be >= 1, got {spec.dims}")
    lo, hi = sample_range(spec.bit_depth, signed=False)
    kind = spec.kind

    if isinstance(kind, Constant):
        if not lo <= kind.value <= hi:
            raise ValueError(f"constant value {kind.value} outside [{lo}, {hi}]")
        data = np.full((nt, nz, ny, nx), kind.value, dtype=np.int64)

    elif isinstance(kind, TranslatingGradient):
        x = np.arange(nx, dtype=np.float64)
        t = np.arange(nt, dtype=np.float64)
        phase = (x[None, :] - kind.velocity * t[:, None]) % max(nx, 1)
        ramp = np.rint(phase * (hi / max(nx - 1, 1))).astype(np.int64)
        data = np.broadcast_to(ramp[:, None, None, :], (nt, nz, ny, nx)).copy()

    elif isinstance(kind, DeformingDisk):
        cx, cy = kind.center if kind.center is not None else ((nx - 1) / 2.0, (ny - 1) / 2.0)
        bg, fg = (hi + 1) // 4, 3 * (hi + 1) // 4
        yy, xx = np.mgrid[0:ny, 0:nx]
        dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        data = np.empty((nt, nz, ny, nx), dtype=np.int64)
        for t in range(nt):
            for z in range(nz):
                phase = 2.0 * np.pi * (t + 0.35 * z) / kind.period
                r = kind.base_radius + kind.radius_amplitude * np.sin(phase)
                if kind.antialias:
                    ramp = np.clip(r + 0.5 - dist, 0.0, 1.0)
                    data[t, z] = np.rint(bg + ramp * (fg - bg)).astype(np.int64)
                else:
                    data[t, z] = np.where(dist <= r, fg, bg)
        if kind.noise_amplitude > 0:
            rng = np.random.Generator(np.random.PCG64(kind.seed))
            a = kind.noise_amplitude
            data += rng.integers(-a, a + 1, size=data.shape)
        data = np.clip(data, lo, hi)

    elif isinstance(kind, NoiseField):
        rng = np.random.Generator(np.random.PCG64(kind.seed))
        if kind.amplitude is None:
            data = rng.integers(lo, hi + 1, size=(nt, nz, ny, nx))
        else:
            mid = (hi + 1) // 2
            noise = rng.integers(-kind.amplitude, kind.amplitude + 1, size=(nt, nz, ny, nx))
            data = np.clip(mid + noise, lo, hi)

    else:
        raise ValueError(f"unknown phantom kind {kind!r}")

    return Volume(data, bit_depth=spec.bit_depth, signed=False)
