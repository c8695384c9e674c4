"""Volume container helpers, PSNR metrics, noise synthesis and a synthetic test video.

A grey-scale video ("volume") is a float64 ndarray of shape (M, N, T):
rows x cols x frames, intensities nominally in [0, 255] but never clipped.
A multi-channel video is a float64 ndarray of shape (C, M, N, T) with
C in {1, 3}; channels are processed independently everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSpec",
    "as_volume",
    "as_channels",
    "psnr",
    "psnr_per_frame",
    "add_gaussian_noise",
    "franke_video",
]


class DimensionError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


def as_volume(u) -> np.ndarray:
    """Validate and return `u` as a float64 (M, N, T) volume.

    Requires at least 2 samples per axis (the staggered operators need
    one cell per axis) and finite values.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 3:
        raise DimensionError(f"expected a 3D (M, N, T) volume, got shape {u.shape}")
    if min(u.shape) < 2:
        raise DimensionError(f"every axis needs >= 2 samples, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("volume contains non-finite values")
    return u


def as_channels(v) -> np.ndarray:
    """Return `v` as a (C, M, N, T) float64 array; accepts 3D or 4D input."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 3:
        v = v[None]
    if v.ndim != 4:
        raise DimensionError(f"expected (M,N,T) or (C,M,N,T), got shape {v.shape}")
    if v.shape[0] not in (1, 3):
        raise DimensionError(f"channel count must be 1 or 3, got {v.shape[0]}")
    return v


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise: standard deviation (intensity units) and RNG seed."""

    std_dev: float
    seed: int = 0

    def __post_init__(self):
        if self.std_dev < 0:
            raise ValueError(f"std_dev must be >= 0, got {self.std_dev}")


def _check_same_shape(u, ref):
    u = np.asarray(u, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if u.shape != ref.shape:
        raise DimensionError(f"shape mismatch: {u.shape} vs {ref.shape}")
    return u, ref


def psnr(u, ref, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB, pooled over all voxels and channels.

    Returns math.inf when the two inputs are identical (zero MSE).
    """
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    u, ref = _check_same_shape(u, ref)
    mse = np.mean((u - ref) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr_per_frame(u, ref, peak: float = 255.0) -> list[float]:
    """PSNR of each frame slice (last axis), as a list of length T."""
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    u, ref = _check_same_shape(u, ref)
    T = u.shape[-1]
    out = []
    for k in range(T):
        mse = np.mean((u[..., k] - ref[..., k]) ** 2)
        out.append(math.inf if mse == 0.0 else 10.0 * math.log10(peak * peak / mse))
    return out


def add_gaussian_noise(u, spec: NoiseSpec) -> np.ndarray:
    """Return u + n with n ~ N(0, std^2) i.i.d., unclipped.

    Uses the counter-based Philox generator keyed on the seed, so the noise
    field depends only on (seed, array shape) and is reproducible under any
    execution schedule. The noise is independent of u (purely additive).
    """
    u = np.asarray(u, dtype=np.float64)
    if spec.std_dev == 0.0:
        return u.copy()
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    return u + spec.std_dev * rng.standard_normal(u.shape)


def _franke(x, y):
    # Franke's standard 2D test surface.
    return (
        0.75 * np.exp(-((9 * x - 2) ** 2 + (9 * y - 2) ** 2) / 4)
        + 0.75 * np.exp(-((9 * x + 1) ** 2) / 49 - (9 * y + 1) / 10)
        + 0.5 * np.exp(-((9 * x - 7) ** 2 + (9 * y - 3) ** 2) / 4)
        - 0.2 * np.exp(-((9 * x - 4) ** 2 + (9 * y - 7) ** 2))
    )


def franke_video(M: int, N: int, T: int, motion_amplitude: float = 4.0) -> np.ndarray:
    """Smooth synthetic test video: Franke's surface on a circularly drifting grid.

    The sampling origin moves along the closed path
    (a*sin(2*pi*k/T), a*cos(2*pi*k/T)) in pixel units, so frames are
    temporally coherent; output is rescaled to [0, 255]. Deterministic.
    """
    if M < 2 or N < 2 or T < 2:
        raise DimensionError(f"need M,N,T >= 2, got ({M},{N},{T})")
    i = np.arange(M, dtype=np.float64)
    j = np.arange(N, dtype=np.float64)
    vol = np.empty((M, N, T))
    for k in range(T):
        di = motion_amplitude * math.sin(2 * math.pi * k / T)
        dj = motion_amplitude * math.cos(2 * math.pi * k / T)
        y = (i + di) / (M - 1)
        x = (j + dj) / (N - 1)
        vol[:, :, k] = _franke(x[None, :], y[:, None])
    lo, hi = vol.min(), vol.max()
    if hi > lo:
        vol = (vol - lo) * (255.0 / (hi - lo))
    else:
        vol = np.zeros_like(vol)
    return vol
