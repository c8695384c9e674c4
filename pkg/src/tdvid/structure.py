"""Structure-tensor analysis: Gaussian smoothing, per-plane eigendecomposition,
confidence (local anisotropy) and assembly of the per-cell weight field."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .ops import WeightField
from .volume import as_volume

__all__ = [
    "SmoothingParams",
    "EigenPair2",
    "gaussian_smooth",
    "structure_tensor3",
    "eig2x2_symmetric",
    "confidence",
    "build_weight_field",
    "export_weight_field_csv",
]

# default confidence regulariser on the [0, 255] intensity scale
DEFAULT_EPSILON = 1e-4

# component order of the symmetric 3x3 tensor
TENSOR_COMPONENTS = ("s11", "s12", "s13", "s22", "s23", "s33")


@dataclass(frozen=True)
class SmoothingParams:
    """Inner/outer Gaussian std-devs (voxels) and confidence regulariser."""

    sigma: float
    rho: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (0 < self.sigma <= self.rho):
            raise ValueError(f"need 0 < sigma <= rho, got ({self.sigma}, {self.rho})")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def gaussian_smooth(u, s: float) -> np.ndarray:
    """Separable 3D Gaussian blur, kernel truncated at radius ceil(3s) and
    renormalised to sum 1, replicate padding. s = 0 is the identity."""
    u = np.asarray(u, dtype=np.float64)
    if s < 0:
        raise ValueError(f"std-dev must be >= 0, got {s}")
    if s == 0:
        return u.copy()
    return ndimage.gaussian_filter(u, sigma=s, mode="nearest", radius=math.ceil(3 * s))


def _centered_gradient(u):
    """Voxel-co-located gradient: half-step forward differences averaged back
    to the vertices (zero difference across the boundary)."""
    g = np.zeros(u.shape + (3,))
    d = u[1:] - u[:-1]
    g[:-1, :, :, 0] += 0.5 * d
    g[1:, :, :, 0] += 0.5 * d
    d = u[:, 1:] - u[:, :-1]
    g[:, :-1, :, 1] += 0.5 * d
    g[:, 1:, :, 1] += 0.5 * d
    d = u[:, :, 1:] - u[:, :, :-1]
    g[:, :, :-1, 2] += 0.5 * d
    g[:, :, 1:, 2] += 0.5 * d
    return g


def structure_tensor3(u, sigma: float, rho: float) -> np.ndarray:
    """3D structure tensor: outer product of the smoothed co-located gradient,
    component-wise smoothed with rho.

    Returns shape (M, N, T, 6) with components (s11, s12, s13, s22, s23, s33).
    """
    u = as_volume(u)
    if sigma > rho:
        raise ValueError(f"need sigma <= rho, got ({sigma}, {rho})")
    g = _centered_gradient(gaussian_smooth(u, sigma))
    pairs = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
    s = np.empty(u.shape + (6,))
    for c, (p, q) in enumerate(pairs):
        s[..., c] = gaussian_smooth(g[..., p] * g[..., q], rho)
    return s


def _eig2x2_fields(a, b, c):
    """Vectorised eigendecomposition of symmetric [[a, b], [b, c]].

    Returns (lam_hi, lam_lo, e_hi, e_lo) with lam_hi >= lam_lo, unit
    orthogonal eigenvectors and the sign convention that the first nonzero
    component of each vector is >= 0. Exact ties return the canonical basis.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    half = 0.5 * (a + c)
    d = np.sqrt(0.25 * (a - c) ** 2 + b * b)
    lam_hi = half + d
    lam_lo = half - d
    # branch on a >= c for a well-conditioned eigenvector of lam_hi
    swap = a < c
    v1 = np.where(swap, b, lam_hi - c)
    v2 = np.where(swap, lam_hi - a, b)
    nrm = np.hypot(v1, v2)
    tie = nrm == 0.0
    v1 = np.where(tie, 1.0, v1)
    v2 = np.where(tie, 0.0, v2)
    nrm = np.where(tie, 1.0, nrm)
    v1 = v1 / nrm
    v2 = v2 / nrm
    flip = (v1 < 0) | ((v1 == 0) & (v2 < 0))
    sgn = np.where(flip, -1.0, 1.0)
    v1 *= sgn
    v2 *= sgn
    # tangential direction: rotate by 90 degrees, then apply the convention
    w1, w2 = -v2, v1
    flip = (w1 < 0) | ((w1 == 0) & (w2 < 0))
    sgn = np.where(flip, -1.0, 1.0)
    e_hi = np.stack([v1, v2], axis=-1)
    e_lo = np.stack([sgn * w1, sgn * w2], axis=-1)
    return lam_hi, lam_lo, e_hi, e_lo


@dataclass(frozen=True)
class EigenPair2:
    lam_hi: float
    lam_lo: float
    e_hi: tuple[float, float]
    e_lo: tuple[float, float]


def eig2x2_symmetric(a: float, b: float, c: float) -> EigenPair2:
    """Closed-form eigendecomposition of the symmetric matrix [[a, b], [b, c]]."""
    lam_hi, lam_lo, e_hi, e_lo = _eig2x2_fields(a, b, c)
    return EigenPair2(float(lam_hi), float(lam_lo), tuple(e_hi), tuple(e_lo))


def confidence(lam_hi, lam_lo, epsilon: float = DEFAULT_EPSILON):
    """Local anisotropy measure lam_lo / (lam_hi + epsilon) in [0, 1).

    Tiny negative eigenvalues from round-off are clamped to 0.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    lam_hi = np.maximum(np.asarray(lam_hi, dtype=np.float64), 0.0)
    lam_lo = np.clip(np.asarray(lam_lo, dtype=np.float64), 0.0, None)
    return lam_lo / (lam_hi + epsilon)


def _corner_average(s):
    """8-corner mean of a voxel field onto cell centres."""
    acc = np.zeros(tuple(n - 1 for n in s.shape[:3]) + s.shape[3:])
    for oi in (0, 1):
        for oj in (0, 1):
            for ok in (0, 1):
                acc += s[
                    oi : s.shape[0] - 1 + oi,
                    oj : s.shape[1] - 1 + oj,
                    ok : s.shape[2] - 1 + ok,
                ]
    return 0.125 * acc


# (plane, sub-tensor component indices into TENSOR_COMPONENTS)
_PLANES = (
    ("12", (0, 1, 3)),  # (s11, s12, s22)
    ("13", (0, 2, 5)),  # (s11, s13, s33)
    ("23", (3, 4, 5)),  # (s22, s23, s33)
)


def build_weight_field(u_noisy, params: SmoothingParams) -> WeightField:
    """Directional weights at cell centres from the noisy input.

    The tensor components are averaged to cell centres before the per-plane
    eigendecomposition (averaging eigenvectors directly is ill-posed under
    their sign ambiguity, and component averaging preserves PSD).
    """
    s = _corner_average(structure_tensor3(u_noisy, params.sigma, params.rho))
    cells = s.shape[:3]
    a = np.empty(cells + (3,))
    e_hi = np.empty(cells + (3, 2))
    e_lo = np.empty(cells + (3, 2))
    for p, (_, (ca, cb, cc)) in enumerate(_PLANES):
        lam_hi, lam_lo, ehi, elo = _eig2x2_fields(s[..., ca], s[..., cb], s[..., cc])
        a[..., p] = confidence(lam_hi, lam_lo, params.epsilon)
        e_hi[..., p, :] = ehi
        e_lo[..., p, :] = elo
    return WeightField(a, e_hi, e_lo)


def export_weight_field_csv(w: WeightField, path) -> None:
    """Dump per-cell directions and confidences for external visualisation."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(
            ["i", "j", "k", "plane", "confidence", "e_hi_1", "e_hi_2", "e_lo_1", "e_lo_2"]
        )
        mc, nc, tc = w.cells
        planes = [name for name, _ in _PLANES]
        for i in range(mc):
            for j in range(nc):
                for k in range(tc):
                    for p, name in enumerate(planes):
                        out.writerow(
                            [i, j, k, name, repr(w.a[i, j, k, p])]
                            + [repr(v) for v in w.e_hi[i, j, k, p]]
                            + [repr(v) for v in w.e_lo[i, j, k, p]]
                        )
