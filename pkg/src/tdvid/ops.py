"""Staggered-grid derivative operators and the weighted gradient K = M W grad.

Layout conventions:
  * volumes are (M, N, T) arrays, values at grid vertices;
  * half-step forward differences live on grid edges, stored in full-size
    arrays with an exact 0 on the last line of the differencing axis
    (Neumann rule);
  * the 6-channel stacked gradient duplicates the 3 difference channels in
    the order (d1, d2, d1, d3, d2, d3), i.e. planes {1,2}, {1,3}, {2,3};
  * cell fields have shape (M-1, N-1, T-1, channels), indexed by the grid
    cells; the transfer from edges to cells (the operator between the
    stacked gradient and the per-cell weighting) takes each channel's edge
    sample adjacent to the cell. This keeps the duplicated channels
    identical, preserves high-frequency content, and makes the operator
    norm bound ||K||^2 <= 24 tight (2 x the plain gradient's 12).

The adjoint here is the exact algebraic transpose of the discrete forward
composition, which the primal-dual solver relies on.

Hot paths (apply_K / apply_K_adjoint) have fused numba kernels; set the
environment variable TDVID_BACKEND=numpy to force the pure-numpy fallback
(or =numba to require the jit path). See tdvid.backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .volume import DimensionError, as_volume

__all__ = [
    "STACK_AXES",
    "WeightField",
    "identity_weight_field",
    "random_weight_field",
    "gradient3",
    "gradient3_adjoint",
    "stacked_gradient",
    "stack_adjoint",
    "to_cells",
    "to_cells_adjoint",
    "apply_M",
    "apply_K",
    "apply_K_adjoint",
    "operator_norm_sq",
    "operator_norm_sq_gradient",
]

# differencing axis of each stacked channel
STACK_AXES = (0, 1, 0, 2, 1, 2)

# (row, col) index pairs of the three 2x2 plane blocks inside the 6-vector
PLANE_CHANNELS = ((0, 1), (2, 3), (4, 5))


@dataclass
class WeightField:
    """Per-cell directional weights for the three coordinate planes.

    Attributes (cells = (M-1, N-1, T-1)):
      a:     (*cells, 3)    confidence in [0, 1] per plane {1,2},{1,3},{2,3}
      e_hi:  (*cells, 3, 2) unit gradient direction per plane
      e_lo:  (*cells, 3, 2) unit tangential direction, orthogonal to e_hi

    The 2x2 block acting on a plane's derivative pair is
    diag(a, 1) @ [[e_hi], [e_lo]].
    """

    a: np.ndarray
    e_hi: np.ndarray
    e_lo: np.ndarray
    _mats: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def cells(self) -> tuple[int, int, int]:
        return self.a.shape[:3]

    @property
    def mats(self) -> np.ndarray:
        """The stacked 2x2 blocks, shape (*cells, 3, 2, 2), C-contiguous."""
        if self._mats is None:
            m = np.empty(self.a.shape[:4] + (2, 2))
            m[..., 0, :] = self.a[..., None] * self.e_hi
            m[..., 1, :] = self.e_lo
            self._mats = np.ascontiguousarray(m)
        return self._mats

    def validate(self, tol: float = 1e-12) -> None:
        """Check admissibility: unit orthogonal eigenvector rows, a in [0, 1]."""
        for e in (self.e_hi, self.e_lo):
            n = np.linalg.norm(e, axis=-1)
            if np.max(np.abs(n - 1.0)) > tol:
                raise ValueError("eigenvector rows are not unit norm")
        dots = np.sum(self.e_hi * self.e_lo, axis=-1)
        if np.max(np.abs(dots)) > tol:
            raise ValueError("eigenvector rows are not orthogonal")
        if self.a.min() < -tol or self.a.max() > 1.0 + tol:
            raise ValueError("confidences outside [0, 1]")


def identity_weight_field(cells: tuple[int, int, int]) -> WeightField:
    """Weights that make every 2x2 block the identity (a=1, canonical frame)."""
    a = np.ones(cells + (3,))
    e_hi = np.zeros(cells + (3, 2))
    e_lo = np.zeros(cells + (3, 2))
    e_hi[..., 0] = 1.0
    e_lo[..., 1] = 1.0
    return WeightField(a, e_hi, e_lo)


def random_weight_field(cells: tuple[int, int, int], rng) -> WeightField:
    """Random admissible weights: random rotation frames, a ~ U[0, 1]."""
    theta = rng.uniform(0.0, 2.0 * np.pi, size=cells + (3,))
    e_hi = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    e_lo = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    a = rng.uniform(0.0, 1.0, size=cells + (3,))
    return WeightField(a, e_hi, e_lo)


# ---------------------------------------------------------------------------
# pure-numpy building blocks (also the reference / fallback path)
# ---------------------------------------------------------------------------

def gradient3(u) -> np.ndarray:
    """Half-step forward differences along each axis; 0 on the last line."""
    u = as_volume(u)
    g = np.zeros(u.shape + (3,))
    g[:-1, :, :, 0] = u[1:] - u[:-1]
    g[:, :-1, :, 1] = u[:, 1:] - u[:, :-1]
    g[:, :, :-1, 2] = u[:, :, 1:] - u[:, :, :-1]
    return g


def gradient3_adjoint(g) -> np.ndarray:
    """Exact transpose of gradient3 (a negative divergence); ignores the
    zeroed last line of each channel."""
    g = np.asarray(g, dtype=np.float64)
    out = np.zeros(g.shape[:3])
    out[1:] += g[:-1, :, :, 0]
    out[:-1] -= g[:-1, :, :, 0]
    out[:, 1:] += g[:, :-1, :, 1]
    out[:, :-1] -= g[:, :-1, :, 1]
    out[:, :, 1:] += g[:, :, :-1, 2]
    out[:, :, :-1] -= g[:, :, :-1, 2]
    return out


def stacked_gradient(u) -> np.ndarray:
    """6-channel gradient stack (d1, d2, d1, d3, d2, d3), shape (M, N, T, 6)."""
    g = gradient3(u)
    return g[..., [0, 1, 0, 2, 1, 2]]


def stack_adjoint(e6) -> np.ndarray:
    """Collapse the duplicated 6-channel stack back to 3 channels (transpose)."""
    e6 = np.asarray(e6, dtype=np.float64)
    g = np.empty(e6.shape[:3] + (3,))
    g[..., 0] = e6[..., 0] + e6[..., 2]
    g[..., 1] = e6[..., 1] + e6[..., 4]
    g[..., 2] = e6[..., 3] + e6[..., 5]
    return g


def to_cells(g) -> np.ndarray:
    """Co-locate edge samples on the grid cells.

    Each channel's value on cell (i, j, k) is its edge sample at the cell's
    base corner, i.e. the restriction g[:-1, :-1, :-1]. This assigns the
    half-step difference along each axis to the unique cell it borders on
    the low side, without smoothing across cells. Output shape
    (M-1, N-1, T-1, C).
    """
    g = np.asarray(g, dtype=np.float64)
    return g[:-1, :-1, :-1, :].copy()


def to_cells_adjoint(y, shape) -> np.ndarray:
    """Exact transpose of to_cells: zero-pad back to the full edge grid."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(tuple(shape) + (y.shape[-1],))
    out[:-1, :-1, :-1, :] = y
    return out


def apply_M(c, w: WeightField, adjoint: bool = False) -> np.ndarray:
    """Apply the per-cell 2x2 plane blocks (or their transposes) to a 6-channel
    cell field."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != w.cells + (6,):
        raise DimensionError(f"cell field {c.shape} does not match weights {w.cells}")
    m = w.mats
    out = np.empty_like(c)
    for p, (c0, c1) in enumerate(PLANE_CHANNELS):
        m00, m01 = m[..., p, 0, 0], m[..., p, 0, 1]
        m10, m11 = m[..., p, 1, 0], m[..., p, 1, 1]
        if adjoint:
            m01, m10 = m10, m01
        out[..., c0] = m00 * c[..., c0] + m01 * c[..., c1]
        out[..., c1] = m10 * c[..., c0] + m11 * c[..., c1]
    return out


# ---------------------------------------------------------------------------
# fused hot-path operators with backend dispatch
# ---------------------------------------------------------------------------

def _check_weights_for(u_shape, w: WeightField):
    want = (u_shape[0] - 1, u_shape[1] - 1, u_shape[2] - 1)
    if w.cells != want:
        raise DimensionError(f"weights on {w.cells} cells, volume needs {want}")


def apply_K(u, w: WeightField, backend_name: str | None = None) -> np.ndarray:
    """The composed weighted gradient: apply_M(to_cells(stacked_gradient(u)))."""
    u = as_volume(u)
    _check_weights_for(u.shape, w)
    if backend.resolve(backend_name) == "numba":
        from . import _kernels_nb

        return _kernels_nb.apply_k(u, w.mats)
    return apply_M(to_cells(stacked_gradient(u)), w)


def apply_K_adjoint(y, w: WeightField, backend_name: str | None = None) -> np.ndarray:
    """Exact transpose of apply_K; maps a 6-channel cell field to a volume."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != w.cells + (6,):
        raise DimensionError(f"dual field {y.shape} does not match weights {w.cells}")
    if backend.resolve(backend_name) == "numba":
        from . import _kernels_nb

        return _kernels_nb.apply_k_adjoint(np.ascontiguousarray(y), w.mats)
    shape = tuple(c + 1 for c in w.cells)
    return gradient3_adjoint(stack_adjoint(to_cells_adjoint(apply_M(y, w, adjoint=True), shape)))


# ---------------------------------------------------------------------------
# operator norm estimation
# ---------------------------------------------------------------------------

class PowerIterationError(RuntimeError):
    """Power iteration failed to converge within the iteration cap."""


def _power_iteration(apply_normal, shape, tol, maxiter, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(maxiter):
        av = apply_normal(v)
        lam_new = float(np.vdot(v, av))
        nrm = np.linalg.norm(av)
        if nrm <= 1e-300:
            return 0.0
        v = av / nrm
        if it > 0 and abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise PowerIterationError(
        f"no convergence to rel tol {tol} within {maxiter} iterations (last {lam})"
    )


def operator_norm_sq(
    w: WeightField,
    tol: float = 1e-6,
    maxiter: int = 10000,
    seed: int = 7,
    backend_name: str | None = None,
) -> float:
    """Largest eigenvalue of K*K (= ||K||^2) by power iteration.

    For admissible weights on the unit grid this is bounded by 24.
    """
    shape = tuple(c + 1 for c in w.cells)

    def normal(v):
        return apply_K_adjoint(apply_K(v, w, backend_name), w, backend_name)

    return _power_iteration(normal, shape, tol, maxiter, seed)


def operator_norm_sq_gradient(shape, tol: float = 1e-6, maxiter: int = 10000, seed: int = 7) -> float:
    """||grad||^2 of the plain staggered 3-channel gradient (bounded by 12)."""

    def normal(v):
        return gradient3_adjoint(gradient3(v))

    return _power_iteration(normal, tuple(shape), tol, maxiter, seed)
