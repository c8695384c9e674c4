"""End-to-end denoising workflows: directional-TV denoising, the ROF 2D+t
baseline, the rule-of-thumb parameter map and the PSNR line search."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ops
from .solver import SolverConfig, SolveReport, solve_accelerated_pd
from .structure import SmoothingParams, build_weight_field
from .volume import as_channels, psnr, psnr_per_frame

__all__ = [
    "DenoiseParams",
    "SearchState",
    "tdv_denoise",
    "rof2dt_denoise",
    "rule_of_thumb",
    "line_search_params",
    "compare_report",
    "write_report_csv",
]

ROF_L_SQ = 12.0

# The fidelity weight eta acts on unit-scale intensities (eta ~ 255/noise_std
# only balances the TV term there), so solves run on data/INTENSITY_SCALE and
# are mapped back. Weight-field estimation stays on the raw [0, 255] data,
# where the confidence regulariser epsilon is calibrated.
INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class DenoiseParams:
    """Model parameters: smoothing std-devs (sigma <= rho) and fidelity eta."""

    sigma: float
    rho: float
    eta: float

    def __post_init__(self):
        if not (0 < self.sigma <= self.rho):
            raise ValueError(f"need 0 < sigma <= rho, got ({self.sigma}, {self.rho})")
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")


def tdv_denoise(
    u_noisy,
    params: DenoiseParams,
    cfg: SolverConfig = SolverConfig(),
    weights=None,
    backend_name: str | None = None,
) -> tuple[np.ndarray, list[SolveReport]]:
    """Directional-TV denoising, each colour channel processed independently.

    The weight field is built once per channel from the noisy data. `weights`
    (a WeightField or one per channel) overrides that estimation; it exists
    for inspection and for testing against operators with known weights.
    Returns the denoised video in the input's shape plus one report per channel.
    """
    v = as_channels(u_noisy)
    if weights is not None and not isinstance(weights, (list, tuple)):
        weights = [weights] * v.shape[0]
    out = np.empty_like(v)
    reports = []
    for c in range(v.shape[0]):
        chan = v[c]
        if weights is None:
            w = build_weight_field(chan, SmoothingParams(params.sigma, params.rho))
        else:
            w = weights[c]

        def K(u, w=w):
            return ops.apply_K(u, w, backend_name)

        def K_adj(y, w=w):
            return ops.apply_K_adjoint(y, w, backend_name)

        scaled = chan / INTENSITY_SCALE
        u, rep = solve_accelerated_pd(K, K_adj, scaled, scaled, params.eta, cfg)
        out[c] = INTENSITY_SCALE * u
        reports.append(rep)
    if np.asarray(u_noisy).ndim == 3:
        return out[0], reports
    return out, reports


def rof2dt_denoise(
    u_noisy,
    eta: float,
    cfg: SolverConfig | None = None,
    on_cells: bool = False,
) -> np.ndarray:
    """Spatio-temporal total variation baseline (plain 3-channel gradient,
    per-voxel 3-vector dual ball).

    on_cells=True restricts the gradient to the grid cells, matching the
    discretisation inside the weighted operator; the classical
    voxel-staggered form is the default.
    """
    if cfg is None:
        cfg = SolverConfig(l_sq=ROF_L_SQ)
    v = as_channels(u_noisy)

    if on_cells:

        def K(u):
            return ops.to_cells(ops.gradient3(u))

        def K_adj(y, shape=v.shape[1:]):
            return ops.gradient3_adjoint(ops.to_cells_adjoint(y, shape))

    else:
        K = ops.gradient3
        K_adj = ops.gradient3_adjoint

    out = np.empty_like(v)
    for c in range(v.shape[0]):
        scaled = v[c] / INTENSITY_SCALE
        u, _ = solve_accelerated_pd(K, K_adj, scaled, scaled, eta, cfg)
        out[c] = INTENSITY_SCALE * u
    if np.asarray(u_noisy).ndim == 3:
        return out[0]
    return out


def rule_of_thumb(noise_std: float) -> DenoiseParams:
    """Quasi-optimal parameters from the noise level:
    eta = 255/std, sigma = rho = 3.2/sqrt(eta)."""
    if noise_std <= 0:
        raise ValueError(f"noise std must be > 0, got {noise_std}")
    eta = 255.0 / noise_std
    s = 3.2 * eta**-0.5
    return DenoiseParams(sigma=s, rho=s, eta=eta)


@dataclass
class SearchState:
    best_params: DenoiseParams
    best_psnr: float
    radius: float
    log: list[tuple[DenoiseParams, float]] = field(default_factory=list)


def _neighbours(p: DenoiseParams, radius: float):
    cands = []
    for name in ("sigma", "rho", "eta"):
        for s in (+1.0, -1.0):
            vals = {"sigma": p.sigma, "rho": p.rho, "eta": p.eta}
            vals[name] += s * radius
            if vals["sigma"] <= 0 or vals["eta"] <= 0 or vals["sigma"] > vals["rho"]:
                continue
            cands.append(DenoiseParams(**vals))
    # deterministic evaluation order; lexicographic (sigma, rho, eta) breaks ties
    cands.sort(key=lambda q: (q.sigma, q.rho, q.eta))
    return cands


def line_search_params(
    u_noisy,
    u_clean,
    init: DenoiseParams,
    radius0: float = 0.5,
    shrink: float = 0.5,
    budget: int = 50,
    min_radius: float = 0.01,
    objective=None,
    cfg: SolverConfig = SolverConfig(),
    search_tol: float = 1e-3,
) -> SearchState:
    """Hill-climb over (sigma, rho, eta) maximising PSNR against the ground
    truth, under the constraint sigma <= rho.

    Axis-aligned +/- radius steps; the radius halves when no neighbour
    improves and the search stops below min_radius or when the evaluation
    budget runs out. Candidate solves use a relaxed tolerance (search_tol);
    the winner is re-scored at the configured tolerance.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    default_objective = objective is None
    if default_objective:
        relaxed = replace(cfg, tol=search_tol)

        def objective(p):
            out, _ = tdv_denoise(u_noisy, p, relaxed)
            return psnr(out, u_clean)

    evals = 0

    def run(p):
        nonlocal evals
        evals += 1
        return objective(p)

    state = SearchState(init, run(init), radius0, [])
    state.log.append((init, state.best_psnr))
    while state.radius >= min_radius and evals < budget:
        improved = False
        for cand in _neighbours(state.best_params, state.radius):
            if evals >= budget:
                break
            val = run(cand)
            state.log.append((cand, val))
            if val > state.best_psnr:
                state.best_params, state.best_psnr = cand, val
                improved = True
                break
        if not improved:
            state.radius *= shrink
    # re-score the winner at full accuracy when using the real objective
    if default_objective:
        out, _ = tdv_denoise(u_noisy, state.best_params, cfg)
        rescored = psnr(out, u_clean)
        state.log.append((state.best_params, rescored))
        state.best_psnr = max(state.best_psnr, rescored)
    return state


def compare_report(clean, outputs: dict, peak: float = 255.0) -> list[tuple]:
    """Global and per-frame PSNR rows for each named method.

    Rows are (method, frame, psnr_db) with frame = -1 for the global value.
    """
    rows = []
    for name, video in outputs.items():
        rows.append((name, -1, psnr(video, clean, peak)))
        for k, val in enumerate(psnr_per_frame(video, clean, peak)):
            rows.append((name, k, val))
    return rows


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["method", "frame", "psnr_db"])
        for method, frame, value in rows:
            out.writerow([method, frame, "inf" if math.isinf(value) else f"{value:.6f}"])
