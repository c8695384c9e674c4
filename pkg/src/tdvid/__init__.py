"""Anisotropic (directional) total-variation video denoising.

The regulariser penalises derivatives along locally estimated directional
frames built from a volumetric structure tensor; the resulting convex
problem is solved with an accelerated primal-dual scheme.
"""

from .ops import (
    WeightField,
    apply_K,
    apply_K_adjoint,
    apply_M,
    gradient3,
    identity_weight_field,
    operator_norm_sq,
    operator_norm_sq_gradient,
    stacked_gradient,
    to_cells,
)
from .pipeline import (
    DenoiseParams,
    SearchState,
    compare_report,
    line_search_params,
    rof2dt_denoise,
    rule_of_thumb,
    tdv_denoise,
)
from .solver import SolveReport, SolverConfig, energy, prox_dual, prox_primal, solve_accelerated_pd
from .structure import (
    SmoothingParams,
    build_weight_field,
    confidence,
    eig2x2_symmetric,
    gaussian_smooth,
    structure_tensor3,
)
from .volume import (
    NoiseSpec,
    add_gaussian_noise,
    as_channels,
    as_volume,
    franke_video,
    psnr,
    psnr_per_frame,
)

__version__ = "0.1.0"
