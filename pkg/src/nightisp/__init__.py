"""nightisp: a forward reference pipeline for rendering low-light raw
captures to display RGB, with the metric and loss stack used to judge the
result.

Stages: Bayer frontend (normalise / pack / align), intensity-chroma
colour decoupling, wavelet-based dual-branch U-Net, and PNG output; plus
PSNR / SSIM / CIEDE2000 metrics and the composite training objective.
"""
from .color_hvi import GRAY_EPS, HviImage, collapse, hvi_to_rgb, rgb_to_hvi
from .errors import ShapeError, ValidationError
from .losses import (
    DEFAULT_LAMBDA_DELTA_E,
    DEFAULT_LAMBDA_FDM,
    FdmExtractorConfig,
    LossReport,
    LossWeights,
    SampleStats,
    SampleTerms,
    alpha_coefficient,
    edge_loss,
    extract_features,
    fdm_loss,
    fidelity_terms,
    reconstruction_loss,
    total_loss,
)
from .metrics import ciede2000, delta_e_loss, psnr, srgb_to_lab, ssim
from .network import (
    NetworkConfig,
    WeightBundle,
    features_to_rgb_proxy,
    generate_weights,
    layer_manifest,
    load_weights,
    render,
    rggb_to_features,
    save_weights,
    unet_branch_forward,
)
from .raw_frontend import (
    IDENTITY_H,
    PATTERNS,
    BayerFrame,
    PackedRaw,
    black_white_correct,
    frontend_process,
    load_bayer,
    load_sidecar,
    pack_rggb,
    unpack_rggb,
    warp_and_crop,
)
from .wavelet import (
    SubbandSet,
    dwt2_haar,
    idwt2_haar,
    wavelet_down_block,
    wavelet_up_block,
)

__version__ = "0.1.0"

__all__ = [
    "BayerFrame",
    "DEFAULT_LAMBDA_DELTA_E",
    "DEFAULT_LAMBDA_FDM",
    "FdmExtractorConfig",
    "GRAY_EPS",
    "HviImage",
    "IDENTITY_H",
    "PATTERNS",
    "LossReport",
    "LossWeights",
    "NetworkConfig",
    "PackedRaw",
    "SampleStats",
    "SampleTerms",
    "ShapeError",
    "SubbandSet",
    "ValidationError",
    "WeightBundle",
    "alpha_coefficient",
    "black_white_correct",
    "ciede2000",
    "collapse",
    "delta_e_loss",
    "dwt2_haar",
    "edge_loss",
    "extract_features",
    "fdm_loss",
    "features_to_rgb_proxy",
    "fidelity_terms",
    "frontend_process",
    "generate_weights",
    "hvi_to_rgb",
    "idwt2_haar",
    "layer_manifest",
    "load_bayer",
    "load_sidecar",
    "load_weights",
    "pack_rggb",
    "psnr",
    "reconstruction_loss",
    "render",
    "rggb_to_features",
    "rgb_to_hvi",
    "save_weights",
    "srgb_to_lab",
    "ssim",
    "total_loss",
    "unet_branch_forward",
    "unpack_rggb",
    "warp_and_crop",
    "wavelet_down_block",
    "wavelet_up_block",
]
