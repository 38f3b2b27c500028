"""Reference-free exposure correction.

Randomized inverted-gamma references are fused into a per-image pseudo
ground truth by per-pixel quality scores, and a smooth per-pixel gamma map
is fitted to it, progressively, with each epoch's output joining the next
epoch's candidates.
"""

from .estimator import GammaFieldEnhancer
from .gamma_opt import (
    EnhanceConfig,
    EpochTrace,
    GammaField,
    LossReport,
    loss_and_grad,
    optimize_epoch,
    progressive_enhance,
    rec_loss,
    render,
    tv_loss,
)
from .imgcore import (
    ImageDecodeError,
    box_mean,
    box_var,
    decode_srgb8,
    encode_srgb8,
    luminance,
    read_image,
    resize_bilinear,
    write_image,
)
from .metrics import MetricReport, psnr, ssim
from .pseudo_gt import CandidateSet, FusionResult, build_candidate_set, fuse, weighted_fuse
from .quality import (
    QualityConfig,
    QualityMaps,
    color_saturation,
    composite_score,
    local_contrast,
    well_exposedness,
)
from .refgen import RefGenConfig, invert_gamma_map, sample_references

__version__ = "0.1.0"
