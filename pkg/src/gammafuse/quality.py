"""Per-pixel perceptual measures and the composite selection score."""

from dataclasses import dataclass

import numpy as np

from .imgcore import box_mean, box_var, luminance

__all__ = [
    "QualityConfig",
    "QualityMaps",
    "well_exposedness",
    "local_contrast",
    "color_saturation",
    "composite_score",
]


@dataclass
class QualityConfig:
    patch_k: int = 25
    mu_target: float = 0.5
    eps_e: float = 1e-3
    eps_s: float = 1e-6
    intensity: str = "mean"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.patch_k) != self.patch_k or self.patch_k < 1 or self.patch_k % 2 == 0:
            raise ValueError(f"patch_k must be an odd integer >= 1, got {self.patch_k}")
        if not 0.0 < self.mu_target < 1.0:
            raise ValueError(f"mu_target must lie in (0, 1), got {self.mu_target}")
        if self.eps_e <= 0 or self.eps_s <= 0:
            raise ValueError("eps_e and eps_s must be positive")
        if self.intensity not in ("mean", "rec709"):
            raise ValueError(f"intensity must be 'mean' or 'rec709', got {self.intensity!r}")


@dataclass
class QualityMaps:
    exposedness: np.ndarray
    contrast: np.ndarray
    saturation: np.ndarray
    composite: np.ndarray


def well_exposedness(img, cfg):
    """Distance of the local mean intensity from the target level (lower is better)."""
    mu = box_mean(luminance(img, cfg.intensity), cfg.patch_k)
    return np.abs(mu - cfg.mu_target)


def local_contrast(img, cfg):
    return box_var(luminance(img, cfg.intensity), cfg.patch_k)


def color_saturation(img, cfg):
    """HSV saturation ``(max - min) / max``; black pixels score 0."""
    img = np.asarray(img, dtype=np.float64)
    hi = img.max(axis=2)
    lo = img.min(axis=2)
    return (hi - lo) / np.maximum(hi, cfg.eps_s)


def composite_score(img, cfg):
    """Compute ``C * S / (E + eps_e)`` along with its three factors."""
    e = well_exposedness(img, cfg)
    c = local_contrast(img, cfg)
    s = color_saturation(img, cfg)
    return QualityMaps(e, c, s, c * s / (e + cfg.eps_e))
