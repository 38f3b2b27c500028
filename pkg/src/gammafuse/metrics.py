"""Full-reference fidelity metrics."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgcore import luminance

__all__ = ["PSNR_CAP", "MetricReport", "psnr", "ssim", "evaluate"]

PSNR_CAP = 100.0


@dataclass
class MetricReport:
    psnr: float
    ssim: float


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """Peak signal-to-noise ratio in dB with peak 1.0, capped at 100 dB."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_window(size, sigma):
    x = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(x**2) / (2 * sigma**2))
    return w / w.sum()


def ssim(a, b, win_size=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Single-scale SSIM on luminance, averaged over fully-covered windows.

    Parameters
    ----------
    a, b : ndarray, shape (H, W, 3) or (H, W)
    win_size : int
        Side of the Gaussian window.
    sigma : float
        Gaussian standard deviation.

    Returns
    -------
    float
    """
    a, b = _pair(a, b)
    if a.ndim == 3:
        a = luminance(a)
        b = luminance(b)
    if min(a.shape) < win_size:
        raise ValueError(f"image {a.shape} is smaller than the {win_size}x{win_size} window")
    w = _gaussian_window(win_size, sigma)

    def filt(x):
        x = ndimage.correlate1d(x, w, axis=0, mode="reflect")
        return ndimage.correlate1d(x, w, axis=1, mode="reflect")

    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    smap = num / den
    r = win_size // 2
    # Only windows lying fully inside the image count.
    return float(smap[r:-r, r:-r].mean())


def evaluate(a, b):
    return MetricReport(psnr(a, b), ssim(a, b))
