"""Synthetic test images with known exposure defects."""

import numpy as np

from .refgen import invert_gamma_map

__all__ = ["mixed_exposure_ramp", "gamma_distort"]


def mixed_exposure_ramp(seed, size=128):
    """Tinted, lightly textured ramp multiplied by a spatially varying gain.

    The gain spans about 1/4 to 4 along a random direction, so the image
    holds both crushed shadows and clipped highlights.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    ramp = 0.05 + 0.9 * xx
    tint = rng.uniform(0.4, 1.0, 3)
    tint /= tint.max()
    fx, fy = rng.uniform(4, 10, 2)
    texture = 1 + 0.2 * np.sin(2 * np.pi * fx * xx) * np.sin(2 * np.pi * fy * yy)
    angle = rng.uniform(0, 2 * np.pi)
    direction = np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5)
    gain = 2.0 ** (4 * direction)
    return np.clip((ramp * texture * gain)[..., None] * tint, 0.0, 1.0)


def gamma_distort(img, darken=True, lo=0.8, hi=1.8):
    """Corrupt ``img`` with a horizontally varying inverted-gamma curve.

    ``log(gamma)`` ramps from ``lo`` to ``hi`` in magnitude across the
    width; ``darken`` picks the sign.

    Returns
    -------
    corrupted : ndarray
    theta : ndarray
        The applied ``log(gamma)`` field, shape (H, W, 1).
    """
    img = np.asarray(img, dtype=np.float64)
    w = img.shape[1]
    mag = lo + (hi - lo) * np.arange(w) / max(w - 1, 1)
    theta = np.broadcast_to((-mag if darken else mag)[None, :, None], img.shape[:2] + (1,))
    return invert_gamma_map(img, np.exp(theta)), np.array(theta)
