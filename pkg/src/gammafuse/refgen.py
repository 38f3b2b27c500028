"""Randomized re-exposures of an image through the inverted gamma curve."""

from dataclasses import dataclass

import numpy as np

__all__ = ["EPS_I", "RefGenConfig", "clamp_input", "invert_gamma_map", "sample_references"]

#: Inputs are clamped to ``[EPS_I, 1 - EPS_I]`` before the power so that
#: ``log(1 - I)`` stays bounded (|log(1 - I)| <= ln 1e4).
EPS_I = 1e-4


@dataclass
class RefGenConfig:
    """Reference sampling law.

    ``log(gamma)`` is drawn uniformly from ``under_range`` and from
    ``over_range``, ``n_each_side`` times each. On the inverted curve
    ``gamma > 1`` brightens, so ``under_range`` (nonnegative, meant for
    under-exposed inputs) yields the brighter references and ``over_range``
    (nonpositive) the darker ones.
    """

    n_each_side: int = 1
    under_range: tuple = (0.0, 3.0)
    over_range: tuple = (-2.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        self.under_range = tuple(float(v) for v in self.under_range)
        self.over_range = tuple(float(v) for v in self.over_range)
        self.validate()

    def validate(self):
        if int(self.n_each_side) != self.n_each_side or self.n_each_side < 1:
            raise ValueError(f"n_each_side must be an integer >= 1, got {self.n_each_side}")
        lo, hi = self.under_range
        if not 0.0 <= lo <= hi:
            raise ValueError(f"under_range must satisfy 0 <= lo <= hi, got {self.under_range}")
        lo, hi = self.over_range
        if not lo <= hi <= 0.0:
            raise ValueError(f"over_range must satisfy lo <= hi <= 0, got {self.over_range}")


def clamp_input(img):
    return np.clip(np.asarray(img, dtype=np.float64), EPS_I, 1.0 - EPS_I)


def invert_gamma_map(img, gamma):
    """Apply ``1 - (1 - I) ** gamma`` to the clamped image.

    Parameters
    ----------
    img : ndarray, shape (H, W, 3)
        Image in ``[0, 1]``.
    gamma : float or ndarray
        Positive exponent, scalar or broadcastable to ``img``.

    Returns
    -------
    out : ndarray
        Tone-mapped image in ``[0, 1]``.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if not np.all(gamma > 0):
        raise ValueError("gamma must be strictly positive")
    base = 1.0 - clamp_input(img)
    return np.clip(1.0 - base**gamma, 0.0, 1.0)


def sample_references(img, cfg, rng=None):
    """Draw ``2N`` randomized references.

    Darker references (``over_range`` draws) come first, then brighter ones
    (``under_range`` draws); values are drawn in that same order. If ``rng``
    is omitted a fresh generator is seeded from ``cfg.seed``.

    Returns
    -------
    refs : list of ndarray
    gammas : ndarray, shape (2N,)
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n = cfg.n_each_side
    x_dark = rng.uniform(cfg.over_range[0], cfg.over_range[1], size=n)
    x_bright = rng.uniform(cfg.under_range[0], cfg.under_range[1], size=n)
    gammas = np.exp(np.concatenate([x_dark, x_bright]))
    return [invert_gamma_map(img, g) for g in gammas], gammas
