"""Gamma-field fitting against a pseudo ground truth, and the progressive loop.

The per-pixel, per-channel exponent ``gamma`` of the tone curve
``Y = 1 - (1 - I) ** gamma`` is parameterized as ``gamma = exp(theta)`` and
fitted by first-order descent on::

    L = mean((Y - T) ** 2) + alpha * TV(gamma)

where ``TV`` is the anisotropic L1 total variation of forward differences,
normalized by ``3 * H * W``.
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .imgcore import bilinear_resample, check_image, resize_bilinear
from .pseudo_gt import build_candidate_set, fuse, score_stack, weighted_fuse
from .quality import QualityConfig, composite_score
from .refgen import RefGenConfig, clamp_input, invert_gamma_map, sample_references

__all__ = [
    "THETA_LIMIT",
    "GammaField",
    "LossReport",
    "EnhanceConfig",
    "EpochTrace",
    "Adam",
    "SGD",
    "make_optimizer",
    "rec_loss",
    "tv_loss",
    "loss_and_grad",
    "optimize_epoch",
    "progressive_enhance",
    "render",
]

THETA_LIMIT = 8.0


@dataclass
class GammaField:
    """Log-gamma parameters ``theta`` of shape ``(H, W, 3)``."""

    theta: np.ndarray

    @classmethod
    def constant(cls, h, w, theta=0.0):
        return cls(np.full((h, w, 3), float(theta)))

    @property
    def gamma(self):
        return np.exp(self.theta)

    @property
    def shape(self):
        return self.theta.shape


@dataclass
class LossReport:
    rec: float
    tv: float
    total: float
    alpha: float


@dataclass
class EnhanceConfig:
    refgen: RefGenConfig = field(default_factory=RefGenConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    # The TV weight for a free per-pixel field; a network-parameterized
    # field tolerates much larger values (5 to 500).
    alpha: float = 0.05
    epochs: int = 20
    inner_steps: int = 100
    lr: float = 0.05
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    theta_init: float = 0.0
    # Images larger than work_size on either side are optimized on a
    # work_size x work_size resample; 0 disables resampling.
    work_size: int = 256
    fusion: str = "argmax"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be an integer >= 1, got {self.epochs}")
        if int(self.inner_steps) != self.inner_steps or self.inner_steps < 1:
            raise ValueError(f"inner_steps must be an integer >= 1, got {self.inner_steps}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.adam_eps <= 0:
            raise ValueError("invalid Adam hyperparameters")
        if abs(self.theta_init) > THETA_LIMIT:
            raise ValueError(f"|theta_init| must be <= {THETA_LIMIT}")
        if int(self.work_size) != self.work_size or self.work_size < 0:
            raise ValueError(f"work_size must be an integer >= 0, got {self.work_size}")
        if self.fusion not in ("argmax", "weighted"):
            raise ValueError(f"fusion must be 'argmax' or 'weighted', got {self.fusion!r}")
        self.refgen.validate()
        self.quality.validate()


_TRACE_COLUMNS = ("epoch", "rec", "tv", "total", "mse_prev_T", "mean_score_T", "mean_score_Y")


@dataclass
class EpochTrace:
    """Per-epoch series recorded by :func:`progressive_enhance`.

    ``mean_score_T`` is the mean per-pixel score of the fused pseudo ground
    truth as seen by the fusion step (the winning score for argmax fusion),
    ``mean_score_Y`` the mean composite of the previous output candidate.
    ``rescored_T`` is the mean composite of ``T`` recomputed on ``T`` itself.
    """

    epoch: list = field(default_factory=list)
    rec: list = field(default_factory=list)
    tv: list = field(default_factory=list)
    total: list = field(default_factory=list)
    mse_prev_T: list = field(default_factory=list)
    mean_score_T: list = field(default_factory=list)
    mean_score_Y: list = field(default_factory=list)
    rescored_T: list = field(default_factory=list)
    ref_gammas: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)

    def __len__(self):
        return len(self.epoch)

    def to_text(self):
        buf = io.StringIO()
        buf.write(",".join(_TRACE_COLUMNS) + "\n")
        for row in zip(*(getattr(self, c) for c in _TRACE_COLUMNS)):
            buf.write(str(row[0]) + "," + ",".join(repr(float(v)) for v in row[1:]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = tuple(h.strip() for h in lines[0].split(","))
        if header != _TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        trace = cls()
        for ln in lines[1:]:
            parts = ln.split(",")
            trace.epoch.append(int(parts[0]))
            for name, v in zip(_TRACE_COLUMNS[1:], parts[1:]):
                getattr(trace, name).append(float(v))
        return trace


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta, grad):
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, theta, grad):
        return theta - self.lr * grad


def make_optimizer(cfg):
    if cfg.optimizer == "adam":
        return Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    return SGD(cfg.lr)


def _check_same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def rec_loss(output, target):
    """Mean squared error over all ``3 * H * W`` values."""
    _check_same_shape(output, target)
    d = np.asarray(output, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(d * d))


def _tv_terms(gamma):
    dx = gamma[:, 1:] - gamma[:, :-1]
    dy = gamma[1:, :] - gamma[:-1, :]
    return dx, dy


def tv_loss(g):
    """Anisotropic L1 total variation of ``gamma``, normalized by ``3 * H * W``."""
    gamma = g.gamma if isinstance(g, GammaField) else np.asarray(g, dtype=np.float64)
    dx, dy = _tv_terms(gamma)
    return float((np.abs(dx).sum() + np.abs(dy).sum()) / gamma.size)


class _Problem:
    """Caches ``log(1 - I)`` for repeated loss/gradient evaluations."""

    def __init__(self, input_img, target):
        _check_same_shape(input_img, target)
        self.base = 1.0 - clamp_input(input_img)
        self.log_base = np.log(self.base)
        self.target = np.asarray(target, dtype=np.float64)

    def evaluate(self, theta, alpha, with_grad=True):
        n = theta.size
        gamma = np.exp(theta)
        # Same expression as invert_gamma_map so a rendered target is an exact fixed point.
        powered = self.base**gamma
        resid = (1.0 - powered) - self.target
        rec = float(np.mean(resid * resid))
        dx, dy = _tv_terms(gamma)
        tv = float((np.abs(dx).sum() + np.abs(dy).sum()) / n)
        report = LossReport(rec, tv, rec + alpha * tv, float(alpha))
        if not with_grad:
            return report, None
        d_gamma = (2.0 / n) * resid * (-powered * self.log_base)
        if alpha:
            sx = np.sign(dx)
            sy = np.sign(dy)
            d_tv = np.zeros_like(gamma)
            d_tv[:, 1:] += sx
            d_tv[:, :-1] -= sx
            d_tv[1:, :] += sy
            d_tv[:-1, :] -= sy
            d_gamma += (alpha / n) * d_tv
        return report, d_gamma * gamma


def loss_and_grad(input_img, target, g, alpha):
    """Exact loss and its gradient with respect to ``theta``.

    The TV term uses the ``sign`` subgradient with ``sign(0) = 0``.

    Returns
    -------
    report : LossReport
    grad_theta : ndarray, shape (H, W, 3)
    """
    theta = g.theta if isinstance(g, GammaField) else np.asarray(g, dtype=np.float64)
    _check_same_shape(input_img, theta)
    return _Problem(input_img, target).evaluate(theta, alpha)


def optimize_epoch(input_img, target, g, cfg, optimizer=None):
    """Run ``cfg.inner_steps`` updates of ``theta`` toward ``target``.

    Passing the same ``optimizer`` across calls keeps its moment estimates.
    Each returned report is the loss at the state *before* that step.
    """
    if optimizer is None:
        optimizer = make_optimizer(cfg)
    _check_same_shape(input_img, g.theta)
    problem = _Problem(input_img, target)
    theta = g.theta.copy()
    reports = []
    for _ in range(cfg.inner_steps):
        report, grad = problem.evaluate(theta, cfg.alpha)
        reports.append(report)
        theta = np.clip(optimizer.step(theta, grad), -THETA_LIMIT, THETA_LIMIT)
    return GammaField(theta), reports


def render(input_img, g):
    """Apply a gamma field to an image.

    A field whose spatial size differs from the image's (typically the
    optimization work size) is resampled bilinearly in ``theta`` space.
    """
    input_img = np.asarray(input_img, dtype=np.float64)
    theta = g.theta if isinstance(g, GammaField) else np.asarray(g, dtype=np.float64)
    if theta.ndim != 3 or theta.shape[2] != input_img.shape[2]:
        raise ValueError(f"gamma field shape {theta.shape} incompatible with image {input_img.shape}")
    if theta.shape[:2] != input_img.shape[:2]:
        theta = bilinear_resample(theta, *input_img.shape[:2])
    return invert_gamma_map(input_img, np.exp(theta))


def work_shape(h, w, work_size):
    if work_size and (h > work_size or w > work_size):
        return work_size, work_size
    return h, w


def progressive_enhance(input_img, cfg=None, rng=None):
    """Enhance one image by progressive pseudo ground truth fitting.

    Each epoch draws fresh references, fuses them with the input and the
    previous output into a pseudo ground truth ``T``, and runs
    :func:`optimize_epoch` against it. Optimizer moments carry over between
    epochs.

    Parameters
    ----------
    input_img : array_like, shape (H, W, 3)
    cfg : EnhanceConfig, optional
    rng : numpy.random.Generator, optional
        Defaults to a generator seeded with ``cfg.refgen.seed``.

    Returns
    -------
    output : ndarray, shape (H, W, 3)
        Enhanced image at the input's resolution.
    field : GammaField
        Fitted field at the input's resolution.
    trace : EpochTrace
    """
    cfg = cfg or EnhanceConfig()
    img = check_image(input_img, "input_img")
    h, w = img.shape[:2]
    wh, ww = work_shape(h, w, cfg.work_size)
    work = img if (wh, ww) == (h, w) else resize_bilinear(img, ww, wh)
    if rng is None:
        rng = np.random.default_rng(cfg.refgen.seed)
    fuse_fn = weighted_fuse if cfg.fusion == "weighted" else fuse

    g = GammaField.constant(wh, ww, cfg.theta_init)
    optimizer = make_optimizer(cfg)
    trace = EpochTrace()
    prev_target = None
    for epoch in range(1, cfg.epochs + 1):
        refs, gammas = sample_references(work, cfg.refgen, rng)
        prev = render(work, g) if epoch > 1 else None
        cands = build_candidate_set(work, prev, refs)
        scores = score_stack(cands, cfg.quality)
        result = fuse_fn(cands, cfg.quality, scores=scores)
        target = result.pseudo_gt

        g, steps = optimize_epoch(work, target, g, cfg, optimizer)
        final, _ = _Problem(work, target).evaluate(g.theta, cfg.alpha, with_grad=False)
        rescored = float(np.mean(composite_score(target, cfg.quality).composite))

        trace.epoch.append(epoch)
        trace.rec.append(final.rec)
        trace.tv.append(final.tv)
        trace.total.append(final.total)
        trace.mse_prev_T.append(
            math.nan if prev_target is None else rec_loss(target, prev_target)
        )
        trace.mean_score_T.append(
            float(np.mean(result.winning_score)) if cfg.fusion == "argmax" else rescored
        )
        trace.mean_score_Y.append(float(np.mean(scores[1])))
        trace.rescored_T.append(rescored)
        trace.ref_gammas.append(gammas)
        trace.step_losses.append(steps)
        prev_target = target

    if g.shape[:2] != (h, w):
        g = GammaField(np.clip(bilinear_resample(g.theta, h, w), -THETA_LIMIT, THETA_LIMIT))
    return render(img, g), g, trace

