"""Candidate sets and per-pixel argmax fusion into a pseudo ground truth."""

from dataclasses import dataclass, field

import numpy as np

from .quality import composite_score

__all__ = [
    "CandidateSet",
    "FusionResult",
    "build_candidate_set",
    "fuse",
    "weighted_fuse",
]


@dataclass
class CandidateSet:
    """Ordered fusion candidates.

    Index 0 is the input, index 1 the previous output, then the references
    (darker block, brighter block). Sets built directly from arbitrary images
    (e.g. by the ``fuse`` command) carry free-form labels.
    """

    candidates: list
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.candidates) == 0:
            raise ValueError("candidate set is empty")
        shape = np.shape(self.candidates[0])
        for i, c in enumerate(self.candidates):
            if np.shape(c) != shape:
                raise ValueError(
                    f"candidate {i} has shape {np.shape(c)}, expected {shape}"
                )
        if not self.labels:
            self.labels = [f"candidate{i}" for i in range(len(self.candidates))]
        if len(self.labels) != len(self.candidates):
            raise ValueError("labels and candidates differ in length")

    def __len__(self):
        return len(self.candidates)


@dataclass
class FusionResult:
    pseudo_gt: np.ndarray
    winner_index: np.ndarray
    winning_score: np.ndarray
    scores: np.ndarray = None


def build_candidate_set(input_img, prev, refs):
    """Assemble ``[input, prev, *refs]``; a missing ``prev`` becomes the input."""
    if len(refs) == 0 or len(refs) % 2:
        raise ValueError(f"need a nonempty, even number of references, got {len(refs)}")
    if prev is None:
        prev = input_img
    n = len(refs) // 2
    labels = (
        ["input", "previous"]
        + [f"darker{i}" for i in range(n)]
        + [f"brighter{i}" for i in range(n)]
    )
    return CandidateSet([input_img, prev, *refs], labels)


def _as_candidates(cands):
    if isinstance(cands, CandidateSet):
        return cands
    return CandidateSet(list(cands))


def score_stack(cands, cfg):
    return np.stack([composite_score(c, cfg).composite for c in cands.candidates])


def fuse(cands, cfg, scores=None):
    """Copy every pixel from the candidate with the highest composite score.

    Ties go to the lowest index. ``scores`` may pass precomputed composite
    planes of shape ``(n_candidates, H, W)``.

    Parameters
    ----------
    cands : CandidateSet or sequence of ndarray
    cfg : QualityConfig

    Returns
    -------
    FusionResult
    """
    cands = _as_candidates(cands)
    if scores is None:
        scores = score_stack(cands, cfg)
    # np.argmax returns the first maximum, which is the tie-break we want.
    winner = np.argmax(scores, axis=0)
    stack = np.stack(cands.candidates)
    rows, cols = np.indices(winner.shape)
    pseudo_gt = stack[winner, rows, cols]
    best = np.take_along_axis(scores, winner[None], axis=0)[0]
    return FusionResult(pseudo_gt, winner, best, scores)


def weighted_fuse(cands, cfg, scores=None):
    """Baseline: per-pixel weighted sum with normalized composite weights.

    Pixels where every candidate scores zero fall back to uniform weights.
    ``winner_index`` holds the argmax for inspection only.
    """
    cands = _as_candidates(cands)
    if scores is None:
        scores = score_stack(cands, cfg)
    total = scores.sum(axis=0)
    n = scores.shape[0]
    weights = np.where(total > 0, scores / np.where(total > 0, total, 1.0), 1.0 / n)
    stack = np.stack(cands.candidates)
    blended = np.clip(np.einsum("nhw,nhwc->hwc", weights, stack), 0.0, 1.0)
    winner = np.argmax(scores, axis=0)
    best = np.take_along_axis(scores, winner[None], axis=0)[0]
    return FusionResult(blended, winner, best, scores)
