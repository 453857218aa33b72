"""Late fusion of per-modality class posteriors."""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InputError


@dataclass
class ModalityPosterior:
    modality: str
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        total = self.probs.sum()
        if np.any(self.probs < 0) or abs(total - 1.0) > 1e-9:
            raise InputError(f"{self.modality}: posterior is not a probability vector (sum={total!r})")


def _vectors(posteriors):
    vecs = [np.asarray(p.probs if isinstance(p, ModalityPosterior) else p, dtype=np.float64).reshape(-1)
            for p in posteriors]
    if not vecs:
        raise InputError("late fusion needs at least one modality")
    n = vecs[0].size
    for i, v in enumerate(vecs):
        if v.size != n:
            raise InputError(f"class count mismatch: modality 0 has {n} classes, modality {i} has {v.size}")
    return vecs


def fused_scores(posteriors):
    """Per-class sum of the modality posteriors.

    Uses a correctly rounded sum so the result does not depend on modality order.
    """
    vecs = _vectors(posteriors)
    return np.array([math.fsum(col) for col in zip(*vecs)])


def late_fuse(posteriors):
    """Class with the largest summed posterior; exact ties go to the lowest class index.

    Accepts :class:`ModalityPosterior` objects or plain probability vectors.
    """
    vecs = _vectors(posteriors)
    scores = np.array([math.fsum(col) for col in zip(*vecs)])
    # rounding is monotone, so the exact winner is among the rounded maxima;
    # settle those exactly so near-ties are not decided by rounding
    candidates = np.flatnonzero(scores == scores.max())
    if candidates.size == 1:
        return int(candidates[0])
    exact = [sum((Fraction(float(v[j])) for v in vecs), Fraction(0)) for j in candidates]
    best = max(exact)
    return int(candidates[exact.index(best)])


def late_fuse_batch(prob_stack):
    """Fuse many samples. prob_stack: (modalities, samples, classes) -> (samples,) class ids."""
    prob_stack = np.asarray(prob_stack, dtype=np.float64)
    if prob_stack.ndim != 3 or prob_stack.shape[0] == 0:
        raise InputError(f"expected (modalities, samples, classes), got {prob_stack.shape}")
    return np.array([late_fuse(prob_stack[:, s, :]) for s in range(prob_stack.shape[1])], dtype=np.int64)
