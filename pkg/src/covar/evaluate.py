"""Pair accuracy, rotation-invariance statistics and angle recovery scores."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import mlp
from .siamese import THRESHOLD, pair_scores
from .synthdata import TWO_PI, rotate_image


@dataclass
class InvarianceSummary:
    median_same: float
    median_diff: float
    separation_auc: float
    trials: int


@dataclass
class EvalReport:
    accuracy: float
    n_test_pos: int
    n_test_neg: int
    mean_pos_score: float
    mean_neg_score: float
    invariance_summary: InvarianceSummary | None = None
    recovery: dict | None = None

    def to_dict(self):
        return asdict(self)


def accuracy_from_scores(pos_scores, neg_scores):
    """Positives are right below the threshold, negatives at or above it."""
    pos_scores, neg_scores = np.asarray(pos_scores), np.asarray(neg_scores)
    if len(pos_scores) == 0 or len(neg_scores) == 0:
        raise ValueError("accuracy needs non-empty positive and negative sets")
    correct = int(np.sum(pos_scores < THRESHOLD)) + int(np.sum(neg_scores >= THRESHOLD))
    return EvalReport(
        accuracy=correct / (len(pos_scores) + len(neg_scores)),
        n_test_pos=len(pos_scores),
        n_test_neg=len(neg_scores),
        mean_pos_score=float(np.mean(pos_scores)),
        mean_neg_score=float(np.mean(neg_scores)),
    )


def pair_accuracy(jn, test_pos, test_neg):
    if test_pos.n == 0 or test_neg.n == 0:
        raise ValueError("empty test set")
    return accuracy_from_scores(pair_scores(jn, test_pos.s1, test_pos.s2),
                                pair_scores(jn, test_neg.s1, test_neg.s2))


def separation_auc(d_same, d_diff):
    """P(d_same < d_diff) over all cross pairs, ties counted as 1/2."""
    d_same, d_diff = np.asarray(d_same, float), np.sort(np.asarray(d_diff, float))
    above = len(d_diff) - np.searchsorted(d_diff, d_same, side="right")
    ties = np.searchsorted(d_diff, d_same, side="right") - np.searchsorted(d_diff, d_same, side="left")
    return float((above.sum() + 0.5 * ties.sum()) / (len(d_same) * len(d_diff)))


def _as_encoder(f1):
    if isinstance(f1, mlp.SubNetwork):
        return lambda x: mlp.forward(f1, x).result
    return f1


def invariance_histograms(f1, corpus, trials, stream, chunk=1000):
    """Distances between codes of same-image and different-image rotations.

    Per trial, ``a`` and ``a'`` rotate one random image by two random angles
    and ``b`` rotates a different image.  Returns the raw distances and an
    :class:`InvarianceSummary`.
    """
    corpus = np.asarray(corpus, dtype=np.float64)
    m = len(corpus)
    if m < 2:
        raise ValueError(f"corpus needs at least 2 images, got {m}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    encode = _as_encoder(f1)
    d_same, d_diff = np.empty(trials), np.empty(trials)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        a, a2, b = [], [], []
        for t in range(lo, hi):
            rs = stream.split(t)
            i = int(rs.integers(m))
            j = (i + 1 + int(rs.integers(m - 1))) % m
            g = TWO_PI * rs.uniform(3)
            a.append(rotate_image(corpus[i], g[0]).ravel())
            a2.append(rotate_image(corpus[i], g[1]).ravel())
            b.append(rotate_image(corpus[j], g[2]).ravel())
        fa, fa2, fb = encode(np.array(a)), encode(np.array(a2)), encode(np.array(b))
        d_same[lo:hi] = np.linalg.norm(fa - fa2, axis=1)
        d_diff[lo:hi] = np.linalg.norm(fa - fb, axis=1)
    summary = InvarianceSummary(float(np.median(d_same)), float(np.median(d_diff)),
                                separation_auc(d_same, d_diff), trials)
    return d_same, d_diff, summary


def circular_correlation(recovered, true):
    """Best agreement ``mean cos(recovered - (s * true + phi))`` in [0, 1].

    Maximised over a reflection ``s`` in {+1, -1} and any global offset
    ``phi``, so the score ignores where the recovered circle starts and which
    way it runs.  For fixed ``s`` the best offset gives the mean resultant
    length ``|mean exp(i * (recovered - s * true))|``.
    """
    recovered, true = np.asarray(recovered, float), np.asarray(true, float)
    if recovered.shape != true.shape or recovered.ndim != 1:
        raise ValueError("angle vectors must be 1-D and of equal length")
    if len(true) < 3:
        raise ValueError("need at least 3 angles")
    for a in (recovered, true):
        if np.abs(np.mean(np.exp(1j * a))) > 1.0 - 1e-12:
            raise ValueError("degenerate input: angles have zero circular variance")
    return float(max(np.abs(np.mean(np.exp(1j * (recovered - s * true)))) for s in (1.0, -1.0)))


def recovered_angle(coordinates):
    """``atan2(coord2, coord1)`` for each embedded point."""
    c = np.asarray(coordinates)
    return np.arctan2(c[:, 1], c[:, 0])
