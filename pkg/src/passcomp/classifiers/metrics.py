"""ROC curves and trapezoidal AUC for binary scores."""

from __future__ import annotations

import numpy as np


class UndefinedAUCError(ValueError):
    pass


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative")
    return scores, labels, n_pos, n_neg


def _threshold_counts(scores, labels):
    """Positive and negative counts per distinct score, highest score first."""
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    lab = labels[order]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    pos = np.add.reduceat(lab.astype(np.int64), starts)
    size = np.diff(np.r_[starts, s.size])
    return s[starts], pos, size - pos


def roc_curve(scores, labels):
    """``(fpr, tpr, thresholds)`` over all distinct thresholds.

    Points run from (0, 0) to (1, 1); ``thresholds[0]`` is ``inf``.
    """
    scores, labels, n_pos, n_neg = _check(scores, labels)
    thr, pos, neg = _threshold_counts(scores, labels)
    tpr = np.r_[0, np.cumsum(pos)] / n_pos
    fpr = np.r_[0, np.cumsum(neg)] / n_neg
    return fpr, tpr, np.r_[np.inf, thr]


def auc_trapezoid(scores, labels) -> float:
    """Area under the ROC curve by the trapezoidal rule.

    Accumulated in integer counts, so the result equals the pairwise
    concordance with ties counted one half, to the last bit.
    """
    scores, labels, n_pos, n_neg = _check(scores, labels)
    _, pos, neg = _threshold_counts(scores, labels)
    pos_before = np.r_[0, np.cumsum(pos)[:-1]]
    twice_area = int(np.sum(neg * (2 * pos_before + pos)))
    return twice_area / (2 * n_pos * n_neg)
