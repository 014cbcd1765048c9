"""Marginal completion probability and its calibration.

``P(C) = sum_i P(C | T=i) P(T=i)``: the completion probability for each
candidate as the target, weighted by the probability that the candidate is
the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .target import predicted_target

CALIBRATION_MODES = ("frame_general", "frame_predicted", "play_general", "play_predicted")
DEFAULT_BINS = 50


class CandidateMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FrameCompletion:
    game_id: int
    play_id: int
    frame_index: int
    t: int
    candidate_ids: tuple
    p_target: tuple
    p_complete_given_target: tuple
    p_complete: float
    predicted_target: int
    p_complete_given_predicted: float


def total_completion(posterior, conditionals) -> float | np.ndarray:
    """Law of total probability over candidate targets.

    Accepts two mappings keyed by candidate (keys must agree) or two
    equal-shape arrays; 2-D arrays are reduced along the last axis, with NaN
    padding ignored.
    """
    if isinstance(posterior, Mapping) or isinstance(conditionals, Mapping):
        if not (isinstance(posterior, Mapping) and isinstance(conditionals, Mapping)):
            raise CandidateMismatchError("both arguments must be keyed by candidate")
        if set(posterior) != set(conditionals):
            raise CandidateMismatchError(
                f"candidates differ: {sorted(set(posterior) ^ set(conditionals))}"
            )
        return float(sum(posterior[k] * conditionals[k] for k in posterior))
    p = np.asarray(posterior, dtype=np.float64)
    c = np.asarray(conditionals, dtype=np.float64)
    if p.shape != c.shape:
        raise CandidateMismatchError(f"shape mismatch {p.shape} vs {c.shape}")
    out = np.nansum(p * c, axis=-1)
    return float(out) if out.ndim == 0 else out


def frame_completions(panel, probs: np.ndarray, conditionals: np.ndarray,
                      pred_cols: np.ndarray | None = None) -> pd.DataFrame:
    """Per-frame completion table from target probabilities and conditionals.

    ``probs`` and ``conditionals`` are ``(n_frames, n_candidates)`` aligned with
    ``panel``.
    """
    if pred_cols is None:
        pred_cols = predicted_target(probs, panel.d4, panel.candidate_ids)
    rows = np.arange(len(panel))
    # padding contributes zero; a missing conditional for a real candidate stays NaN
    p = np.where(panel.mask, probs, 0.0)
    c = np.where(panel.mask, conditionals, 0.0)
    truth = panel.truth_col()
    return pd.DataFrame({
        "game_id": panel.game_id,
        "play_id": panel.play_id,
        "frame_index": panel.frame_index,
        "t": panel.t,
        "p_complete": np.sum(p * c, axis=1),
        "predicted_target": panel.candidate_ids[rows, pred_cols],
        "p_target_predicted": probs[rows, pred_cols],
        "p_complete_given_predicted": conditionals[rows, pred_cols],
        "true_target": panel.target_id,
        "predicted_is_true": (pred_cols == truth).astype(int),
    })


def candidate_table(panel, probs: np.ndarray, conditionals: np.ndarray) -> pd.DataFrame:
    r, k = np.nonzero(panel.mask)
    return pd.DataFrame({
        "game_id": panel.game_id[r],
        "play_id": panel.play_id[r],
        "frame_index": panel.frame_index[r],
        "t": panel.t[r],
        "candidate_id": panel.candidate_ids[r, k],
        "p_target": probs[r, k],
        "p_complete_given_target": conditionals[r, k],
    })


def play_series(frames: pd.DataFrame, game_id: int, play_id: int) -> pd.DataFrame:
    """Ordered per-frame completion series for one play."""
    sel = frames[(frames["game_id"] == game_id) & (frames["play_id"] == play_id)]
    return sel.sort_values("frame_index", kind="mergesort").reset_index(drop=True)


# --------------------------------------------------------------------------
# Agreement statistics


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    return float(np.sum(xc * yc) / denom) if denom > 0 else float("nan")


def lin_concordance(x, y) -> float:
    """Lin's concordance correlation (population moments)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mx, my = x.mean(), y.mean()
    cov = np.mean((x - mx) * (y - my))
    denom = x.var() + y.var() + (mx - my) ** 2
    return float(2.0 * cov / denom) if denom > 0 else float("nan")


@dataclass
class CalibrationReport:
    mode: str
    bins: pd.DataFrame
    pearson: float
    concordance: float
    dropped_bins: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"mode": self.mode, "pearson": self.pearson, "concordance": self.concordance,
                "points": int(len(self.bins)), "dropped_bins": list(self.dropped_bins)}


def calibration_inputs(frames: pd.DataFrame, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and 0/1 outcomes for a calibration mode.

    ``frames`` needs ``p_complete``, ``p_complete_given_predicted``,
    ``completed`` and the play keys. Per-play modes average over frames.
    """
    if mode not in CALIBRATION_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    col = "p_complete" if mode.endswith("general") else "p_complete_given_predicted"
    if mode.startswith("frame"):
        return frames[col].to_numpy(float), frames["completed"].to_numpy(float)
    g = frames.groupby(["game_id", "play_id"], sort=True).agg(p=(col, "mean"), o=("completed", "first"))
    return g["p"].to_numpy(float), g["o"].to_numpy(float)


def calibration(prob, outcome, mode: str = "frame_general", bins: int = DEFAULT_BINS) -> CalibrationReport:
    """Reliability points on ``bins`` equal-width bins of [0, 1].

    Each point is (mean predicted probability, observed completion fraction,
    count). Empty bins are dropped and listed. Pearson and Lin's coefficients
    are computed over the points, unweighted.
    """
    prob = np.asarray(prob, dtype=np.float64)
    outcome = np.asarray(outcome, dtype=np.float64)
    edges = np.linspace(0.0, 1.0, bins + 1)
    which = np.clip(np.searchsorted(edges, prob, side="right") - 1, 0, bins - 1)
    count = np.bincount(which, minlength=bins)
    psum = np.bincount(which, weights=prob, minlength=bins)
    osum = np.bincount(which, weights=outcome, minlength=bins)
    keep = count > 0
    table = pd.DataFrame({
        "bin": np.arange(bins)[keep],
        "lower": edges[:-1][keep],
        "upper": edges[1:][keep],
        "probability": psum[keep] / count[keep],
        "observed": osum[keep] / count[keep],
        "count": count[keep],
    })
    r = pearson(table["probability"], table["observed"]) if len(table) > 1 else float("nan")
    cc = lin_concordance(table["probability"], table["observed"]) if len(table) > 1 else float("nan")
    return CalibrationReport(mode, table, r, cc, np.flatnonzero(~keep).tolist())


def calibration_reports(frames: pd.DataFrame, bins: int = DEFAULT_BINS) -> dict:
    return {m: calibration(*calibration_inputs(frames, m), mode=m, bins=bins)
            for m in CALIBRATION_MODES}


def threshold_accuracy(prob, outcome, threshold: float = 0.5) -> float:
    """Share of rows where ``prob >= threshold`` agrees with the outcome."""
    prob = np.asarray(prob, dtype=np.float64)
    outcome = np.asarray(outcome).astype(bool)
    return float(np.mean((prob >= threshold) == outcome))
