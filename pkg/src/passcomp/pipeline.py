"""Glue between the target engine, the feature builder and the classifiers.

The prediction path for a play is: distances, per-distance target
probabilities, blended posterior, proximity adjustment, feature rows for
every candidate, conditional completion probabilities from a model trained
on true-target rows, and finally the total completion probability.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .classifiers import make_fold_plan, train_random_forest
from .completion import candidate_table, frame_completions
from .features import FEATURE_COLUMNS, feature_table
from .target import (
    W23_SCALE,
    DistancePanel,
    TargetModel,
    build_distance_panel,
    concat_panels,
    fit_w23_scale,
)

log = logging.getLogger(__name__)

FRAME_KEY = ["game_id", "play_id", "frame_index"]
CANDIDATE_KEY = FRAME_KEY + ["candidate_id"]


def play_panels(plays) -> list[DistancePanel]:
    return [build_distance_panel(p) for p in plays]


def mean_window_length(panel: DistancePanel) -> float:
    """Mean number of scored frames per play."""
    keys = pd.DataFrame({"g": panel.game_id, "p": panel.play_id})
    return float(keys.groupby(["g", "p"]).size().mean())


def fit_target_model(panel: DistancePanel, refit_w23: bool = False,
                     midpoint: float | None = None, scale: float | None = None):
    """Fit weight schedules; optionally refit the logistic blend.

    With ``refit_w23`` the midpoint becomes the corpus mean window length and
    the scale is grid-searched for adjusted accuracy.

    Returns:
        ``(model, scale_curve)``; ``scale_curve`` is ``None`` unless refit.
    """
    model = TargetModel.fit(panel)
    if midpoint is not None:
        model.midpoint = float(midpoint)
    model.scale = float(scale) if scale is not None else W23_SCALE
    curve = None
    if refit_w23:
        model.midpoint = mean_window_length(panel)
        model.scale, curve = fit_w23_scale(panel, model)
    return model, curve


def target_training_rows(features: pd.DataFrame) -> pd.DataFrame:
    return features[features["is_target"] == 1].reset_index(drop=True)


def conditional_matrix(panel: DistancePanel, features: pd.DataFrame,
                       prob: np.ndarray) -> np.ndarray:
    """Place per-row probabilities into the panel's (frame, candidate) grid.

    Cells without a feature row stay NaN.
    """
    r, k = np.nonzero(panel.mask)
    cells = pd.DataFrame({
        "game_id": panel.game_id[r], "play_id": panel.play_id[r],
        "frame_index": panel.frame_index[r], "candidate_id": panel.candidate_ids[r, k],
        "_r": r, "_k": k,
    })
    vals = features[CANDIDATE_KEY].copy()
    vals["_p"] = np.asarray(prob, dtype=np.float64)
    merged = cells.merge(vals, on=CANDIDATE_KEY, how="left", sort=False)
    out = np.full(panel.mask.shape, np.nan)
    out[merged["_r"].to_numpy(), merged["_k"].to_numpy()] = merged["_p"].to_numpy()
    return out


def attach_outcomes(frames: pd.DataFrame, plays) -> pd.DataFrame:
    outcomes = pd.DataFrame(
        [(p.record.game_id, p.record.play_id, int(p.record.completed)) for p in plays],
        columns=["game_id", "play_id", "completed"],
    )
    return frames.merge(outcomes, on=["game_id", "play_id"], how="left", sort=False)


@dataclass
class ScoredPlays:
    panel: DistancePanel
    probs: np.ndarray
    conditionals: np.ndarray
    frames: pd.DataFrame
    candidates: pd.DataFrame


def _finish(plays, panel, probs, conditionals) -> ScoredPlays:
    frames = frame_completions(panel, probs, conditionals)
    frames = attach_outcomes(frames, plays)
    missing = frames["p_complete"].isna()
    if missing.any():
        log.warning("%d frames lack a complete feature row and are left unscored", int(missing.sum()))
    return ScoredPlays(panel, probs, conditionals, frames,
                       candidate_table(panel, probs, conditionals))


def score_plays(plays, target_model: TargetModel, forest, panels=None) -> ScoredPlays:
    """Run the full prediction path on ``plays``."""
    plays = list(plays)
    panels = panels if panels is not None else play_panels(plays)
    panel = concat_panels(panels)
    probs = target_model.posterior(panel, "final", adjust=True)
    feats = feature_table(plays, panels)
    cond = forest.predict_proba(feats[list(FEATURE_COLUMNS)]) if len(feats) else np.empty(0)
    return _finish(plays, panel, probs, conditional_matrix(panel, feats, cond))


def cross_validated_completions(plays, panel: DistancePanel, probs: np.ndarray,
                                features: pd.DataFrame, fold_count: int = 10, seed: int = 0,
                                mtry: int = 15, n_trees: int = 500,
                                n_jobs: int = 1) -> ScoredPlays:
    """Completion probabilities where each play is scored by a forest that
    never saw it (folds are groups of plays)."""
    plays = list(plays)
    keys = list(zip(features["game_id"].astype(int), features["play_id"].astype(int)))
    plan = make_fold_plan(keys, fold_count, seed)
    fold = plan.assign(keys)
    is_target = features["is_target"].to_numpy() == 1
    X = features[list(FEATURE_COLUMNS)]
    y = features["completed"].to_numpy()
    pred = np.full(len(features), np.nan)
    for f in range(fold_count):
        train = (fold != f) & is_target
        test = fold == f
        if not test.any():
            continue
        model = train_random_forest(X[train].reset_index(drop=True), y[train], mtry=mtry,
                                    n_trees=n_trees, seed=seed + f, n_jobs=n_jobs, oob=False)
        pred[test] = model.predict_proba(X[test].reset_index(drop=True))
    return _finish(plays, panel, probs, conditional_matrix(panel, features, pred))
