"""Predictor rows for the completion model.

One row per (frame, candidate) with 32 predictors: play context, position
groups of the candidate and two assigned defenders, and frame geometry.
Training uses the true-target rows only; inference scores every candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import SCHEMA_VERSION
from .geometry import euclidean
from .ingest import (
    DOWNS, DROPBACKS, FIELD_WIDTH, FORMATIONS, PASS_FORWARD_EVENTS, QUARTERS, Play, SchemaError,
)
from .target import DistancePanel, build_distance_panel, line_distance, previous_distinct_row

TARGET_POSITIONS = ("WR", "TE", "RB", "QB", "OTHER")
DEFENDER_POSITIONS = ("CB", "S", "LB", "DL", "OTHER")

CATEGORIES = {
    "quarter": QUARTERS,
    "down": DOWNS,
    "offense_formation": FORMATIONS,
    "dropback_type": DROPBACKS,
    "target_position": TARGET_POSITIONS,
    "closest_def_position": DEFENDER_POSITIONS,
    "second_def_position": DEFENDER_POSITIONS,
}

FEATURE_COLUMNS = (
    # play context
    "quarter",
    "down",
    "yards_to_go",
    "offense_formation",
    "defenders_in_box",
    "pass_rushers",
    "dropback_type",
    "clock_seconds",
    "yardline",
    "offense_score",
    "defense_score",
    "offense_is_home",
    "passer_to_target_release",
    # position groups
    "target_position",
    "closest_def_position",
    "second_def_position",
    # frame geometry: to the ball
    "target_line_ball",
    "target_dist_ball",
    "target_delta_ball",
    "closest_def_line_ball",
    "closest_def_dist_ball",
    "closest_def_delta_ball",
    "second_def_line_ball",
    "second_def_dist_ball",
    "second_def_delta_ball",
    # frame geometry: defenders to the candidate
    "closest_def_line_target",
    "closest_def_dist_target",
    "closest_def_delta_target",
    "second_def_line_target",
    "second_def_dist_target",
    "second_def_delta_target",
    "target_sideline",
)
KEY_COLUMNS = ("game_id", "play_id", "frame_index", "t", "candidate_id", "is_target")
LABEL_COLUMN = "completed"

assert len(FEATURE_COLUMNS) == 32


class IncompleteRowError(ValueError):
    def __init__(self, missing: str):
        super().__init__(f"incomplete feature row: {missing}")
        self.missing = missing


def sideline_distance(y) -> float:
    return np.minimum(y, FIELD_WIDTH - np.asarray(y, dtype=float))


def _target_group(group: str) -> str:
    return group if group in TARGET_POSITIONS else "OTHER"


def _defender_group(group: str) -> str:
    return group if group in DEFENDER_POSITIONS else "OTHER"


def assign_defenders(line_dist, eucl, def_ids) -> tuple[int, int]:
    """Pick the closest and second-closest defenders for one candidate.

    Closest minimizes distance to the candidate's line of motion; second
    minimizes Euclidean distance, falling to the runner-up when both picks
    are the same defender. Ties go to the smaller entity id.

    Returns positions into ``def_ids``.
    """
    if len(def_ids) < 2:
        raise IncompleteRowError("fewer than two defenders")
    ids = np.asarray(def_ids)
    closest = int(np.lexsort((ids, line_dist))[0])
    by_eucl = np.lexsort((ids, eucl))
    second = int(by_eucl[0])
    if second == closest:
        second = int(by_eucl[1])
    return closest, second


@dataclass
class _FrameGeometry:
    ball: np.ndarray
    ball_prev: np.ndarray
    ball_anchor: np.ndarray


def _ball_geometry(play: Play, r: int) -> _FrameGeometry:
    tr = play.tracking
    ball = tr.xy[:, tr.ball_col]
    prev = previous_distinct_row(ball, r)
    if prev is None:
        raise IncompleteRowError("ball line")
    return _FrameGeometry(ball[r], ball[r - 1], ball[prev])


def _motion_anchor(xy_col: np.ndarray, r: int) -> np.ndarray | None:
    prev = previous_distinct_row(xy_col, r)
    return None if prev is None else xy_col[prev]


def play_feature_rows(play: Play, panel: DistancePanel | None = None,
                      candidates=None) -> list[dict]:
    """Feature rows for every scored frame and candidate of ``play``.

    ``panel`` supplies the candidate-to-ball distances; frames missing from it
    are skipped. ``candidates`` restricts the candidates (default: all).
    """
    rec = play.record
    tr = play.tracking
    if panel is None:
        panel = build_distance_panel(play)
    def_cols = list(tr.side_cols("defense"))
    if len(def_cols) < 2:
        raise IncompleteRowError("fewer than two defenders")
    def_ids = tr.entity_ids[def_cols]
    def_groups = [_defender_group(tr.position_groups[c]) for c in def_cols]

    pf = tr.event_frame(PASS_FORWARD_EVENTS)
    if pf is None or rec.passer_id is None:
        raise IncompleteRowError("passer position at release")
    r_pf = tr.row(pf)
    passer_at_release = tr.xy[r_pf, tr.col(rec.passer_id)]

    context = play_context(play)
    wanted = set(rec.candidates if candidates is None else candidates)
    rows = []
    for j in range(len(panel)):
        fi = int(panel.frame_index[j])
        r = tr.row(fi)
        geo = _ball_geometry(play, r)
        d_now = tr.xy[r, def_cols]
        d_prev = tr.xy[r - 1, def_cols]
        def_line_ball = line_distance(d_now, geo.ball_anchor, geo.ball)
        def_dist_ball = euclidean(d_now, geo.ball)
        def_delta_ball = def_dist_ball - euclidean(d_prev, geo.ball_prev)
        for k, cid in enumerate(panel.candidate_ids[j]):
            if not panel.mask[j, k] or int(cid) not in wanted:
                continue
            c = tr.col(int(cid))
            c_now = tr.xy[r, c]
            c_prev = tr.xy[r - 1, c]
            anchor = _motion_anchor(tr.xy[:, c], r)
            eucl = euclidean(d_now, c_now)
            eucl_prev = euclidean(d_prev, c_prev)
            if anchor is None:
                line_t = eucl
            else:
                line_t = line_distance(d_now, anchor, c_now)
            a, b = assign_defenders(line_t, eucl, def_ids)
            row = {
                "game_id": rec.game_id,
                "play_id": rec.play_id,
                "frame_index": fi,
                "t": int(panel.t[j]),
                "candidate_id": int(cid),
                "is_target": int(int(cid) == rec.target_id),
            }
            row.update(context)
            row.update({
                "passer_to_target_release": float(euclidean(passer_at_release, tr.xy[r_pf, c])),
                "target_position": _target_group(tr.position_groups[c]),
                "closest_def_position": def_groups[a],
                "second_def_position": def_groups[b],
                "target_line_ball": float(panel.d1[j, k]),
                "target_dist_ball": float(panel.d4[j, k]),
                "target_delta_ball": float(panel.d3[j, k]),
                "closest_def_line_ball": float(def_line_ball[a]),
                "closest_def_dist_ball": float(def_dist_ball[a]),
                "closest_def_delta_ball": float(def_delta_ball[a]),
                "second_def_line_ball": float(def_line_ball[b]),
                "second_def_dist_ball": float(def_dist_ball[b]),
                "second_def_delta_ball": float(def_delta_ball[b]),
                "closest_def_line_target": float(line_t[a]),
                "closest_def_dist_target": float(eucl[a]),
                "closest_def_delta_target": float(eucl[a] - eucl_prev[a]),
                "second_def_line_target": float(line_t[b]),
                "second_def_dist_target": float(eucl[b]),
                "second_def_delta_target": float(eucl[b] - eucl_prev[b]),
                "target_sideline": float(sideline_distance(c_now[1])),
                LABEL_COLUMN: int(rec.completed),
            })
            rows.append(row)
    return rows


def play_context(play: Play) -> dict:
    rec = play.record
    return {
        "quarter": rec.quarter,
        "down": rec.down,
        "yards_to_go": rec.yards_to_go,
        "offense_formation": rec.offense_formation,
        "defenders_in_box": rec.defenders_in_box,
        "pass_rushers": rec.pass_rushers,
        "dropback_type": rec.dropback_type if rec.dropback_type in DROPBACKS else "UNKNOWN",
        "clock_seconds": rec.clock_seconds,
        "yardline": rec.yardline_1_99,
        "offense_score": rec.offense_score,
        "defense_score": rec.defense_score,
        "offense_is_home": int(rec.offense_is_home),
    }


def build_features(play: Play, frame_index: int, candidate: int,
                   panel: DistancePanel | None = None) -> dict:
    """The feature row of a single (frame, candidate) pair."""
    rows = [r for r in play_feature_rows(play, panel, candidates=[candidate])
            if r["frame_index"] == frame_index]
    if not rows:
        raise IncompleteRowError(f"frame {frame_index} not scored")
    row = rows[0]
    for name in FEATURE_COLUMNS:
        v = row.get(name)
        if v is None or (isinstance(v, float) and math.isnan(v)):
            raise IncompleteRowError(name)
    return row


def feature_table(plays, panels=None, targets_only: bool = False) -> pd.DataFrame:
    """Feature rows for a collection of plays as a DataFrame.

    Plays whose rows cannot be completed are skipped.
    """
    out = []
    for i, play in enumerate(plays):
        panel = panels[i] if panels is not None else build_distance_panel(play)
        if not len(panel):
            continue
        cands = [play.record.target_id] if targets_only else None
        try:
            out.extend(play_feature_rows(play, panel, cands))
        except IncompleteRowError:
            continue
    columns = list(KEY_COLUMNS) + list(FEATURE_COLUMNS) + [LABEL_COLUMN]
    return _with_dtypes(pd.DataFrame(out, columns=columns))


def _with_dtypes(df: pd.DataFrame) -> pd.DataFrame:
    """Integer keys and label, float predictors, categorical factors."""
    for name in KEY_COLUMNS + (LABEL_COLUMN,):
        df[name] = df[name].astype(np.int64)
    for name in FEATURE_COLUMNS:
        if name in CATEGORIES:
            values = df[name]
            if name in ("quarter", "down") and len(values):
                values = values.astype(np.int64)
            df[name] = pd.Categorical(values, categories=list(CATEGORIES[name]))
        else:
            df[name] = df[name].astype(np.float64)
    return df


def write_feature_csv(df: pd.DataFrame, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        df.to_csv(fh, index=False, float_format="%.17g")


def read_feature_csv(path) -> pd.DataFrame:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    found = first.partition("schema_version=")[2] if first.startswith("#") else None
    if found != SCHEMA_VERSION:
        raise SchemaError(
            f"feature table schema version mismatch: artifact has {found!r}, "
            f"this build expects {SCHEMA_VERSION!r}"
        )
    return _with_dtypes(pd.read_csv(path, skiprows=1, float_precision="round_trip"))
