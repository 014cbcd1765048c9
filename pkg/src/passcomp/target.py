"""Empirical probabilities of each candidate being the pass target.

Per frame, every candidate receiver gets four distances to the ball:

* ``d1``: distance to the ball's line of flight (previous to current position),
* ``d3``: change in player-ball distance since the previous frame,
* ``d2``: ``d3`` shifted so the frame minimum is at least one,
* ``d4``: player-ball distance.

Inverse-distance probabilities from ``d1`` and ``d2`` are mixed with a
per-frame weight. Weights are rank statistics of one distance of the
frame's "best" candidate across the training corpus; the final scheme blends
two of them with a logistic curve over the frame number within the play.

Panels are stored as padded ``(n_frames, max_candidates)`` arrays; padding
cells have ``mask == False`` and NaN distances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from . import SCHEMA_VERSION
from .geometry import euclidean
from .ingest import Play, SchemaError

D1_FLOOR = 0.01
PROXIMITY_YARDS = 2.0
W23_MIDPOINT = 13.34183
W23_SCALE = 2.57
MAX_FRAMES = 46

# weight name -> (selector distance s, picked distance k)
SCHEDULE_SPECS = {
    "W1": (1, 3),
    "W2": (1, 2),
    "W3": (1, 4),
    "W4": (2, 4),
}
SCHEMES = ("EW", "W1", "W2", "W3", "W4", "final")


class TargetEngineError(ValueError):
    pass


# --------------------------------------------------------------------------
# Distance panel


@dataclass
class DistancePanel:
    game_id: np.ndarray
    play_id: np.ndarray
    frame_index: np.ndarray
    t: np.ndarray
    play_length: np.ndarray
    candidate_ids: np.ndarray
    mask: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray
    target_id: np.ndarray
    dropped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame_index)

    def distance(self, k: int) -> np.ndarray:
        return {1: self.d1, 2: self.d2, 3: self.d3, 4: self.d4}[k]

    def take(self, rows) -> "DistancePanel":
        rows = np.asarray(rows)
        return DistancePanel(
            **{name: getattr(self, name)[rows] for name in _ARRAY_FIELDS},
            dropped=list(self.dropped),
        )

    def truth_col(self) -> np.ndarray:
        """Column of the true target per frame (-1 when absent)."""
        hit = (self.candidate_ids == self.target_id[:, None]) & self.mask
        col = np.argmax(hit, axis=1)
        return np.where(hit.any(axis=1), col, -1)


_ARRAY_FIELDS = ("game_id", "play_id", "frame_index", "t", "play_length", "candidate_ids",
                 "mask", "d1", "d2", "d3", "d4", "target_id")


def standardize_deltas(d3) -> np.ndarray:
    """Shift a frame's distance changes so that every value is at least one.

    When the smallest change is non-positive the column is moved so its
    minimum lands on exactly one; otherwise the absolute minimum is added
    (so the minimum becomes ``2 * min + 1``).
    """
    d3 = np.asarray(d3, dtype=np.float64)
    m = np.nanmin(d3, axis=-1, keepdims=True)
    return np.where(m > 0, (d3 + np.abs(m)) + 1.0, (d3 - m) + 1.0)


def previous_distinct_row(ball_xy: np.ndarray, row: int) -> int | None:
    """Most recent earlier row whose ball position differs from ``row``'s."""
    cur = ball_xy[row]
    for r in range(row - 1, -1, -1):
        if ball_xy[r, 0] != cur[0] or ball_xy[r, 1] != cur[1]:
            return r
    return None


def line_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx, dy = b[0] - a[0], b[1] - a[1]
    norm = math.hypot(dx, dy)
    return np.abs(dx * (a[1] - points[:, 1]) - (a[0] - points[:, 0]) * dy) / norm


def frame_distances(play: Play, frame_index: int, cols=None):
    """``(d1, d3, d4)`` for the candidates of ``play`` at one frame.

    Only the given frame and earlier frames are read. Returns ``None`` when the
    ball has no earlier distinct position.
    """
    tr = play.tracking
    if cols is None:
        cols = [tr.col(c) for c in play.record.candidates]
    r = tr.row(frame_index)
    if r == 0:
        return None
    ball = tr.xy[:, tr.ball_col]
    prev = previous_distinct_row(ball, r)
    if prev is None:
        return None
    now = tr.xy[r, cols]
    before = tr.xy[r - 1, cols]
    d4 = euclidean(now, ball[r])
    d3 = d4 - euclidean(before, ball[r - 1])
    d1 = np.maximum(line_distance(now, ball[prev], ball[r]), D1_FLOOR)
    return d1, d3, d4


def build_distance_panel(play: Play) -> DistancePanel:
    """Distances for every window frame of one play."""
    rec = play.record
    tr = play.tracking
    cols = [tr.col(c) for c in rec.candidates]
    window = play.window_frames()
    n = len(cols)
    rows, dropped = [], []
    for t, fi in enumerate(window, start=1):
        out = frame_distances(play, int(fi), cols)
        if out is None:
            dropped.append((rec.game_id, rec.play_id, int(fi), "no_prior_ball_motion"))
            continue
        rows.append((int(fi), t) + out)
    m = len(rows)
    ids = np.tile(np.asarray(rec.candidates, dtype=np.int64), (m, 1)).reshape(m, n)
    d1 = np.array([r[2] for r in rows]).reshape(m, n)
    d3 = np.array([r[3] for r in rows]).reshape(m, n)
    d4 = np.array([r[4] for r in rows]).reshape(m, n)
    return DistancePanel(
        game_id=np.full(m, rec.game_id, dtype=np.int64),
        play_id=np.full(m, rec.play_id, dtype=np.int64),
        frame_index=np.array([r[0] for r in rows], dtype=np.int64),
        t=np.array([r[1] for r in rows], dtype=np.int64),
        play_length=np.full(m, len(window), dtype=np.int64),
        candidate_ids=ids,
        mask=np.ones((m, n), dtype=bool),
        d1=d1,
        d2=standardize_deltas(d3) if m else d3.copy(),
        d3=d3,
        d4=d4,
        target_id=np.full(m, -1 if rec.target_id is None else rec.target_id, dtype=np.int64),
        dropped=dropped,
    )


def concat_panels(panels: Sequence[DistancePanel]) -> DistancePanel:
    """Stack per-play panels, padding candidate columns to the widest play."""
    panels = [p for p in panels if len(p)]
    if not panels:
        raise TargetEngineError("no frames to stack")
    width = max(p.candidate_ids.shape[1] for p in panels)

    def pad(a, fill):
        extra = width - a.shape[1]
        if extra == 0:
            return a
        return np.concatenate([a, np.full((a.shape[0], extra), fill, dtype=a.dtype)], axis=1)

    out = {}
    for name in _ARRAY_FIELDS:
        parts = [getattr(p, name) for p in panels]
        if parts[0].ndim == 2:
            fill = {"candidate_ids": -1, "mask": False}.get(name, np.nan)
            parts = [pad(a, fill) for a in parts]
        out[name] = np.concatenate(parts)
    dropped = [d for p in panels for d in p.dropped]
    return DistancePanel(**out, dropped=dropped)


def build_corpus_panel(plays: Iterable[Play]) -> DistancePanel:
    return concat_panels([build_distance_panel(p) for p in plays])


# --------------------------------------------------------------------------
# Probabilities


def empirical_prob(d) -> np.ndarray:
    """Inverse-distance probabilities over a frame's candidates.

    ``d`` may be 1-D (one frame) or 2-D with frames in rows; NaN cells are
    padding and get probability zero.
    """
    d = np.asarray(d, dtype=np.float64)
    valid = ~np.isnan(d)
    if np.any(d[valid] <= 0):
        raise TargetEngineError("distances must be positive")
    # scale by the row minimum first so inverses stay near one
    m = np.nanmin(np.where(valid, d, np.nan), axis=-1, keepdims=True)
    inv = np.where(valid, m / np.where(valid, d, 1.0), 0.0)
    return inv / inv.sum(axis=-1, keepdims=True)


def blend(p1, p2, w) -> np.ndarray:
    """``w * p1 + (1 - w) * p2``; ``w`` is a scalar or one value per row."""
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise TargetEngineError(f"shape mismatch {p1.shape} vs {p2.shape}")
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1 and p1.ndim == 2:
        w = w[:, None]
    return w * p1 + (1.0 - w) * p2


def w23(t, midpoint: float = W23_MIDPOINT, scale: float = W23_SCALE):
    """Logistic weight on the late-play schedule as a function of frame number."""
    return 1.0 / (1.0 + np.exp((midpoint - np.asarray(t, dtype=np.float64)) / scale))


# --------------------------------------------------------------------------
# Weight schedules


def picked_values(panel: DistancePanel, selector: int, value: int) -> np.ndarray:
    """Per frame, distance ``value`` of the candidate that minimizes ``selector``.

    Ties on the selector go to the first candidate column.
    """
    sel = np.where(panel.mask, panel.distance(selector), np.inf)
    idx = np.argmin(sel, axis=1)
    return panel.distance(value)[np.arange(len(idx)), idx]


@dataclass
class WeightSchedule:
    """Rank-based mixing weight fitted on a corpus of frames.

    ``levels`` holds the sorted unique picked values of the training corpus.
    A value maps to ``(number of levels strictly below it) / (u - 1)``, which
    is its exact rank fraction on training values.
    """

    selector: int
    value: int
    levels: np.ndarray

    @classmethod
    def fit(cls, picked) -> "WeightSchedule":
        picked = np.asarray(picked, dtype=np.float64)
        picked = picked[~np.isnan(picked)]
        return cls(0, 0, np.unique(picked))

    def weights(self, picked) -> np.ndarray:
        u = len(self.levels)
        picked = np.asarray(picked, dtype=np.float64)
        if u <= 1:
            return np.full(picked.shape, 0.5)
        below = np.searchsorted(self.levels, picked, side="left")
        return np.clip(below / (u - 1), 0.0, 1.0)

    def to_json(self) -> dict:
        return {"selector": self.selector, "value": self.value, "levels": self.levels.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "WeightSchedule":
        return cls(int(d["selector"]), int(d["value"]), np.asarray(d["levels"], dtype=np.float64))


def compute_weight_schedule(panel: DistancePanel, selector: int, value: int):
    """Fit a schedule on ``panel`` and return ``(schedule, per-frame weights)``."""
    picked = picked_values(panel, selector, value)
    sched = WeightSchedule.fit(picked)
    sched.selector, sched.value = selector, value
    return sched, sched.weights(picked)


def rank_weights(values) -> np.ndarray:
    """Rank fractions of ``values`` among their own unique values."""
    return WeightSchedule.fit(values).weights(values)


@dataclass
class TargetModel:
    """Fitted schedules plus the logistic blend parameters."""

    schedules: dict
    midpoint: float = W23_MIDPOINT
    scale: float = W23_SCALE

    @classmethod
    def fit(cls, panel: DistancePanel, midpoint: float = W23_MIDPOINT,
            scale: float = W23_SCALE) -> "TargetModel":
        schedules = {}
        for name, (s, k) in SCHEDULE_SPECS.items():
            schedules[name], _ = compute_weight_schedule(panel, s, k)
        return cls(schedules, midpoint, scale)

    def frame_weights(self, panel: DistancePanel) -> dict:
        return {
            name: sch.weights(picked_values(panel, sch.selector, sch.value))
            for name, sch in self.schedules.items()
        }

    def posterior(self, panel: DistancePanel, scheme: str = "final",
                  adjust: bool = True) -> np.ndarray:
        probs = scheme_posterior(panel, self, scheme)
        return proximity_adjust(probs, panel.d1, panel.d4) if adjust else probs

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "target_model",
            "schedules": {k: v.to_json() for k, v in sorted(self.schedules.items())},
            "logistic": {"asymptote": 1.0, "midpoint": self.midpoint, "scale": self.scale},
        }

    @classmethod
    def from_json(cls, d: dict) -> "TargetModel":
        if d.get("kind") != "target_model":
            raise SchemaError(f"expected a target_model artifact, found {d.get('kind')!r}")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"target_model schema version mismatch: artifact has {d.get('schema_version')!r}, "
                f"this build expects {SCHEMA_VERSION!r}"
            )
        return cls(
            {k: WeightSchedule.from_json(v) for k, v in d["schedules"].items()},
            float(d["logistic"]["midpoint"]),
            float(d["logistic"]["scale"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TargetModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def scheme_posterior(panel: DistancePanel, model: TargetModel, scheme: str,
                     weights: dict | None = None, scale: float | None = None) -> np.ndarray:
    """Unadjusted target probabilities under one weighting scheme."""
    p1 = empirical_prob(np.where(panel.mask, panel.d1, np.nan))
    p2 = empirical_prob(np.where(panel.mask, panel.d2, np.nan))
    if scheme == "EW":
        return blend(p1, p2, 0.5)
    weights = weights if weights is not None else model.frame_weights(panel)
    if scheme == "W4":
        return blend(p1, p2, 1.0 - weights["W4"])
    if scheme in ("W1", "W2", "W3"):
        return blend(p1, p2, weights[scheme])
    if scheme == "final":
        return target_posterior(p1, p2, weights["W2"], weights["W3"],
                                w23(panel.t, model.midpoint, model.scale if scale is None else scale))
    raise TargetEngineError(f"unknown scheme {scheme!r}")


def target_posterior(p1, p2, w2, w3, w_t) -> np.ndarray:
    """Logistic blend of the ``W3``- and ``W2``-weighted mixtures."""
    w_t = np.asarray(w_t, dtype=np.float64)
    if w_t.ndim == 1 and np.ndim(p1) == 2:
        w_t = w_t[:, None]
    return w_t * blend(p1, p2, w3) + (1.0 - w_t) * blend(p1, p2, w2)


def proximity_adjust(probs, d1, d4, radius: float = PROXIMITY_YARDS) -> np.ndarray:
    """Move probability onto a candidate that is practically at the ball.

    A candidate qualifies when both its line distance and ball distance are
    below ``radius``. If any candidate in a frame qualifies, the mass of all
    non-qualifying candidates goes to the qualifier with the highest
    probability; other qualifiers keep their own mass.
    """
    probs = np.array(probs, dtype=np.float64)
    squeeze = probs.ndim == 1
    probs = np.atleast_2d(probs)
    d1 = np.atleast_2d(np.asarray(d1, dtype=np.float64))
    d4 = np.atleast_2d(np.asarray(d4, dtype=np.float64))
    with np.errstate(invalid="ignore"):
        near = (d1 < radius) & (d4 < radius)
    rows = np.flatnonzero(near.any(axis=1))
    if rows.size:
        p = probs[rows]
        q = near[rows]
        best = np.argmax(np.where(q, p, -np.inf), axis=1)
        moved = np.where(q, 0.0, p).sum(axis=1)
        p = np.where(q, p, 0.0)
        r = np.arange(len(rows))
        # clip the rounding excess so a full transfer is exactly one
        p[r, best] = np.minimum(p[r, best] + moved, 1.0)
        probs[rows] = p
    return probs[0] if squeeze else probs


def predicted_target(probs, d4, candidate_ids) -> np.ndarray:
    """Column index of the most probable candidate per frame.

    Ties go to the smaller ball distance, then the smaller entity id.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    d4 = np.atleast_2d(d4)
    ids = np.atleast_2d(candidate_ids)
    valid = ~np.isnan(probs)
    p = np.where(valid, probs, -np.inf)
    top = p == p.max(axis=1, keepdims=True)
    dd = np.where(top, d4, np.inf)
    top &= dd == dd.min(axis=1, keepdims=True)
    big = np.iinfo(np.int64).max
    return np.argmin(np.where(top, ids, big), axis=1)


# --------------------------------------------------------------------------
# Evaluation


def _accuracy(hit: np.ndarray) -> float:
    return float(hit.mean()) if hit.size else float("nan")


def evaluate_target_accuracy(panel: DistancePanel, posteriors: dict,
                             max_frames: int = MAX_FRAMES) -> dict:
    """Accuracy of the most probable candidate against the true target.

    Args:
        panel: distances with ``target_id`` filled in.
        posteriors: ``{(scheme, adjusted): probs}``.

    Returns:
        ``{"overall": DataFrame, "by_frame": DataFrame}``. ``by_frame`` holds
        accuracy restricted to the first ``n`` and last ``n`` frames of each
        play, for ``n = 1..max_frames``.
    """
    truth = panel.truth_col()
    known = truth >= 0
    overall, curves = [], []
    from_end = panel.play_length - panel.t
    for (scheme, adjusted), probs in posteriors.items():
        pred = predicted_target(probs, panel.d4, panel.candidate_ids)
        hit = (pred == truth)[known]
        overall.append({"scheme": scheme, "adjusted": adjusted, "accuracy": _accuracy(hit),
                        "frames": int(known.sum())})
        t_k, e_k = panel.t[known], from_end[known]
        for n in range(1, max_frames + 1):
            curves.append({
                "scheme": scheme, "adjusted": adjusted, "n": n,
                "first_n": _accuracy(hit[t_k <= n]),
                "last_n": _accuracy(hit[e_k < n]),
            })
    return {"overall": pd.DataFrame(overall), "by_frame": pd.DataFrame(curves)}


def accuracy_table(panel: DistancePanel, model: TargetModel) -> dict:
    """Accuracy of every scheme before and after the proximity adjustment."""
    weights = model.frame_weights(panel)
    posteriors = {}
    for scheme in SCHEMES:
        raw = scheme_posterior(panel, model, scheme, weights)
        posteriors[(scheme, False)] = raw
        posteriors[(scheme, True)] = proximity_adjust(raw, panel.d1, panel.d4)
    return evaluate_target_accuracy(panel, posteriors)


def fit_w23_scale(panel: DistancePanel, model: TargetModel,
                  grid=None) -> tuple[float, pd.DataFrame]:
    """Grid-search the logistic scale maximizing adjusted target accuracy.

    Returns the best scale (first on ties) and the full accuracy curve.
    """
    if grid is None:
        grid = np.round(np.arange(0.5, 5.0 + 1e-9, 0.01), 2)
    weights = model.frame_weights(panel)
    truth = panel.truth_col()
    known = truth >= 0
    p1 = empirical_prob(np.where(panel.mask, panel.d1, np.nan))
    p2 = empirical_prob(np.where(panel.mask, panel.d2, np.nan))
    f3 = blend(p1, p2, weights["W3"])
    f2 = blend(p1, p2, weights["W2"])
    acc = []
    for s in grid:
        wt = w23(panel.t, model.midpoint, s)[:, None]
        probs = proximity_adjust(wt * f3 + (1 - wt) * f2, panel.d1, panel.d4)
        pred = predicted_target(probs, panel.d4, panel.candidate_ids)
        acc.append(_accuracy((pred == truth)[known]))
    acc = np.asarray(acc)
    best = float(grid[int(np.nanargmax(acc))])
    return best, pd.DataFrame({"scale": grid, "accuracy": acc})


def posterior_frame(panel: DistancePanel, probs: np.ndarray) -> pd.DataFrame:
    """Long-format posterior table, one row per (frame, candidate)."""
    pred = predicted_target(probs, panel.d4, panel.candidate_ids)
    m, k = probs.shape
    rows, cols = np.nonzero(panel.mask)
    return pd.DataFrame({
        "game_id": panel.game_id[rows],
        "play_id": panel.play_id[rows],
        "frame_index": panel.frame_index[rows],
        "t": panel.t[rows],
        "candidate_id": panel.candidate_ids[rows, cols],
        "p_target": probs[rows, cols],
        "predicted_flag": (pred[rows] == cols).astype(int),
    })
