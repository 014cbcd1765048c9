"""Ingestion of Big Data Bowl 2021 style tables into a canonical play store.

Expected inputs (comma separated, UTF-8, with headers)::

    games.csv     gameId, homeTeamAbbr, visitorTeamAbbr, week
    players.csv   nflId, position, displayName
    plays.csv     gameId, playId, playDescription, quarter, down, yardsToGo,
                  possessionTeam, yardlineSide, yardlineNumber, offenseFormation,
                  defendersInTheBox, numberOfPassRushers, typeDropback,
                  preSnapVisitorScore, preSnapHomeScore, gameClock,
                  penaltyCodes, passResult
    week*.csv     x, y, event, nflId, displayName, jerseyNumber, position,
                  frameId, team, gameId, playId, playDirection

Tracking is oriented so the offense always moves toward increasing ``x``.
Plays are processed one at a time; every exclusion is recorded in an
:class:`IngestReport` under a reason code.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from . import SCHEMA_VERSION
from .geometry import euclidean

log = logging.getLogger(__name__)

FIELD_LENGTH = 120.0
FIELD_WIDTH = 53.3
BALL_ID = 0

OUTCOMES = ("C", "I", "IN")
QUARTERS = (1, 2, 3, 4, 5)
DOWNS = (1, 2, 3, 4)
FORMATIONS = ("SHOTGUN", "SINGLEBACK", "EMPTY", "I_FORM", "PISTOL", "JUMBO", "WILDCAT")
DROPBACKS = (
    "TRADITIONAL",
    "SCRAMBLE",
    "SCRAMBLE_ROLLOUT_RIGHT",
    "SCRAMBLE_ROLLOUT_LEFT",
    "DESIGNED_ROLLOUT_RIGHT",
    "DESIGNED_ROLLOUT_LEFT",
    "UNKNOWN",
)
POSITION_GROUPS = ("QB", "RB", "WR", "TE", "CB", "S", "LB", "DL")
_POSITION_MAP = {
    "QB": "QB",
    "RB": "RB", "HB": "RB", "FB": "RB",
    "WR": "WR",
    "TE": "TE",
    "CB": "CB", "DB": "CB",
    "S": "S", "SS": "S", "FS": "S",
    "LB": "LB", "ILB": "LB", "MLB": "LB", "OLB": "LB",
    "DL": "DL", "DE": "DL", "DT": "DL", "NT": "DL",
}

PASS_FORWARD_EVENTS = frozenset({"pass_forward", "pass_shovel"})
OUTCOME_EVENTS = frozenset({
    "pass_outcome_caught",
    "pass_outcome_incomplete",
    "pass_outcome_interception",
    "pass_outcome_touchdown",
})

GAME_COLUMNS = ("gameId", "homeTeamAbbr", "visitorTeamAbbr")
PLAYER_COLUMNS = ("nflId", "position", "displayName")
PLAY_COLUMNS = (
    "gameId", "playId", "playDescription", "quarter", "down", "yardsToGo",
    "possessionTeam", "yardlineSide", "yardlineNumber", "offenseFormation",
    "defendersInTheBox", "numberOfPassRushers", "typeDropback",
    "preSnapVisitorScore", "preSnapHomeScore", "gameClock", "penaltyCodes",
    "passResult",
)
TRACKING_COLUMNS = (
    "x", "y", "event", "nflId", "displayName", "jerseyNumber", "position",
    "frameId", "team", "gameId", "playId", "playDirection",
)


class SchemaError(ValueError):
    """A required column is missing or an artifact has the wrong version."""


class ExcludedPlay(Exception):
    """Raised by per-play stages; ``reason`` is the report code."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass
class IngestReport:
    plays_seen: int = 0
    plays_retained: int = 0
    unparseable_rows: int = 0
    reasons: Counter = field(default_factory=Counter)
    excluded: list = field(default_factory=list)
    window_lengths: list = field(default_factory=list)

    def exclude(self, game_id, play_id, reason: str) -> None:
        self.reasons[reason] += 1
        self.excluded.append((game_id, play_id, reason))

    def to_dict(self) -> dict:
        lengths = np.asarray(self.window_lengths, dtype=float)
        summary = {}
        if lengths.size:
            summary = {
                "min": int(lengths.min()),
                "max": int(lengths.max()),
                "mean": float(lengths.mean()),
                "p75": float(np.percentile(lengths, 75)),
                "p95": float(np.percentile(lengths, 95)),
            }
        return {
            "schema_version": SCHEMA_VERSION,
            "plays_seen": self.plays_seen,
            "plays_retained": self.plays_retained,
            "unparseable_rows": self.unparseable_rows,
            "reasons": dict(sorted(self.reasons.items())),
            "window_lengths": summary,
            "excluded": [list(e) for e in self.excluded],
        }


@dataclass(frozen=True)
class EntityPosition:
    entity_id: int
    display_name: str
    jersey_number: int | None
    position_group: str
    team_side: str
    x: float
    y: float


@dataclass(frozen=True)
class TrackingFrame:
    game_id: int
    play_id: int
    frame_index: int
    entities: tuple[EntityPosition, ...]
    event_tag: str | None
    play_direction: str


@dataclass
class PlayTracking:
    """Columnar tracking for one play, already oriented left-to-right.

    ``xy`` has shape ``(n_frames, n_entities, 2)``; missing positions are NaN.
    """

    game_id: int
    play_id: int
    play_direction: str
    entity_ids: np.ndarray
    display_names: list[str]
    jersey_numbers: list[int | None]
    position_groups: list[str]
    team_sides: list[str]
    frame_index: np.ndarray
    events: list[str | None]
    xy: np.ndarray

    @property
    def ball_col(self) -> int:
        hits = np.flatnonzero(self.entity_ids == BALL_ID)
        if hits.size != 1:
            raise ExcludedPlay("no_ball_tracking")
        return int(hits[0])

    def col(self, entity_id: int) -> int:
        hits = np.flatnonzero(self.entity_ids == entity_id)
        if hits.size == 0:
            raise KeyError(entity_id)
        return int(hits[0])

    def row(self, frame_index: int) -> int:
        hits = np.flatnonzero(self.frame_index == frame_index)
        if hits.size == 0:
            raise KeyError(frame_index)
        return int(hits[0])

    def side_cols(self, side: str) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.team_sides) if s == side], dtype=int)

    def frame(self, frame_index: int) -> TrackingFrame:
        r = self.row(frame_index)
        ents = tuple(
            EntityPosition(
                int(self.entity_ids[c]), self.display_names[c], self.jersey_numbers[c],
                self.position_groups[c], self.team_sides[c],
                float(self.xy[r, c, 0]), float(self.xy[r, c, 1]),
            )
            for c in range(len(self.entity_ids))
        )
        return TrackingFrame(self.game_id, self.play_id, int(frame_index), ents,
                             self.events[r], self.play_direction)

    def event_frame(self, events: Iterable[str], after: int | None = None) -> int | None:
        events = set(events)
        for fi, ev in zip(self.frame_index, self.events):
            if ev in events and (after is None or fi > after):
                return int(fi)
        return None

    def to_json(self) -> dict:
        return {
            "play_direction": self.play_direction,
            "entity_ids": self.entity_ids.tolist(),
            "display_names": self.display_names,
            "jersey_numbers": self.jersey_numbers,
            "position_groups": self.position_groups,
            "team_sides": self.team_sides,
            "frame_index": self.frame_index.tolist(),
            "events": self.events,
            "x": [[_nan_to_none(v) for v in row] for row in self.xy[:, :, 0].tolist()],
            "y": [[_nan_to_none(v) for v in row] for row in self.xy[:, :, 1].tolist()],
        }

    @classmethod
    def from_json(cls, game_id: int, play_id: int, d: dict) -> "PlayTracking":
        x = np.array(d["x"], dtype=np.float64)
        y = np.array(d["y"], dtype=np.float64)
        return cls(
            game_id=game_id,
            play_id=play_id,
            play_direction=d["play_direction"],
            entity_ids=np.asarray(d["entity_ids"], dtype=np.int64),
            display_names=list(d["display_names"]),
            jersey_numbers=list(d["jersey_numbers"]),
            position_groups=list(d["position_groups"]),
            team_sides=list(d["team_sides"]),
            frame_index=np.asarray(d["frame_index"], dtype=np.int64),
            events=list(d["events"]),
            xy=np.stack([x, y], axis=-1),
        )


def _nan_to_none(v):
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else v


@dataclass(frozen=True)
class PlayRecord:
    game_id: int
    play_id: int
    description: str
    quarter: int
    down: int
    yards_to_go: float
    offense_formation: str | None
    defenders_in_box: float | None
    pass_rushers: float | None
    dropback_type: str
    clock_seconds: float
    yardline_1_99: float
    offense_score: float
    defense_score: float
    offense_is_home: bool
    outcome: str
    penalty_codes: str | None = None
    passer_id: int | None = None
    target_id: int | None = None
    candidates: tuple[int, ...] = ()
    pass_window: tuple[int, int] | None = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.game_id, self.play_id)

    @property
    def completed(self) -> bool:
        return self.outcome == "C"


@dataclass
class Play:
    record: PlayRecord
    tracking: PlayTracking

    @property
    def key(self) -> tuple[int, int]:
        return self.record.key

    def window_frames(self) -> np.ndarray:
        first, last = self.record.pass_window
        fi = self.tracking.frame_index
        return fi[(fi >= first) & (fi <= last)]


# --------------------------------------------------------------------------
# Coordinate handling


def flip_coordinates(x, y):
    """Rotate the field by 180 degrees (used for plays moving left)."""
    return FIELD_LENGTH - np.asarray(x, dtype=float), FIELD_WIDTH - np.asarray(y, dtype=float)


def normalize_coordinates(x, y, play_direction: str):
    if play_direction == "left":
        return flip_coordinates(x, y)
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def position_group(position) -> str:
    if not isinstance(position, str):
        return "OTHER"
    return _POSITION_MAP.get(position.strip().upper(), "OTHER")


def parse_clock(clock) -> float:
    """``"MM:SS"`` or ``"MM:SS:00"`` to seconds remaining in the quarter."""
    if not isinstance(clock, str):
        return float("nan")
    parts = clock.strip().split(":")
    try:
        return 60.0 * int(parts[0]) + float(parts[1])
    except (IndexError, ValueError):
        return float("nan")


def _require(df: pd.DataFrame, columns: Iterable[str], table: str) -> None:
    for c in columns:
        if c not in df.columns:
            raise SchemaError(f"{table}: missing required column {c!r}")


def _num(v, default=float("nan")) -> float:
    try:
        f = float(v)
    except (TypeError, ValueError):
        return default
    return default if math.isnan(f) else f


def _str_or_none(v) -> str | None:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    s = str(v).strip()
    return s or None


# --------------------------------------------------------------------------
# Table reading


def build_play_record(row, game_row) -> PlayRecord:
    home = game_row["homeTeamAbbr"]
    offense_is_home = row["possessionTeam"] == home
    home_score = _num(row["preSnapHomeScore"], 0.0)
    away_score = _num(row["preSnapVisitorScore"], 0.0)
    yl = _num(row["yardlineNumber"])
    side = _str_or_none(row["yardlineSide"])
    if side is None or yl == 50:
        yardline = yl
    elif side == row["possessionTeam"]:
        yardline = yl
    else:
        yardline = 100.0 - yl
    outcome = _str_or_none(row["passResult"]) or ""
    return PlayRecord(
        game_id=int(row["gameId"]),
        play_id=int(row["playId"]),
        description=_str_or_none(row["playDescription"]) or "",
        quarter=int(_num(row["quarter"], 0)),
        down=int(_num(row["down"], 0)),
        yards_to_go=_num(row["yardsToGo"]),
        offense_formation=_str_or_none(row["offenseFormation"]),
        defenders_in_box=_num(row["defendersInTheBox"], None),
        pass_rushers=_num(row["numberOfPassRushers"], None),
        dropback_type=_str_or_none(row["typeDropback"]) or "UNKNOWN",
        clock_seconds=parse_clock(row["gameClock"]),
        yardline_1_99=yardline,
        offense_score=home_score if offense_is_home else away_score,
        defense_score=away_score if offense_is_home else home_score,
        offense_is_home=bool(offense_is_home),
        outcome=outcome,
        penalty_codes=_str_or_none(row["penaltyCodes"]),
    )


def tracking_from_rows(rows: pd.DataFrame, offense_is_home: bool, positions: dict) -> PlayTracking:
    """Pivot one play's long-format tracking rows into a :class:`PlayTracking`."""
    rows = rows.sort_values(["frameId"], kind="stable")
    direction = str(rows["playDirection"].iloc[0])
    frames = np.unique(rows["frameId"].to_numpy(dtype=np.int64))
    events = []
    ev_by_frame = rows.groupby("frameId", sort=True)["event"].first()
    for f in frames:
        ev = ev_by_frame.get(f)
        ev = _str_or_none(ev)
        events.append(None if ev in (None, "None") else ev)

    is_ball = rows["team"].astype(str).str.lower().eq("football") | rows["nflId"].isna()
    rows = rows.assign(_eid=np.where(is_ball, BALL_ID, rows["nflId"].fillna(BALL_ID)).astype(np.int64))
    ids = list(dict.fromkeys(rows["_eid"].tolist()))
    ids.sort(key=lambda e: (e != BALL_ID, e))
    col_of = {e: i for i, e in enumerate(ids)}
    row_of = {int(f): i for i, f in enumerate(frames)}

    xy = np.full((len(frames), len(ids), 2), np.nan)
    x, y = normalize_coordinates(rows["x"].to_numpy(float), rows["y"].to_numpy(float), direction)
    ri = np.array([row_of[int(f)] for f in rows["frameId"]], dtype=int)
    ci = np.array([col_of[e] for e in rows["_eid"]], dtype=int)
    xy[ri, ci, 0] = x
    xy[ri, ci, 1] = y

    first = rows.drop_duplicates("_eid").set_index("_eid")
    names, jerseys, groups, sides = [], [], [], []
    offense_team = "home" if offense_is_home else "away"
    for e in ids:
        r = first.loc[e]
        if e == BALL_ID:
            names.append("football")
            jerseys.append(None)
            groups.append("BALL")
            sides.append("ball")
            continue
        names.append(str(r["displayName"]))
        j = _num(r["jerseyNumber"], None)
        jerseys.append(None if j is None else int(j))
        pos = r["position"] if isinstance(r["position"], str) else positions.get(e)
        groups.append(position_group(pos))
        sides.append("offense" if str(r["team"]).lower() == offense_team else "defense")

    return PlayTracking(
        game_id=int(rows["gameId"].iloc[0]),
        play_id=int(rows["playId"].iloc[0]),
        play_direction=direction,
        entity_ids=np.asarray(ids, dtype=np.int64),
        display_names=names,
        jersey_numbers=jerseys,
        position_groups=groups,
        team_sides=sides,
        frame_index=frames,
        events=events,
        xy=xy,
    )


def iter_tracking_groups(table, report: IngestReport, chunksize: int = 200_000) -> Iterator[pd.DataFrame]:
    """Yield one DataFrame per (gameId, playId), reading ``table`` in chunks.

    Rows of a play are assumed contiguous; a key that reappears after being
    emitted is reported as ``tracking_non_contiguous`` and dropped.
    """
    if isinstance(table, pd.DataFrame):
        chunks: Iterable[pd.DataFrame] = [table]
    else:
        head = pd.read_csv(table, nrows=0)
        _require(head, TRACKING_COLUMNS, str(table))
        chunks = pd.read_csv(table, chunksize=chunksize, low_memory=False, float_precision="round_trip")

    emitted: set = set()
    carry: pd.DataFrame | None = None
    for chunk in chunks:
        _require(chunk, TRACKING_COLUMNS, "tracking")
        chunk = _clean_tracking(chunk, report)
        if carry is not None:
            chunk = pd.concat([carry, chunk], ignore_index=True)
        if chunk.empty:
            carry = None
            continue
        keys = list(zip(chunk["gameId"], chunk["playId"]))
        last = keys[-1]
        mask_last = np.array([k == last for k in keys])
        done, carry = chunk[~mask_last], chunk[mask_last]
        yield from _emit_groups(done, emitted, report)
    if carry is not None and not carry.empty:
        yield from _emit_groups(carry, emitted, report)


def _emit_groups(df: pd.DataFrame, emitted: set, report: IngestReport):
    for key, g in df.groupby(["gameId", "playId"], sort=False):
        key = (int(key[0]), int(key[1]))
        if key in emitted:
            report.exclude(*key, "tracking_non_contiguous")
            continue
        emitted.add(key)
        yield g


def _clean_tracking(chunk: pd.DataFrame, report: IngestReport) -> pd.DataFrame:
    chunk = chunk.copy()
    for c in ("x", "y", "frameId", "gameId", "playId"):
        chunk[c] = pd.to_numeric(chunk[c], errors="coerce")
    bad = chunk[["x", "y", "frameId", "gameId", "playId"]].isna().any(axis=1)
    bad |= ~chunk["playDirection"].isin(["left", "right"])
    n_bad = int(bad.sum())
    if n_bad:
        report.unparseable_rows += n_bad
        chunk = chunk[~bad]
    chunk["gameId"] = chunk["gameId"].astype(np.int64)
    chunk["playId"] = chunk["playId"].astype(np.int64)
    return chunk


def load_and_normalize(tracking_tables, play_table, game_table, player_table,
                       report: IngestReport | None = None) -> Iterator[tuple[PlayRecord, PlayTracking]]:
    """Join the four tables and yield ``(record, tracking)`` per tracked play.

    ``tracking_tables`` is an iterable of DataFrames or CSV paths; the other
    arguments are DataFrames. Plays with no tracking or no ball rows are
    excluded with a reason.
    """
    report = report if report is not None else IngestReport()
    _require(game_table, GAME_COLUMNS, "games")
    _require(player_table, PLAYER_COLUMNS, "players")
    _require(play_table, PLAY_COLUMNS, "plays")

    games = game_table.set_index("gameId")
    positions = dict(zip(player_table["nflId"].astype(np.int64), player_table["position"]))
    play_rows = {}
    for _, r in play_table.iterrows():
        try:
            play_rows[(int(r["gameId"]), int(r["playId"]))] = r
        except (TypeError, ValueError):
            report.unparseable_rows += 1

    seen = set()
    for table in tracking_tables:
        for rows in iter_tracking_groups(table, report):
            key = (int(rows["gameId"].iloc[0]), int(rows["playId"].iloc[0]))
            if key not in play_rows:
                report.exclude(*key, "no_play_row")
                continue
            seen.add(key)
            report.plays_seen += 1
            prow = play_rows[key]
            if key[0] not in games.index:
                report.exclude(*key, "no_game_row")
                continue
            record = build_play_record(prow, games.loc[key[0]])
            tracking = tracking_from_rows(rows, record.offense_is_home, positions)
            if int((tracking.entity_ids == BALL_ID).sum()) != 1:
                report.exclude(*key, "no_ball_tracking")
                continue
            yield record, tracking

    for key in sorted(play_rows.keys() - seen):
        report.plays_seen += 1
        report.exclude(*key, "no_tracking")


# --------------------------------------------------------------------------
# Filtering


_SPIKE = re.compile(r"\bspiked\b", re.IGNORECASE)
_THROWAWAY = re.compile(r"\bthrew\b(?:\s+\w+){0,2}\s+away\b", re.IGNORECASE)


def exclusion_reason(record: PlayRecord, tracking: PlayTracking | None = None) -> str | None:
    """Reason code for dropping a play, or ``None`` when it is usable."""
    if record.outcome == "S":
        return "sack"
    if record.outcome not in OUTCOMES:
        return "invalid_outcome"
    if record.penalty_codes:
        return "penalty"
    if _SPIKE.search(record.description):
        return "spike"
    if _THROWAWAY.search(record.description):
        return "throwaway"
    if record.offense_formation not in FORMATIONS:
        return "missing_formation"
    if record.quarter not in QUARTERS or record.down not in DOWNS:
        return "missing_context"
    for v in (record.defenders_in_box, record.pass_rushers, record.yards_to_go,
              record.clock_seconds, record.yardline_1_99):
        if v is None or math.isnan(v):
            return "missing_context"
    if tracking is not None:
        if int((tracking.entity_ids == BALL_ID).sum()) != 1:
            return "no_ball_tracking"
        if np.isnan(tracking.xy[:, tracking.ball_col]).any():
            return "no_ball_tracking"
    return None


def filter_plays(plays: Iterable, report: IngestReport | None = None):
    """Keep plays with a usable pass attempt; drops are tagged in ``report``."""
    report = report if report is not None else IngestReport()
    kept = []
    for record, tracking in plays:
        reason = exclusion_reason(record, tracking)
        if reason is None:
            kept.append((record, tracking))
        else:
            report.exclude(record.game_id, record.play_id, reason)
    return kept


# --------------------------------------------------------------------------
# Passer, candidates and target


_NAME = r"([A-Z][A-Za-z']*\.\s?[A-Z][A-Za-z'\-\.]*(?:\s(?:Jr|Sr|II|III|IV|V)\.?)?)"
_PASSER_RE = re.compile(_NAME + r"\s+pass\b")
_TARGET_RE = re.compile(r"\bpass\b.*?\b(?:to|intended for)\s+" + _NAME)


def parse_passer_name(description: str) -> str | None:
    m = _PASSER_RE.search(description)
    return m.group(1) if m else None


def parse_target_name(description: str) -> str | None:
    """Abbreviated receiver name from a play description, if stated."""
    m = _TARGET_RE.search(description)
    if not m:
        return None
    return m.group(1).rstrip(".")


def _split_name(name: str) -> tuple[str, str]:
    name = re.sub(r"\s(?:Jr|Sr|II|III|IV|V)\.?$", "", name.strip())
    first, _, last = name.partition(".")
    return first.strip().lower(), last.strip().lower()


def name_matches(abbrev: str, display_name: str) -> bool:
    """Whether ``"J.Jones"`` style ``abbrev`` denotes ``display_name``."""
    a_first, a_last = _split_name(abbrev)
    full = re.sub(r"\s(?:Jr|Sr|II|III|IV|V)\.?$", "", display_name.strip())
    parts = full.split(" ", 1)
    if len(parts) < 2:
        return False
    d_first, d_last = parts[0].lower(), parts[1].lower()
    return bool(a_first) and d_first.startswith(a_first) and (
        d_last == a_last or d_last.replace(" ", "") == a_last.replace(" ", "")
    )


def _match_name(abbrev: str, tracking: PlayTracking, cols) -> int | None:
    hits = [c for c in cols if name_matches(abbrev, tracking.display_names[c])]
    if len(hits) == 1:
        return int(tracking.entity_ids[hits[0]])
    return None


def _nearest_to_ball(tracking: PlayTracking, cols, frame_index: int) -> int | None:
    if len(cols) == 0:
        return None
    r = tracking.row(frame_index)
    ball = tracking.xy[r, tracking.ball_col]
    d = euclidean(tracking.xy[r, cols], ball)
    d = np.where(np.isnan(d), np.inf, d)
    order = sorted(range(len(cols)), key=lambda k: (d[k], tracking.entity_ids[cols[k]]))
    if not np.isfinite(d[order[0]]):
        return None
    return int(tracking.entity_ids[cols[order[0]]])


def resolve_passer(record: PlayRecord, tracking: PlayTracking) -> int:
    offense = tracking.side_cols("offense")
    name = parse_passer_name(record.description)
    if name:
        pid = _match_name(name, tracking, offense)
        if pid is not None:
            return pid
    pf = tracking.event_frame(PASS_FORWARD_EVENTS)
    frame = pf if pf is not None else int(tracking.frame_index[0])
    qbs = [c for c in offense if tracking.position_groups[c] == "QB"]
    pid = _nearest_to_ball(tracking, qbs or list(offense), frame)
    if pid is None:
        raise ExcludedPlay("no_passer")
    return pid


def candidate_ids(tracking: PlayTracking, passer_id: int) -> tuple[int, ...]:
    """Offensive players other than the passer, in entity-id order."""
    return tuple(sorted(
        int(tracking.entity_ids[c]) for c in tracking.side_cols("offense")
        if int(tracking.entity_ids[c]) != passer_id
    ))


def resolve_target(record: PlayRecord, tracking: PlayTracking) -> int:
    """Intended receiver of the pass.

    The description is parsed first; when no receiver is named (or the name
    does not match a candidate) the candidate nearest to the ball at the
    outcome event frame is used.

    Raises:
        ExcludedPlay: ``no_candidates`` if there is nobody to throw to.
    """
    candidates = record.candidates
    if not candidates:
        raise ExcludedPlay("no_candidates")
    if len(candidates) == 1:
        return candidates[0]
    cols = [tracking.col(c) for c in candidates]
    name = parse_target_name(record.description)
    if name:
        tid = _match_name(name, tracking, cols)
        if tid is not None:
            return tid
    pf = tracking.event_frame(PASS_FORWARD_EVENTS)
    outcome = tracking.event_frame(OUTCOME_EVENTS, after=pf)
    frame = outcome if outcome is not None else int(tracking.frame_index[-1])
    tid = _nearest_to_ball(tracking, cols, frame)
    if tid is None:
        raise ExcludedPlay("unresolvable_target")
    return tid


# --------------------------------------------------------------------------
# Pass window


def window_pass_frames(record: PlayRecord, tracking: PlayTracking) -> np.ndarray:
    """Frame indices from the pass-forward event through the outcome event.

    Leading frames in which the ball has not yet moved forward (its ``x`` did
    not increase relative to the preceding tracked frame) are dropped.

    Raises:
        ExcludedPlay: ``no_pass_forward``, ``no_outcome_event`` or
            ``ball_never_forward``.
    """
    pf = tracking.event_frame(PASS_FORWARD_EVENTS)
    if pf is None:
        raise ExcludedPlay("no_pass_forward")
    out = tracking.event_frame(OUTCOME_EVENTS, after=pf)
    if out is None:
        raise ExcludedPlay("no_outcome_event")
    fi = tracking.frame_index
    ball_x = tracking.xy[:, tracking.ball_col, 0]
    rows = np.flatnonzero((fi >= pf) & (fi <= out))
    for k, r in enumerate(rows):
        if r == 0:
            continue
        if ball_x[r] > ball_x[r - 1]:
            return fi[rows[k:]]
    raise ExcludedPlay("ball_never_forward")


def _check_window_tracking(tracking: PlayTracking, window: np.ndarray, cols) -> None:
    r0 = tracking.row(int(window[0])) - 1
    r1 = tracking.row(int(window[-1]))
    block = tracking.xy[max(r0, 0): r1 + 1][:, cols]
    if np.isnan(block).any():
        raise ExcludedPlay("tracking_gap")


def prepare_play(record: PlayRecord, tracking: PlayTracking) -> Play:
    """Resolve passer, candidates, target and pass window for one play."""
    passer = resolve_passer(record, tracking)
    record = replace(record, passer_id=passer, candidates=candidate_ids(tracking, passer))
    target = resolve_target(record, tracking)
    window = window_pass_frames(record, tracking)
    cols = [tracking.ball_col, tracking.col(passer)] + [tracking.col(c) for c in record.candidates]
    cols += list(tracking.side_cols("defense"))
    _check_window_tracking(tracking, window, cols)
    record = replace(record, target_id=target, pass_window=(int(window[0]), int(window[-1])))
    return Play(record, tracking)


def ingest(tracking_tables, play_table, game_table, player_table,
           report: IngestReport | None = None) -> Iterator[Play]:
    """Full ingestion: load, filter, resolve targets and window each play."""
    report = report if report is not None else IngestReport()
    for record, tracking in load_and_normalize(tracking_tables, play_table, game_table,
                                               player_table, report):
        reason = exclusion_reason(record, tracking)
        if reason is not None:
            report.exclude(record.game_id, record.play_id, reason)
            continue
        try:
            play = prepare_play(record, tracking)
        except ExcludedPlay as exc:
            report.exclude(record.game_id, record.play_id, exc.reason)
            continue
        report.plays_retained += 1
        report.window_lengths.append(len(play.window_frames()))
        yield play


def read_input_dir(input_dir) -> tuple[list[Path], pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    input_dir = Path(input_dir)
    tables = {}
    for name in ("games", "players", "plays"):
        path = input_dir / f"{name}.csv"
        if not path.exists():
            raise FileNotFoundError(path)
        tables[name] = pd.read_csv(path, low_memory=False, float_precision="round_trip")
    weeks = sorted(input_dir.glob("week*.csv"), key=lambda p: (len(p.name), p.name))
    if not weeks:
        raise FileNotFoundError(input_dir / "week*.csv")
    return weeks, tables["plays"], tables["games"], tables["players"]


def ingest_directory(input_dir, report: IngestReport | None = None) -> Iterator[Play]:
    weeks, plays, games, players = read_input_dir(input_dir)
    return ingest(weeks, plays, games, players, report)


# --------------------------------------------------------------------------
# Play store


def record_to_json(record: PlayRecord) -> dict:
    d = asdict(record)
    d["candidates"] = list(record.candidates)
    d["pass_window"] = list(record.pass_window) if record.pass_window else None
    return {k: _nan_to_none(v) for k, v in d.items()}


def record_from_json(d: dict) -> PlayRecord:
    d = dict(d)
    d["candidates"] = tuple(d["candidates"])
    d["pass_window"] = tuple(d["pass_window"]) if d["pass_window"] else None
    for k in ("yards_to_go", "clock_seconds", "yardline_1_99"):
        if d[k] is None:
            d[k] = float("nan")
    return PlayRecord(**d)


def write_play_store(plays: Iterable[Play], path) -> int:
    """Write plays as newline-delimited JSON; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "play_store"}) + "\n")
        for play in plays:
            row = {"record": record_to_json(play.record), "tracking": play.tracking.to_json()}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
            n += 1
    return n


def iter_play_store(path) -> Iterator[Play]:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        check_schema(header, "play_store")
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            rec = record_from_json(row["record"])
            yield Play(rec, PlayTracking.from_json(rec.game_id, rec.play_id, row["tracking"]))


def read_play_store(path) -> list[Play]:
    return list(iter_play_store(path))


def check_schema(header: dict, kind: str) -> None:
    found = header.get("schema_version")
    if header.get("kind") != kind:
        raise SchemaError(f"expected a {kind} artifact, found {header.get('kind')!r}")
    if found != SCHEMA_VERSION:
        raise SchemaError(
            f"{kind} schema version mismatch: artifact has {found!r}, this build expects {SCHEMA_VERSION!r}"
        )
