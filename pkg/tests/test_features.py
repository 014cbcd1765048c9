import math

import numpy as np
import pandas as pd
import pytest

from passcomp.features import (
    CATEGORIES,
    FEATURE_COLUMNS,
    KEY_COLUMNS,
    LABEL_COLUMN,
    IncompleteRowError,
    assign_defenders,
    build_features,
    feature_table,
    read_feature_csv,
    sideline_distance,
    write_feature_csv,
)
from passcomp.ingest import Play, SchemaError

from test_ingest import make_record, make_tracking


def _release_play():
    """Passer at (30, 20), target at (42, 25) when the ball is released."""
    n = 4
    ball = [(30.0 + 3 * k, 20.0 + k) for k in range(n)]
    players = {
        7: ("Al Passer", "offense", "QB", [(30.0, 20.0)] * n),
        11: ("Ann Alpha", "offense", "WR", [(42.0 + k, 25.0) for k in range(n)]),
        12: ("Bo Beta", "offense", "RB", [(33.0, 10.0 + k) for k in range(n)]),
        90: ("Dee Fence", "defense", "CB", [(44.0, 24.0 + 0.5 * k) for k in range(n)]),
        91: ("Dan Fence", "defense", "S", [(48.0, 30.0)] * n),
        92: ("Don Fence", "defense", "MLB", [(36.0, 21.0)] * n),
    }
    events = ["pass_forward", None, None, "pass_outcome_caught"]
    tr = make_tracking(ball, players, events)
    rec = make_record(passer_id=7, target_id=11, candidates=(11, 12), pass_window=(1, n))
    return Play(rec, tr)


def test_assign_defenders_distinct_metrics():
    assert assign_defenders(np.array([1.0, 4.0]), np.array([5.0, 2.0]), [101, 102]) == (0, 1)


def test_assign_defenders_same_player_falls_back():
    line = np.array([0.5, 3.0, 2.0])
    eucl = np.array([1.0, 4.0, 2.5])
    assert assign_defenders(line, eucl, [101, 102, 103]) == (0, 2)


def test_assign_defenders_tie_goes_to_lower_id():
    line = np.array([0.1, 5.0, 5.0])
    eucl = np.array([1.0, 3.0, 3.0])
    assert assign_defenders(line, eucl, [50, 80, 60]) == (0, 2)


def test_assign_defenders_needs_two():
    with pytest.raises(IncompleteRowError):
        assign_defenders(np.array([1.0]), np.array([1.0]), [5])


def test_sideline_distance_examples():
    assert sideline_distance(53.3) == 0.0
    assert sideline_distance(26.65) == 26.65
    assert sideline_distance(0.0) == 0.0
    assert sideline_distance(10.0) == 10.0


def test_passer_to_target_at_release():
    row = build_features(_release_play(), 2, 11)
    assert row["passer_to_target_release"] == pytest.approx(13.0, abs=1e-12)


def test_feature_values_against_direct_geometry():
    play = _release_play()
    tr = play.tracking
    row = build_features(play, 3, 11)
    r = tr.row(3)
    target = tr.xy[r, tr.col(11)]
    # defender 90 is nearest the target's line of motion (y = 25) and by distance
    d90 = tr.xy[r, tr.col(90)]
    assert row["closest_def_line_target"] == pytest.approx(abs(d90[1] - 25.0), abs=1e-12)
    assert row["closest_def_dist_target"] == pytest.approx(math.dist(d90, target), abs=1e-12)
    assert row["closest_def_position"] == "CB"
    assert row["second_def_position"] == "S"
    assert row["target_position"] == "WR"
    assert row["target_sideline"] == pytest.approx(25.0)
    assert row["target_dist_ball"] == pytest.approx(math.dist(target, tr.xy[r, 0]), abs=1e-12)


def test_incomplete_row_names_missing_field():
    play = _release_play()
    rec = play.record.__class__(**{**play.record.__dict__, "passer_id": None})
    with pytest.raises(IncompleteRowError, match="passer"):
        build_features(Play(rec, play.tracking), 2, 11)


def test_thirty_two_predictors(synth_plays):
    df = feature_table(synth_plays[:5])
    assert len(FEATURE_COLUMNS) == 32
    assert list(df.columns) == list(KEY_COLUMNS) + list(FEATURE_COLUMNS) + [LABEL_COLUMN]
    assert not df[list(FEATURE_COLUMNS)].isna().any().any()


def test_one_row_per_frame_and_candidate(synth_plays, synth_panel):
    df = feature_table(synth_plays)
    assert len(df) == int(synth_panel.mask.sum())
    assert not df.duplicated(["game_id", "play_id", "frame_index", "candidate_id"]).any()
    per_frame = df.groupby(["game_id", "play_id", "frame_index"])["is_target"].sum()
    assert per_frame.eq(1).all()


def test_targets_only_rows(synth_plays):
    df = feature_table(synth_plays, targets_only=True)
    assert df["is_target"].eq(1).all()
    assert not df.duplicated(["game_id", "play_id", "frame_index"]).any()


def test_value_domains(synth_plays):
    df = feature_table(synth_plays)
    for name, levels in CATEGORIES.items():
        assert set(df[name].dropna().unique()) <= set(levels)
        assert not df[name].isna().any()
    dist_cols = [c for c in FEATURE_COLUMNS if ("_dist_" in c or "_line_" in c)]
    assert (df[dist_cols] >= 0).all().all()
    assert df["target_sideline"].between(0, 26.65).all()


def test_deterministic(synth_plays):
    a = feature_table(synth_plays[:8])
    b = feature_table(synth_plays[:8])
    pd.testing.assert_frame_equal(a, b)


def test_csv_round_trip(tmp_path, synth_plays):
    df = feature_table(synth_plays[:6])
    path = tmp_path / "features.csv"
    write_feature_csv(df, path)
    back = read_feature_csv(path)
    pd.testing.assert_frame_equal(df, back, check_exact=True)


def test_csv_schema_mismatch(tmp_path, synth_plays):
    df = feature_table(synth_plays[:2])
    path = tmp_path / "features.csv"
    write_feature_csv(df, path)
    text = path.read_text().replace("schema_version=1", "schema_version=7", 1)
    path.write_text(text)
    with pytest.raises(SchemaError, match="'7'"):
        read_feature_csv(path)
