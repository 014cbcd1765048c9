import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from passcomp import synthetic
from passcomp.ingest import Play
from passcomp.target import (
    D1_FLOOR,
    TargetEngineError,
    TargetModel,
    WeightSchedule,
    blend,
    build_corpus_panel,
    build_distance_panel,
    compute_weight_schedule,
    empirical_prob,
    evaluate_target_accuracy,
    fit_w23_scale,
    posterior_frame,
    predicted_target,
    proximity_adjust,
    rank_weights,
    standardize_deltas,
    target_posterior,
    w23,
)

from conftest import random_frames, run_ingest

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


def brute_inverse_prob(d):
    """Oracle: literal 1 / (d_i * sum_k 1/d_k)."""
    s = sum(1.0 / x for x in d)
    return [1.0 / (x * s) for x in d]


# --------------------------------------------------------------------------
# Distances


def test_standardized_deltas_nonpositive_minimum():
    np.testing.assert_array_equal(standardize_deltas([-2.0, 0.0, 3.0]), [1.0, 3.0, 6.0])


def test_standardized_deltas_positive_minimum():
    np.testing.assert_array_equal(standardize_deltas([1.0, 2.0]), [3.0, 4.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-20, 20, allow_nan=False), min_size=1, max_size=8))
def test_standardized_deltas_at_least_one(d3):
    d2 = standardize_deltas(d3)
    assert d2.min() >= 1.0 - 1e-12
    if min(d3) <= 0:
        assert d2.min() == pytest.approx(1.0, abs=1e-12)
    # order preserving (ties may appear through rounding)
    v = np.asarray(d3)
    for i in range(len(v)):
        for j in range(len(v)):
            if v[i] < v[j]:
                assert d2[i] <= d2[j]


def _line_play(receiver_path):
    """Ball moving along y=20; one receiver following ``receiver_path``."""
    from test_ingest import make_record, make_tracking

    n = len(receiver_path)
    ball = [(30.0 + 2 * k, 20.0) for k in range(n)]
    players = {
        7: ("Al Passer", "offense", "QB", [(28.0, 20.0)] * n),
        11: ("Ann Alpha", "offense", "WR", receiver_path),
        12: ("Bo Beta", "offense", "TE", [(40.0, 30.0 + k) for k in range(n)]),
        90: ("Dee Fence", "defense", "CB", [(50.0, 30.0)] * n),
        91: ("Dan Fence", "defense", "S", [(55.0, 30.0)] * n),
    }
    events = ["pass_forward"] + [None] * (n - 2) + ["pass_outcome_caught"]
    tr = make_tracking(ball, players, events)
    rec = make_record(passer_id=7, target_id=11, candidates=(11, 12), pass_window=(1, n))
    return Play(rec, tr)


def test_player_on_ball_line_gets_floor():
    play = _line_play([(45.0, 20.0)] * 5)
    panel = build_distance_panel(play)
    assert np.all(panel.d1[:, 0] == D1_FLOOR)
    assert np.all(panel.d1[:, 1] > D1_FLOOR)


def test_first_window_frame_without_prior_motion_is_dropped():
    play = _line_play([(45.0, 20.0)] * 5)
    panel = build_distance_panel(play)
    assert list(panel.frame_index) == [2, 3, 4, 5]
    assert panel.dropped == [(1, 1, 1, "no_prior_ball_motion")]


def test_panel_matches_direct_geometry():
    play = _line_play([(45.0, 23.0 - 0.5 * k) for k in range(5)])
    panel = build_distance_panel(play)
    tr = play.tracking
    for j, fi in enumerate(panel.frame_index):
        r = tr.row(int(fi))
        ball, ball_prev = tr.xy[r, 0], tr.xy[r - 1, 0]
        p, p_prev = tr.xy[r, tr.col(11)], tr.xy[r - 1, tr.col(11)]
        d4 = math.dist(p, ball)
        assert panel.d4[j, 0] == pytest.approx(d4, abs=1e-12)
        assert panel.d3[j, 0] == pytest.approx(d4 - math.dist(p_prev, ball_prev), abs=1e-12)
        # ball moves along y = 20
        assert panel.d1[j, 0] == pytest.approx(max(abs(p[1] - 20.0), D1_FLOOR), abs=1e-12)


def test_corpus_panel_invariants(synth_panel):
    m = synth_panel.mask
    assert np.all(synth_panel.d1[m] >= D1_FLOOR)
    assert np.all(synth_panel.d4[m] >= 0)
    assert np.all(synth_panel.d2[m] >= 1.0 - 1e-12)
    d3min = np.nanmin(np.where(m, synth_panel.d3, np.nan), axis=1)
    d2min = np.nanmin(np.where(m, synth_panel.d2, np.nan), axis=1)
    np.testing.assert_allclose(d2min[d3min <= 0], 1.0, atol=1e-12)


# --------------------------------------------------------------------------
# Inverse-distance probabilities


def test_empirical_prob_examples():
    np.testing.assert_allclose(empirical_prob([1.0, 1.0]), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(empirical_prob([1.0, 3.0]), [0.75, 0.25], atol=1e-15)
    np.testing.assert_array_equal(empirical_prob([4.2]), [1.0])


def test_empirical_prob_rejects_nonpositive():
    with pytest.raises(TargetEngineError):
        empirical_prob([1.0, 0.0])


@settings(max_examples=300, deadline=None)
@given(st.lists(positive, min_size=1, max_size=10))
def test_empirical_prob_matches_literal_formula(d):
    np.testing.assert_allclose(empirical_prob(d), brute_inverse_prob(d), rtol=1e-12, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.lists(positive, min_size=1, max_size=10), st.floats(1e-3, 1e3))
def test_empirical_prob_scale_invariant(d, c):
    p = empirical_prob(d)
    q = empirical_prob(np.asarray(d) * c)
    np.testing.assert_allclose(p, q, atol=1e-12)
    assert np.argmax(p) == np.argmax(q)


def test_empirical_prob_padded_rows():
    rng = np.random.default_rng(3)
    d, mask = random_frames(rng, 200, lo=0.01, hi=30)
    p = empirical_prob(d)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p[~mask] == 0)
    for row, ok in zip(range(20), mask):
        np.testing.assert_allclose(p[row][ok], brute_inverse_prob(d[row][ok]), rtol=1e-12)


# --------------------------------------------------------------------------
# Blending and schedules


def test_blend_examples():
    p1, p2 = np.array([0.8, 0.2]), np.array([0.2, 0.8])
    np.testing.assert_array_equal(blend(p1, p2, 1.0), p1)
    np.testing.assert_array_equal(blend(p1, p2, 0.0), p2)
    np.testing.assert_allclose(blend(p1, p2, 0.5), [0.5, 0.5], atol=1e-15)


def test_blend_shape_mismatch():
    with pytest.raises(TargetEngineError):
        blend([0.5, 0.5], [1.0], 0.5)


def test_rank_weights_worked_example():
    got = rank_weights([3, 3, 2, 6, 6, 1, 8])
    np.testing.assert_array_equal(got, np.array([2, 2, 1, 3, 3, 0, 4]) / 4)


def test_rank_weights_distinct_extremes():
    w = rank_weights([5.0, 1.0, 9.0, 2.0])
    assert w[1] == 0.0 and w[2] == 1.0


def test_rank_weights_degenerate():
    np.testing.assert_array_equal(rank_weights([2.5, 2.5, 2.5]), [0.5, 0.5, 0.5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=2, max_size=40))
def test_rank_weights_monotone(values):
    w = rank_weights(values)
    v = np.asarray(values)
    u = len(np.unique(v))
    assert np.all((w >= 0) & (w <= 1))
    if u > 1:
        # weights live on the grid {0, 1/(u-1), ..., 1}
        np.testing.assert_allclose(w * (u - 1), np.round(w * (u - 1)), atol=1e-9)
    for i in range(len(v)):
        for j in range(len(v)):
            if v[i] < v[j]:
                assert w[i] < w[j]
            elif v[i] == v[j]:
                assert w[i] == w[j]


def test_schedule_extends_to_unseen_values():
    sched = WeightSchedule.fit([1.0, 2.0, 3.0, 5.0, 9.0])
    np.testing.assert_array_equal(sched.weights([0.5, 2.0, 4.0, 9.0, 11.0]),
                                  [0.0, 0.25, 0.75, 1.0, 1.0])


def test_compute_weight_schedule_uses_selector_argmin(synth_panel):
    sched, w = compute_weight_schedule(synth_panel, 1, 4)
    # oracle: explicit per-frame loop
    picked = []
    for j in range(len(synth_panel)):
        m = synth_panel.mask[j]
        i = int(np.argmin(synth_panel.d1[j][m]))
        picked.append(synth_panel.d4[j][m][i])
    uniq = sorted(set(picked))
    expected = [uniq.index(x) / (len(uniq) - 1) for x in picked]
    np.testing.assert_array_equal(w, expected)


def test_w23_values():
    assert w23(13.34183) == pytest.approx(0.5, abs=1e-15)
    assert w23(1) == pytest.approx(1 / (1 + math.exp(12.34183 / 2.57)), rel=1e-12)
    assert w23(1) == pytest.approx(0.008144, abs=1e-6)
    assert w23(46) == pytest.approx(0.999997, abs=1e-6)


@given(st.floats(1, 200), st.floats(1e-3, 50))
def test_w23_increasing_and_bounded(t, dt):
    a, b = w23(t), w23(t + dt)
    assert 0 < a < 1 or a == 1.0
    assert b >= a


def test_target_posterior_hand_example():
    got = target_posterior(np.array([0.75, 0.25]), np.array([0.5, 0.5]), 0.0, 1.0, 0.5)
    np.testing.assert_allclose(got, [0.625, 0.375], atol=1e-15)


def test_target_posterior_boundaries():
    p1, p2 = np.array([0.7, 0.2, 0.1]), np.array([0.3, 0.3, 0.4])
    np.testing.assert_allclose(target_posterior(p1, p2, 0.2, 0.9, 0.0), blend(p1, p2, 0.2))
    np.testing.assert_allclose(target_posterior(p1, p2, 0.2, 0.9, 1.0), blend(p1, p2, 0.9))


# --------------------------------------------------------------------------
# Proximity adjustment and argmax


def test_proximity_single_qualifier():
    got = proximity_adjust([0.6, 0.3, 0.1], [1.0, 5.0, 7.0], [1.5, 6.0, 8.0])
    np.testing.assert_allclose(got, [1.0, 0.0, 0.0], atol=1e-15)


def test_proximity_no_qualifier_is_identity():
    p = np.array([0.6, 0.3, 0.1])
    np.testing.assert_array_equal(proximity_adjust(p, [3.0, 5.0, 1.0], [3.0, 6.0, 2.5]), p)


def test_proximity_multiple_qualifiers():
    got = proximity_adjust([0.3, 0.5, 0.2], [1.0, 1.5, 9.0], [1.0, 1.9, 9.0])
    np.testing.assert_allclose(got, [0.3, 0.7, 0.0], atol=1e-15)


def test_proximity_requires_both_bounds():
    p = np.array([0.6, 0.4])
    np.testing.assert_array_equal(proximity_adjust(p, [1.0, 5.0], [2.0, 6.0]), p)


def test_proximity_idempotent_and_normalized():
    rng = np.random.default_rng(9)
    d1, mask = random_frames(rng, 300, lo=0.01, hi=6)
    d4 = np.where(mask, rng.uniform(0, 6, size=d1.shape), np.nan)
    p = empirical_prob(d1)
    once = proximity_adjust(p, d1, d4)
    np.testing.assert_array_equal(proximity_adjust(once, d1, d4), once)
    np.testing.assert_allclose(once.sum(axis=1), 1.0, atol=1e-9)
    near = (d1 < 2) & (d4 < 2)
    rows = near.any(axis=1)
    assert np.all(once[rows][~near[rows]] == 0)


def test_argmax_tie_breaks():
    ids = np.array([[30, 20, 10]])
    # tie on probability: smaller ball distance wins
    assert predicted_target([[0.4, 0.4, 0.2]], [[5.0, 3.0, 1.0]], ids)[0] == 1
    # tie on probability and distance: smaller id wins
    assert predicted_target([[0.4, 0.4, 0.2]], [[3.0, 3.0, 1.0]], ids)[0] == 1
    assert predicted_target([[0.5, 0.2, 0.3]], [[9.0, 1.0, 1.0]], ids)[0] == 0


# --------------------------------------------------------------------------
# Fitted model


def test_model_json_round_trip_bit_exact(tmp_path, synth_panel):
    model = TargetModel.fit(synth_panel)
    path = tmp_path / "target_model.json"
    model.save(path)
    back = TargetModel.load(path)
    for name, sched in model.schedules.items():
        assert back.schedules[name].levels.tobytes() == sched.levels.tobytes()
        assert (back.schedules[name].selector, back.schedules[name].value) == (sched.selector, sched.value)
    assert (back.midpoint, back.scale) == (model.midpoint, model.scale)
    assert back.posterior(synth_panel).tobytes() == model.posterior(synth_panel).tobytes()
    doc = json.loads(path.read_text())
    assert doc["logistic"] == {"asymptote": 1.0, "midpoint": 13.34183, "scale": 2.57}


def test_posteriors_sum_to_one_under_noise():
    tables = synthetic.generate(n_plays=30, seed=5, noise=0.5)
    plays, _ = run_ingest(tables)
    panel = build_corpus_panel(plays)
    model = TargetModel.fit(panel)
    for scheme in ("EW", "W1", "W2", "W3", "W4", "final"):
        for adjust in (False, True):
            p = model.posterior(panel, scheme, adjust)
            assert np.all((p >= 0) & (p <= 1))
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_symmetric_decoy_splits_evenly():
    tables = synthetic.generate(n_plays=5, seed=2, symmetric_decoy=True, n_decoys=0)
    plays, _ = run_ingest(tables)
    panel = build_corpus_panel(plays)
    model = TargetModel.fit(panel)
    raw = model.posterior(panel, "final", adjust=False)
    np.testing.assert_allclose(raw[panel.mask].reshape(len(panel), -1), 0.5, atol=1e-9)


def test_point_mass_on_truth_scores_perfectly(synth_panel):
    truth = synth_panel.truth_col()
    probs = np.zeros(synth_panel.mask.shape)
    probs[np.arange(len(truth)), truth] = 1.0
    out = evaluate_target_accuracy(synth_panel, {("oracle", False): probs})
    assert out["overall"]["accuracy"].iloc[0] == 1.0
    assert out["by_frame"]["first_n"].dropna().eq(1.0).all()


def test_first_and_last_n_windows(synth_panel):
    truth = synth_panel.truth_col()
    probs = np.zeros(synth_panel.mask.shape)
    # correct only on the first frame of each play
    first = synth_panel.t == 1
    probs[np.arange(len(truth)), np.where(first, truth, (truth + 1) % 2)] = 1.0
    out = evaluate_target_accuracy(synth_panel, {("x", False): probs})["by_frame"]
    assert out.loc[out.n == 1, "first_n"].iloc[0] == 1.0
    n_plays = len(set(zip(synth_panel.game_id, synth_panel.play_id)))
    assert out.loc[out.n == 2, "first_n"].iloc[0] == pytest.approx(
        first.sum() / (synth_panel.t <= 2).sum())
    assert first.sum() == n_plays


def test_scale_grid_search_covers_range(synth_panel):
    model = TargetModel.fit(synth_panel)
    best, curve = fit_w23_scale(synth_panel, model)
    assert len(curve) == 451
    assert curve["scale"].iloc[0] == 0.5 and curve["scale"].iloc[-1] == 5.0
    assert best in set(curve["scale"])
    assert curve.loc[curve.scale == best, "accuracy"].iloc[0] == curve["accuracy"].max()


def test_posterior_export_columns(synth_panel):
    model = TargetModel.fit(synth_panel)
    df = posterior_frame(synth_panel, model.posterior(synth_panel))
    assert list(df.columns) == ["game_id", "play_id", "frame_index", "t", "candidate_id",
                                "p_target", "predicted_flag"]
    per_frame = df.groupby(["game_id", "play_id", "frame_index"])
    assert per_frame["predicted_flag"].sum().eq(1).all()
    np.testing.assert_allclose(per_frame["p_target"].sum(), 1.0, atol=1e-9)


def test_no_lookahead(synth_plays, synth_panel):
    """Truncating a play after frame j leaves frame j's posterior unchanged."""
    model = TargetModel.fit(synth_panel)
    for play in synth_plays[:6]:
        full = build_distance_panel(play)
        full_post = model.posterior(full)
        tr = play.tracking
        for j in range(len(full)):
            fi = int(full.frame_index[j])
            keep = tr.frame_index <= fi
            short_tr = dataclasses.replace(
                tr, frame_index=tr.frame_index[keep], xy=tr.xy[keep],
                events=[e for e, k in zip(tr.events, keep) if k])
            short_rec = dataclasses.replace(
                play.record, pass_window=(play.record.pass_window[0], fi))
            short = build_distance_panel(Play(short_rec, short_tr))
            got = model.posterior(short)[-1]
            assert short.frame_index[-1] == fi
            assert got.tobytes() == full_post[j].tobytes()
