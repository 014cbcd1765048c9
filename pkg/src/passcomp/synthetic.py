"""Synthetic passing plays in the Big Data Bowl 2021 table layout.

Each play has a passer, one intended receiver, decoy receivers and trailing
defenders. The ball leaves the passer on a straight line and reaches the
intended receiver, who runs along the line of flight, on the outcome frame.
Completion is drawn from a logistic model of the receiver's separation from
the nearest defender at the catch point, so the completion model has real
signal to learn.

All randomness comes from one ``numpy`` generator seeded by ``seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .ingest import FIELD_LENGTH, FIELD_WIDTH

FIRST_NAMES = ("Aaron", "Blake", "Caleb", "Derek", "Ethan", "Felix", "Grant", "Hayden", "Isaac",
               "Jalen", "Kyle", "Logan", "Mason", "Nolan", "Owen", "Parker", "Quinn", "Reed",
               "Shane", "Tyler", "Victor", "Wade", "Xavier", "Zane")
LAST_NAMES = ("Adams", "Baker", "Carter", "Dalton", "Ellis", "Foster", "Garcia", "Hughes", "Irving",
              "Jensen", "Keller", "Lawson", "Morgan", "Nash", "Ortiz", "Porter", "Quincy", "Reyes",
              "Sutton", "Turner", "Upton", "Vance", "Walsh", "Young")
FORMATIONS = ("SHOTGUN", "SINGLEBACK", "EMPTY", "I_FORM", "PISTOL")
DROPBACKS = ("TRADITIONAL", "DESIGNED_ROLLOUT_RIGHT", "DESIGNED_ROLLOUT_LEFT", "SCRAMBLE")
OFFENSE_POSITIONS = ("QB", "WR", "WR", "WR", "TE", "RB")
DEFENSE_POSITIONS = ("CB", "CB", "FS", "SS", "OLB", "MLB", "DE")
PLAYS_PER_GAME = 20


@dataclass
class SyntheticConfig:
    n_plays: int = 200
    seed: int = 0
    noise: float = 0.0
    separation: float = 3.0
    pass_depth: float = 15.0
    ball_speed: float = 2.0
    n_decoys: int = 4
    frames_before_pass: int = 8
    unnamed_incomplete_rate: float = 0.2
    interception_rate: float = 0.1
    symmetric_decoy: bool = False
    target_route: str = "comeback"
    decoy_along: tuple = (0.1, 1.1)
    decoy_offset: tuple = (6.0, 16.0)
    decoy_drift: tuple = (0.15, 0.5)


def aimed_pass_config(**overrides) -> SyntheticConfig:
    """Zero-noise quick passes: fast ball, short flight, decoys drifting off the line."""
    cfg = SyntheticConfig(noise=0.0, ball_speed=3.0, pass_depth=8.0)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


@dataclass
class _Unit:
    team: str
    ids: list
    names: list
    positions: list
    jerseys: list


def _units(rng, n_teams: int, first_id: int):
    offense, defense, players = {}, {}, []
    nid = first_id
    for k in range(n_teams):
        team = f"T{k:02d}"
        for side, positions in (("offense", OFFENSE_POSITIONS), ("defense", DEFENSE_POSITIONS)):
            ids, names, jerseys = [], [], []
            used = set()
            for pos in positions:
                while True:
                    name = f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}"
                    abbrev = name[0] + "." + name.split()[1]
                    if abbrev not in used:
                        used.add(abbrev)
                        break
                ids.append(nid)
                names.append(name)
                jerseys.append(int(rng.integers(1, 99)))
                players.append({"nflId": nid, "position": pos, "displayName": name})
                nid += 1
            unit = _Unit(team, ids, names, list(positions), jerseys)
            (offense if side == "offense" else defense)[team] = unit
    return offense, defense, players


def _abbrev(name: str) -> str:
    first, last = name.split(" ", 1)
    return f"{first[0]}.{last}"


def _perp(u):
    return np.array([-u[1], u[0]])


def _inside(points, margin=0.5):
    x, y = points[..., 0], points[..., 1]
    return bool(np.all((x > margin) & (x < FIELD_LENGTH - margin) & (y > margin)
                       & (y < FIELD_WIDTH - margin)))


def _play_geometry(rng, cfg: SyntheticConfig):
    """Normalized positions ``(n_frames, n_entities, 2)`` for one play.

    Entity order: ball, passer, target, decoys..., defenders...
    """
    for _ in range(1000):
        los = rng.uniform(20.0, 70.0)
        qb = np.array([los - rng.uniform(5.0, 8.0), rng.uniform(18.0, 35.0)])
        depth = max(3.0, rng.uniform(0.5, 1.5) * cfg.pass_depth)
        lateral = rng.uniform(-0.8, 0.8) * depth
        catch = qb + np.array([depth, lateral])
        length = float(np.hypot(depth, lateral))
        n_flight = int(np.clip(math.ceil(length / cfg.ball_speed), 2, 46))
        u = (catch - qb) / length
        n = _perp(u)
        pre = cfg.frames_before_pass
        n_frames = pre + n_flight + 3
        pf = pre + 1                      # 1-based frame of pass_forward
        k = np.arange(1, n_frames + 1) - pf   # flight step; 0 at release

        frac = np.clip(k / n_flight, 0.0, None)
        ball = qb[None, :] + np.minimum(frac, 1.0)[:, None] * (catch - qb)[None, :]
        after = k > n_flight
        tgt_speed = rng.uniform(0.3, 0.7) * min(cfg.ball_speed, length / n_flight)
        # "go" runs away from the passer along the flight line, "comeback" toward it
        sign = 1.0 if cfg.target_route == "go" else -1.0
        target = catch[None, :] - (sign * tgt_speed * (n_flight - k))[:, None] * u[None, :]
        ball[after] = target[after]

        receivers = [target]
        if cfg.symmetric_decoy:
            h = rng.uniform(2.5, 5.0)
            receivers = [target + h * n, target - h * n]
        else:
            for d in range(cfg.n_decoys):
                side = 1.0 if d % 2 == 0 else -1.0
                offset = rng.uniform(*cfg.decoy_offset) + 4.0 * (d // 2)
                along_s = rng.uniform(*cfg.decoy_along) * length
                drift = rng.uniform(*cfg.decoy_drift)
                start = qb + along_s * u + side * offset * n
                # decoys move away from the flight line and downfield
                vel = 0.35 * u + side * drift * n
                receivers.append(start[None, :] + (k - n_flight / 2)[:, None] * vel[None, :])

        defenders = []
        covered = receivers + receivers[:1]
        for d in range(len(DEFENSE_POSITIONS)):
            rec = covered[d % len(covered)]
            sep = cfg.separation * rng.uniform(0.3, 1.7)
            ang = rng.uniform(0.0, 2 * np.pi)
            off = sep * np.array([np.cos(ang), np.sin(ang)])
            closing = np.clip(1.0 - 0.02 * np.maximum(k, 0), 0.6, 1.0)
            defenders.append(rec + closing[:, None] * off[None, :])

        passer = np.repeat(qb[None, :], n_frames, axis=0)
        xy = np.stack([ball, passer] + receivers + defenders, axis=1)
        if _inside(xy):
            return xy, pf, n_flight, catch
    raise RuntimeError("could not place a play inside the field")


def generate(cfg: SyntheticConfig | None = None, **overrides) -> dict:
    """Build ``games``, ``players``, ``plays``, ``week1`` and ``truth`` tables."""
    cfg = cfg or SyntheticConfig()
    for k, v in overrides.items():
        setattr(cfg, k, v)
    rng = np.random.default_rng(cfg.seed)
    n_games = max(1, math.ceil(cfg.n_plays / PLAYS_PER_GAME))
    n_teams = 2 * n_games
    offense, defense, players = _units(rng, n_teams, first_id=10000)

    games, plays, tracking, truth = [], [], [], []
    for g in range(n_games):
        game_id = 2018090600 + g
        home, away = f"T{2 * g:02d}", f"T{2 * g + 1:02d}"
        games.append({"gameId": game_id, "gameDate": "09/06/2018", "gameTimeEastern": "20:20:00",
                      "homeTeamAbbr": home, "visitorTeamAbbr": away, "week": 1})
        scores = {home: 0, away: 0}
        n_here = min(PLAYS_PER_GAME, cfg.n_plays - g * PLAYS_PER_GAME)
        for p in range(n_here):
            play_id = 75 + 25 * p
            off_team = home if p % 2 == 0 else away
            def_team = away if off_team == home else home
            o, d = offense[off_team], defense[def_team]
            direction = "right" if rng.random() < 0.5 else "left"
            xy, pf, n_flight, catch = _play_geometry(rng, cfg)
            n_frames = xy.shape[0]
            xy = xy + rng.normal(0.0, cfg.noise, xy.shape) if cfg.noise > 0 else xy

            n_recv = 2 if cfg.symmetric_decoy else 1 + cfg.n_decoys
            recv_slots = list(range(1, 1 + n_recv))
            recv_ids = [o.ids[s] for s in recv_slots]
            target_id = recv_ids[0]
            target_name = o.names[recv_slots[0]]

            out_frame = pf + n_flight
            tgt = xy[out_frame - 1, 2]
            def_xy = xy[out_frame - 1, 2 + n_recv:]
            sep = float(np.min(np.hypot(*(def_xy - tgt).T)))
            p_complete = 1.0 / (1.0 + math.exp(-(3.0 * (sep - 0.5 * cfg.separation) - 0.03 * (catch[0] - xy[0, 1, 0]))))
            completed = rng.random() < p_complete
            if completed:
                outcome, event = "C", "pass_outcome_caught"
            elif rng.random() < cfg.interception_rate:
                outcome, event = "IN", "pass_outcome_interception"
            else:
                outcome, event = "I", "pass_outcome_incomplete"

            qb_name = _abbrev(o.names[0])
            depth = "deep" if catch[0] - xy[0, 1, 0] > 15 else "short"
            lane = "left" if catch[1] > xy[0, 1, 1] + 5 else "right" if catch[1] < xy[0, 1, 1] - 5 else "middle"
            clock = f"{int(rng.integers(0, 15)):02d}:{int(rng.integers(0, 60)):02d}"
            if outcome == "C":
                desc = (f"({clock}) {qb_name} pass {depth} {lane} to {_abbrev(target_name)} "
                        f"for {int(round(catch[0] - xy[0, 1, 0]))} yards ({_abbrev(d.names[0])}).")
            elif outcome == "IN":
                desc = (f"({clock}) {qb_name} pass {depth} {lane} intended for {_abbrev(target_name)} "
                        f"INTERCEPTED by {_abbrev(d.names[0])}.")
            elif rng.random() < cfg.unnamed_incomplete_rate:
                desc = f"({clock}) {qb_name} pass incomplete {depth} {lane}."
            else:
                desc = f"({clock}) {qb_name} pass incomplete {depth} {lane} to {_abbrev(target_name)}."

            los_x = xy[0, 1, 0] + 6.0
            yardline = int(np.clip(round(los_x - 10.0), 1, 99))
            home_score, away_score = scores[home], scores[away]
            plays.append({
                "gameId": game_id, "playId": play_id, "playDescription": desc,
                "quarter": int(1 + p * 4 // PLAYS_PER_GAME), "down": int(rng.integers(1, 5)),
                "yardsToGo": int(rng.integers(1, 16)), "possessionTeam": off_team,
                "playType": "play_type_pass",
                "yardlineSide": off_team if yardline <= 50 else def_team,
                "yardlineNumber": yardline if yardline <= 50 else 100 - yardline,
                "offenseFormation": str(rng.choice(FORMATIONS)),
                "personnelO": "1 RB, 1 TE, 3 WR",
                "defendersInTheBox": int(rng.integers(4, 8)),
                "numberOfPassRushers": int(rng.integers(3, 6)),
                "personnelD": "4 DL, 2 LB, 5 DB",
                "typeDropback": str(rng.choice(DROPBACKS)),
                "preSnapVisitorScore": away_score, "preSnapHomeScore": home_score,
                "gameClock": clock + ":00", "absoluteYardlineNumber": yardline + 10,
                "penaltyCodes": np.nan, "penaltyJerseyNumbers": np.nan,
                "passResult": outcome, "offensePlayResult": 0, "playResult": 0, "epa": 0.0,
                "isDefensivePI": False,
            })
            if completed and rng.random() < 0.15:
                scores[off_team] += 7
            truth.append({"gameId": game_id, "playId": play_id, "targetId": target_id,
                          "passResult": outcome, "separation": sep, "nFlightFrames": n_flight})

            entities = [(None, "Football", None, None, "football")]
            entities.append((o.ids[0], o.names[0], o.jerseys[0], "QB", "home" if off_team == home else "away"))
            for s in recv_slots:
                entities.append((o.ids[s], o.names[s], o.jerseys[s], o.positions[s],
                                 "home" if off_team == home else "away"))
            for j in range(len(DEFENSE_POSITIONS)):
                entities.append((d.ids[j], d.names[j], d.jerseys[j], d.positions[j],
                                 "home" if def_team == home else "away"))

            events = ["None"] * n_frames
            events[0] = "ball_snap"
            events[pf - 1] = "pass_forward"
            events[out_frame - 1] = event
            x, y = xy[..., 0], xy[..., 1]
            if direction == "left":
                x, y = FIELD_LENGTH - x, FIELD_WIDTH - y
            for f in range(n_frames):
                for e, (nid, name, jersey, pos, team) in enumerate(entities):
                    tracking.append((
                        f"2018-09-07T00:{f // 600:02d}:{(f // 10) % 60:02d}.{f % 10}00Z",
                        x[f, e], y[f, e], 0.0, 0.0, 0.0, 0.0, 0.0, events[f],
                        nid, name, jersey, pos, f + 1, team, game_id, play_id, direction, None,
                    ))

    track_cols = ["time", "x", "y", "s", "a", "dis", "o", "dir", "event", "nflId", "displayName",
                  "jerseyNumber", "position", "frameId", "team", "gameId", "playId",
                  "playDirection", "route"]
    week = pd.DataFrame(tracking, columns=track_cols)
    week["nflId"] = week["nflId"].astype("Int64")
    week["jerseyNumber"] = week["jerseyNumber"].astype("Int64")
    return {
        "games": pd.DataFrame(games),
        "players": pd.DataFrame(players),
        "plays": pd.DataFrame(plays),
        "week1": week,
        "truth": pd.DataFrame(truth),
    }


def write_tables(tables: dict, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, df in tables.items():
        df.to_csv(out_dir / f"{name}.csv", index=False, float_format="%.17g")
    return out_dir
