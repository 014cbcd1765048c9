"""Command-line entry point.

Every stage reads its inputs from and writes its outputs to ``--out-dir``::

    play_store/    plays.jsonl, ingest_report.json
    target/        target_model.json, posteriors.csv, accuracy tables and figure
    features/      features.csv
    model/         forest.json, train_summary.json
    evaluate/      benchmark.csv, roc_points.csv, calibration_bins.csv,
                   calibration_summary.json, figures
    predict/       frame_completions.csv, candidate_probs.csv
    render/<game>_<play>/  overlay.csv, frame_<n>.svg, evolution.png
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import SCHEMA_VERSION, __version__
from . import plots
from .classifiers import METHODS, run_benchmark, train_random_forest
from .classifiers.discriminant import SingularCovarianceError
from .classifiers.forest import ForestModel
from .classifiers.glm import GLMConvergenceError
from .completion import CALIBRATION_MODES, calibration_reports, play_series, threshold_accuracy
from .config import ConfigError, PipelineConfig, resolve
from .features import FEATURE_COLUMNS, feature_table, read_feature_csv, write_feature_csv
from .ingest import IngestReport, SchemaError, ingest_directory, read_play_store, write_play_store
from .pipeline import (
    cross_validated_completions,
    fit_target_model,
    play_panels,
    score_plays,
    target_training_rows,
)
from .synthetic import SyntheticConfig, aimed_pass_config, generate, write_tables
from .target import TargetEngineError, TargetModel, accuracy_table, concat_panels, posterior_frame

log = logging.getLogger("passcomp")

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_MISSING = 3
EXIT_NUMERICAL = 4

NUMERICAL_ERRORS = (GLMConvergenceError, SingularCovarianceError, TargetEngineError,
                    FloatingPointError, np.linalg.LinAlgError)


class MissingPrerequisite(RuntimeError):
    pass


class Layout:
    """Artifact paths under the output directory."""

    def __init__(self, root):
        self.root = Path(root)

    def dir(self, name: str) -> Path:
        d = self.root / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    @property
    def play_store(self) -> Path:
        return self.root / "play_store" / "plays.jsonl"

    @property
    def target_model(self) -> Path:
        return self.root / "target" / "target_model.json"

    @property
    def features(self) -> Path:
        return self.root / "features" / "features.csv"

    @property
    def forest(self) -> Path:
        return self.root / "model" / "forest.json"

    @property
    def frame_completions(self) -> Path:
        return self.root / "predict" / "frame_completions.csv"


PRODUCERS = {
    "play_store": "ingest",
    "target_model": "target-probs",
    "features": "features",
    "forest": "train",
    "frame_completions": "predict",
}


def require(layout: Layout, name: str) -> Path:
    path = getattr(layout, name)
    if not path.exists():
        raise MissingPrerequisite(
            f"missing {path}; run `passcomp {PRODUCERS[name]}` with the same --out-dir first"
        )
    return path


def _write_csv(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _load_plays(layout: Layout):
    return read_play_store(require(layout, "play_store"))


# --------------------------------------------------------------------------
# Commands


def cmd_ingest(cfg: PipelineConfig) -> int:
    if not cfg.input_dir:
        raise MissingPrerequisite("ingest needs --input-dir pointing at the raw CSV tables")
    layout = Layout(cfg.out_dir)
    report = IngestReport()
    n = write_play_store(ingest_directory(cfg.input_dir, report), layout.dir("play_store") / "plays.jsonl")
    _write_json(report.to_dict(), layout.root / "play_store" / "ingest_report.json")
    print(f"ingested {n} of {report.plays_seen} plays into {layout.play_store}")
    return EXIT_OK


def cmd_target_probs(cfg: PipelineConfig) -> int:
    layout = Layout(cfg.out_dir)
    plays = _load_plays(layout)
    panel = concat_panels(play_panels(plays))
    if not len(panel):
        raise TargetEngineError("no scorable frames in the play store")
    model, curve = fit_target_model(panel, cfg.refit_w23, cfg.w23_midpoint, cfg.w23_scale)
    out = layout.dir("target")
    model.save(out / "target_model.json")
    probs = model.posterior(panel, "final", adjust=True)
    _write_csv(posterior_frame(panel, probs), out / "posteriors.csv")
    acc = accuracy_table(panel, model)
    _write_csv(acc["overall"], out / "accuracy_overall.csv")
    _write_csv(acc["by_frame"], out / "accuracy_by_frame.csv")
    plots.accuracy_by_frame(acc["by_frame"], out / "accuracy_by_frame.png")
    if curve is not None:
        _write_csv(curve, out / "w23_scale_curve.csv")
        plots.w23_scale_curve(curve, model.scale, out / "w23_scale_curve.png")
    final = acc["overall"].query("scheme == 'final' and adjusted")["accuracy"].iloc[0]
    print(f"target model written; adjusted final-scheme accuracy {final:.4f} "
          f"(midpoint {model.midpoint:.5g}, scale {model.scale:.4g})")
    return EXIT_OK


def cmd_features(cfg: PipelineConfig) -> int:
    layout = Layout(cfg.out_dir)
    plays = _load_plays(layout)
    df = feature_table(plays)
    write_feature_csv(df, layout.dir("features") / "features.csv")
    print(f"{len(df)} feature rows ({int(df['is_target'].sum())} true-target rows) "
          f"written to {layout.features}")
    return EXIT_OK


def cmd_train(cfg: PipelineConfig) -> int:
    layout = Layout(cfg.out_dir)
    feats = target_training_rows(read_feature_csv(require(layout, "features")))
    model = train_random_forest(feats[list(FEATURE_COLUMNS)], feats["completed"].to_numpy(),
                                mtry=cfg.mtry, n_trees=cfg.trees, seed=cfg.seed, n_jobs=cfg.jobs)
    out = layout.dir("model")
    model.save(out / "forest.json")
    _write_json({"schema_version": SCHEMA_VERSION, "rows": len(feats), "trees": cfg.trees,
                 "mtry": cfg.mtry, "seed": cfg.seed, "oob_auc": model.oob_auc,
                 "oob_error": model.oob_error}, out / "train_summary.json")
    print(f"forest of {cfg.trees} trees trained on {len(feats)} rows; OOB AUC {model.oob_auc}")
    return EXIT_OK


def cmd_evaluate(cfg: PipelineConfig) -> int:
    layout = Layout(cfg.out_dir)
    feats = read_feature_csv(require(layout, "features"))
    target_model = TargetModel.load(require(layout, "target_model"))
    plays = _load_plays(layout)
    rows = target_training_rows(feats)
    groups = list(zip(rows["game_id"].astype(int), rows["play_id"].astype(int)))
    report = run_benchmark(rows[list(FEATURE_COLUMNS)], rows["completed"].to_numpy(), groups,
                           methods=tuple(cfg.methods), fold_counts=(cfg.folds,), seed=cfg.seed,
                           mtry=cfg.mtry, n_trees=cfg.trees, n_jobs=cfg.jobs)
    out = layout.dir("evaluate")
    _write_csv(report.table.drop(columns=["seconds"]), out / "benchmark.csv")
    _write_csv(report.table[["method", "folds", "seconds"]], out / "benchmark_timing.csv")
    _write_csv(report.roc, out / "roc_points.csv")
    if len(report.roc):
        plots.roc_plot(report.roc, out / "roc.png", METHODS)

    panels = play_panels(plays)
    panel = concat_panels(panels)
    probs = target_model.posterior(panel, "final", adjust=True)
    scored = cross_validated_completions(plays, panel, probs, feats, cfg.folds, cfg.seed,
                                         cfg.mtry, cfg.trees, cfg.jobs)
    frames = scored.frames.dropna(subset=["p_complete", "p_complete_given_predicted"])
    _write_csv(frames, out / "frame_completions_cv.csv")
    reps = calibration_reports(frames, cfg.bins)
    _write_csv(pd.concat([r.bins.assign(mode=m) for m, r in reps.items()], ignore_index=True),
               out / "calibration_bins.csv")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "folds": cfg.folds,
        "bins": cfg.bins,
        "threshold_accuracy": threshold_accuracy(frames["p_complete_given_predicted"],
                                                 frames["completed"]),
        "calibration": {m: reps[m].summary() for m in CALIBRATION_MODES},
    }
    _write_json(summary, out / "calibration_summary.json")
    plots.calibration_plot(reps, out / "calibration.png")
    print(report.table.drop(columns=["key", "error"]).to_string(index=False))
    print(f"threshold-0.5 accuracy {summary['threshold_accuracy']:.4f}")
    return EXIT_OK


def cmd_predict(cfg: PipelineConfig) -> int:
    layout = Layout(cfg.out_dir)
    target_model = TargetModel.load(require(layout, "target_model"))
    forest = ForestModel.load(require(layout, "forest"))
    if cfg.input_dir:
        plays = list(ingest_directory(cfg.input_dir))
    else:
        plays = _load_plays(layout)
    scored = score_plays(plays, target_model, forest)
    out = layout.dir("predict")
    _write_csv(scored.frames, out / "frame_completions.csv")
    _write_csv(scored.candidates, out / "candidate_probs.csv")
    if cfg.format == "json":
        with open(out / "frame_completions.json", "w", encoding="utf-8") as fh:
            fh.write(scored.frames.to_json(orient="records", double_precision=15))
            fh.write("\n")
    print(f"{len(scored.frames)} frames scored across {len(plays)} plays")
    return EXIT_OK


def _parse_play(s: str) -> tuple[int, int]:
    game, _, play = str(s).partition(":")
    if not play:
        raise ConfigError(f"play must be GAME:PLAY, got {s!r}")
    return int(game), int(play)


def _parse_frames(s: str | None):
    if not s:
        return None
    lo, _, hi = str(s).partition(":")
    return int(lo), int(hi or lo)


def nearest_keys(key, keys, n: int = 5) -> list:
    return sorted(keys, key=lambda k: (abs(k[0] - key[0]), abs(k[1] - key[1]), k))[:n]


def cmd_render(cfg: PipelineConfig) -> int:
    layout = Layout(cfg.out_dir)
    frames = pd.read_csv(require(layout, "frame_completions"), float_precision="round_trip")
    plays = {p.key: p for p in _load_plays(layout)}
    wanted = [_parse_play(s) for s in cfg.plays] or sorted(plays)[:1]
    span = _parse_frames(cfg.frames)
    written = 0
    for key in wanted:
        if key not in plays:
            near = ", ".join(f"{g}:{p}" for g, p in nearest_keys(key, plays))
            raise KeyError(f"unknown play {key[0]}:{key[1]}; nearest keys: {near}")
        play = plays[key]
        sub = frames
        if span is not None:
            sub = frames[frames["frame_index"].between(*span)]
        overlay = plots.overlay_records(play, sub)
        if overlay.empty:
            print(f"no scored frames for {key[0]}:{key[1]} in range {cfg.frames}; nothing written")
            continue
        out = layout.dir(f"render/{key[0]}_{key[1]}")
        if cfg.format == "json":
            with open(out / "overlay.json", "w", encoding="utf-8") as fh:
                fh.write(overlay.to_json(orient="records", double_precision=15))
                fh.write("\n")
        else:
            _write_csv(overlay, out / "overlay.csv")
        if cfg.format == "svg":
            for fi, grp in overlay.groupby("frame_index", sort=True):
                plots.field_svg(grp, out / f"frame_{int(fi):04d}.svg")
                written += 1
            series = play_series(sub, *key)
            plots.evolution_plot(series, out / "evolution.png", f"game {key[0]} play {key[1]}")
    print(f"rendered {written} frames")
    return EXIT_OK


def cmd_gen_synthetic(cfg: PipelineConfig, args) -> int:
    base = aimed_pass_config() if args.aimed else SyntheticConfig()
    base.seed = cfg.seed
    for name in ("n_plays", "noise", "separation", "pass_depth", "ball_speed", "n_decoys"):
        v = getattr(args, name)
        if v is not None:
            setattr(base, name, v)
    base.symmetric_decoy = bool(args.symmetric_decoy)
    tables = generate(base)
    out = write_tables(tables, cfg.out_dir)
    print(f"{len(tables['plays'])} synthetic plays written to {out}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "target-probs": cmd_target_probs,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "render": cmd_render,
}


# --------------------------------------------------------------------------
# Argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file of options; flags override it")
    p.add_argument("--input-dir", dest="input_dir")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int, choices=(5, 10))
    p.add_argument("--mtry", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--w23-midpoint", dest="w23_midpoint", type=float)
    p.add_argument("--w23-scale", dest="w23_scale", type=float)
    p.add_argument("--refit-w23", dest="refit_w23", action="store_true", default=None)
    p.add_argument("--bins", type=int)
    p.add_argument("--format", choices=("csv", "json", "svg"))
    p.add_argument("--methods", nargs="+", choices=tuple(METHODS))
    p.add_argument("--play", dest="plays", action="append", metavar="GAME:PLAY")
    p.add_argument("--frames", metavar="FIRST:LAST")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="passcomp",
                                     description="Pass target and completion probabilities "
                                                 "from player tracking data.")
    parser.add_argument("--version", action="version", version=f"passcomp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _common(sub.add_parser(name))
    gen = sub.add_parser("gen-synthetic", help="write synthetic raw tables to --out-dir")
    _common(gen)
    gen.add_argument("--n-plays", dest="n_plays", type=int)
    gen.add_argument("--noise", type=float)
    gen.add_argument("--separation", type=float)
    gen.add_argument("--depth", dest="pass_depth", type=float)
    gen.add_argument("--ball-speed", dest="ball_speed", type=float)
    gen.add_argument("--decoys", dest="n_decoys", type=int)
    gen.add_argument("--symmetric-decoy", dest="symmetric_decoy", action="store_true")
    gen.add_argument("--aimed", action="store_true",
                     help="zero-noise quick passes aimed at the receiver")
    return parser


CONFIG_KEYS = ("input_dir", "out_dir", "seed", "folds", "mtry", "trees", "jobs", "w23_midpoint",
               "w23_scale", "refit_w23", "bins", "format", "methods", "plays", "frames")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve({k: getattr(args, k, None) for k in CONFIG_KEYS}, args.config)
        if args.command == "gen-synthetic":
            return cmd_gen_synthetic(cfg, args)
        return COMMANDS[args.command](cfg)
    except (SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (MissingPrerequisite, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
