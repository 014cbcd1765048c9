"""Figures and field overlays written to files.

All output is byte-stable across runs: SVG ids use a fixed hash salt and no
creation date is embedded.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .ingest import FIELD_LENGTH, FIELD_WIDTH  # noqa: E402

BALL_COLOR = "#8b4513"
OFFENSE_COLOR = "#1f4e9c"
DEFENSE_COLOR = "#c0392b"
FIELD_COLOR = "#e8f3e8"

_RC = {
    "svg.hashsalt": "passcomp",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = path.suffix.lstrip(".").lower()
    meta = {"Date": None} if fmt == "svg" else {"Software": None} if fmt == "png" else None
    fig.savefig(path, format=fmt, metadata=meta)
    plt.close(fig)
    return path


def accuracy_by_frame(by_frame: pd.DataFrame, path, adjusted: bool = True) -> Path:
    """Accuracy restricted to the first n and last n frames, one line per scheme."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2), sharey=True)
        sel = by_frame[by_frame["adjusted"] == adjusted]
        for scheme, grp in sel.groupby("scheme", sort=False):
            axes[0].plot(grp["n"], grp["first_n"], lw=1, label=scheme)
            axes[1].plot(grp["n"], grp["last_n"], lw=1, label=scheme)
        axes[0].set_xlabel("first n frames")
        axes[1].set_xlabel("last n frames")
        axes[0].set_ylabel("target accuracy")
        axes[1].legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def w23_scale_curve(curve: pd.DataFrame, best: float, path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(curve["scale"], curve["accuracy"], lw=1, color="k")
        ax.axvline(best, color="0.5", lw=0.8, ls="--")
        ax.set_xlabel("logistic scale")
        ax.set_ylabel("adjusted accuracy")
        fig.tight_layout()
        return _save(fig, path)


def roc_plot(roc: pd.DataFrame, path, labels: dict | None = None) -> Path:
    labels = labels or {}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4, 4))
        for (method, folds), grp in roc.groupby(["method", "folds"], sort=False):
            ax.plot(grp["fpr"], grp["tpr"], lw=1, label=f"{labels.get(method, method)} ({folds})")
        ax.plot([0, 1], [0, 1], color="0.6", lw=0.6, ls=":")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_aspect("equal")
        ax.legend(frameon=False, fontsize=6, loc="lower right")
        fig.tight_layout()
        return _save(fig, path)


def calibration_plot(reports: dict, path) -> Path:
    """Reliability points for each setup; point area follows bin count."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(7, 7), sharex=True, sharey=True)
        for ax, (mode, rep) in zip(axes.ravel(), reports.items()):
            b = rep.bins
            size = 200.0 * b["count"] / max(b["count"].max(), 1) if len(b) else []
            ax.scatter(b["probability"], b["observed"], s=size, color="k", alpha=0.6, lw=0)
            ax.plot([0, 1], [0, 1], color="0.5", lw=0.6, ls="--")
            ax.set_title(f"{mode}  r={rep.pearson:.3f}  rho_c={rep.concordance:.3f}", fontsize=8)
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1)
        for ax in axes[1]:
            ax.set_xlabel("predicted probability")
        for ax in axes[:, 0]:
            ax.set_ylabel("observed completion fraction")
        fig.tight_layout()
        return _save(fig, path)


def evolution_plot(series: pd.DataFrame, path, title: str = "") -> Path:
    """P(C) and P(C | predicted target) over the frames of one play."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(series["t"], series["p_complete"], marker="o", ms=3, lw=1, label="P(C)")
        ax.plot(series["t"], series["p_complete_given_predicted"], marker="s", ms=3, lw=1,
                label="P(C | predicted target)")
        ax.set_ylim(0, 1)
        ax.set_xlabel("frame within pass")
        ax.set_ylabel("completion probability")
        ax.set_title(title, fontsize=8)
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


# --------------------------------------------------------------------------
# Field overlays


OVERLAY_COLUMNS = ["game_id", "play_id", "frame_index", "t", "entity_id", "jersey", "side",
                   "x", "y", "p_complete", "predicted_target", "predicted_jersey",
                   "p_complete_given_predicted"]


def overlay_records(play, frames: pd.DataFrame) -> pd.DataFrame:
    """One row per tracked entity per scored frame, with the frame's scores."""
    tr = play.tracking
    scored = frames[(frames["game_id"] == play.record.game_id)
                    & (frames["play_id"] == play.record.play_id)]
    out = []
    for row in scored.sort_values("frame_index", kind="mergesort").itertuples(index=False):
        r = tr.row(int(row.frame_index))
        pred = int(row.predicted_target)
        pred_jersey = tr.jersey_numbers[tr.col(pred)]
        for c, eid in enumerate(tr.entity_ids):
            x, y = tr.xy[r, c]
            if np.isnan(x):
                continue
            out.append({
                "game_id": int(row.game_id), "play_id": int(row.play_id),
                "frame_index": int(row.frame_index), "t": int(row.t),
                "entity_id": int(eid), "jersey": tr.jersey_numbers[c],
                "side": tr.team_sides[c], "x": float(x), "y": float(y),
                "p_complete": float(row.p_complete), "predicted_target": pred,
                "predicted_jersey": pred_jersey,
                "p_complete_given_predicted": float(row.p_complete_given_predicted),
            })
    return pd.DataFrame(out, columns=OVERLAY_COLUMNS)


def _jersey_label(j) -> str:
    return "" if j is None or (isinstance(j, float) and np.isnan(j)) else str(int(j))


def field_svg(frame_rows: pd.DataFrame, path) -> Path:
    """Draw one frame on a 120 x 53.3 yd field with the probability caption."""
    first = frame_rows.iloc[0]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(9, 4.6))
        ax.add_patch(Rectangle((0, 0), FIELD_LENGTH, FIELD_WIDTH, color=FIELD_COLOR, zorder=0))
        for x in range(10, 111, 5):
            ax.axvline(x, color="white" if x % 10 else "0.7", lw=0.6, zorder=1)
        for x in (10, 110):
            ax.axvline(x, color="0.3", lw=1.0, zorder=1)
        styles = {"offense": (OFFENSE_COLOR, "o", 70), "defense": (DEFENSE_COLOR, "X", 60),
                  "ball": (BALL_COLOR, "D", 40)}
        for side, (color, marker, size) in styles.items():
            sel = frame_rows[frame_rows["side"] == side]
            ax.scatter(sel["x"], sel["y"], s=size, c=color, marker=marker, zorder=3,
                       label=side, edgecolors="k", linewidths=0.4)
            if side != "ball":
                for r in sel.itertuples(index=False):
                    ax.annotate(_jersey_label(r.jersey), (r.x, r.y), xytext=(0, 6),
                                textcoords="offset points", ha="center", fontsize=6, zorder=4)
        ax.set_xlim(0, FIELD_LENGTH)
        ax.set_ylim(0, FIELD_WIDTH)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
        caption = (f"frame {int(first['frame_index'])}   P(C)={first['p_complete']:.3f}   "
                   f"predicted target #{_jersey_label(first['predicted_jersey'])}   "
                   f"P(C|T=predicted)={first['p_complete_given_predicted']:.3f}")
        ax.set_title(caption, fontsize=9)
        ax.legend(loc="upper left", fontsize=7, frameon=True, bbox_to_anchor=(1.0, 1.0))
        fig.tight_layout()
        return _save(fig, path)
