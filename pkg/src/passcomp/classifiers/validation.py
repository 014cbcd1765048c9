"""Play-grouped cross-validation and the model benchmark."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .discriminant import DiscriminantAnalysis
from .forest import RandomForestClassifier
from .glm import BinomialGLM
from .metrics import auc_trapezoid, roc_curve

log = logging.getLogger(__name__)

FOLD_COUNTS = (5, 10)

METHODS = {
    "random_forest": "Random Forest",
    "glm_logit": "BR (logit link)",
    "glm_probit": "BR (probit link)",
    "glm_cloglog": "BR (cloglog link)",
    "lda": "LDA",
    "qda": "QDA",
}


def make_model(method: str, seed: int = 0, mtry: int = 15, n_trees: int = 500, n_jobs: int = 1):
    if method == "random_forest":
        return RandomForestClassifier(mtry=mtry, n_trees=n_trees, seed=seed, n_jobs=n_jobs)
    if method.startswith("glm_"):
        return BinomialGLM(method[4:])
    if method == "lda":
        return DiscriminantAnalysis("linear")
    if method == "qda":
        return DiscriminantAnalysis("quadratic")
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class FoldPlan:
    fold_count: int
    fold_of: dict

    def folds(self) -> list[list]:
        out = [[] for _ in range(self.fold_count)]
        for group, f in self.fold_of.items():
            out[f].append(group)
        return out

    def assign(self, groups) -> np.ndarray:
        """Fold number for each row given its group key."""
        return np.array([self.fold_of[g] for g in groups], dtype=np.int64)

    def splits(self, groups):
        """``(train_mask, test_mask)`` per fold for rows labelled by ``groups``."""
        fold = self.assign(groups)
        for f in range(self.fold_count):
            test = fold == f
            yield ~test, test


def make_fold_plan(groups, fold_count: int, seed: int = 0) -> FoldPlan:
    """Randomly partition distinct group keys into ``fold_count`` folds.

    Fold sizes differ by at most one; the plan depends only on the sorted
    keys and ``seed``.
    """
    if fold_count not in FOLD_COUNTS:
        raise ValueError(f"fold_count must be one of {FOLD_COUNTS}")
    keys = sorted(set(groups))
    if len(keys) < fold_count:
        raise ValueError(f"{len(keys)} groups cannot fill {fold_count} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(keys))
    fold_of = {keys[i]: int(pos % fold_count) for pos, i in enumerate(perm)}
    return FoldPlan(fold_count, fold_of)


def play_keys(df: pd.DataFrame) -> list:
    return list(zip(df["game_id"].astype(int), df["play_id"].astype(int)))


def cross_val_predict(method, X, y, groups, plan: FoldPlan, seed: int = 0, **params):
    """Out-of-fold probabilities plus per-fold AUCs."""
    y = np.asarray(y)
    pred = np.full(len(y), np.nan)
    fold_auc = []
    for f, (train, test) in enumerate(plan.splits(groups)):
        if not test.any():
            continue
        model = make_model(method, seed=seed + f, **params)
        model.fit(X[train] if not hasattr(X, "iloc") else X.loc[train], y[train])
        p = model.predict_proba(X[test] if not hasattr(X, "iloc") else X.loc[test])
        pred[test] = p
        if 0 < y[test].sum() < test.sum():
            fold_auc.append(auc_trapezoid(p, y[test]))
    return pred, fold_auc


@dataclass
class EvalReport:
    table: pd.DataFrame
    roc: pd.DataFrame
    errors: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)


def run_benchmark(X, y, groups, methods=tuple(METHODS), fold_counts=(10,), seed: int = 0,
                  **params) -> EvalReport:
    """Cross-validated AUC and wall time per method and fold count.

    ``auc`` is the AUC of the pooled out-of-fold predictions; ``fold_auc``
    the mean over folds. A failing cell is recorded and the run continues.
    """
    X = X.reset_index(drop=True) if hasattr(X, "reset_index") else np.asarray(X)
    y = np.asarray(y)
    rows, roc_rows, errors, preds = [], [], {}, {}
    for k in fold_counts:
        plan = make_fold_plan(groups, k, seed)
        for method in methods:
            start = time.perf_counter()
            try:
                pred, fold_auc = cross_val_predict(method, X, y, groups, plan, seed, **params)
            except Exception as exc:  # noqa: BLE001 - cell failures are reported, not raised
                log.warning("%s with %d folds failed: %s", method, k, exc)
                errors[(method, k)] = repr(exc)
                rows.append({"method": METHODS.get(method, method), "key": method, "folds": k,
                             "auc": np.nan, "fold_auc": np.nan, "accuracy": np.nan,
                             "seconds": time.perf_counter() - start, "error": repr(exc)})
                continue
            elapsed = time.perf_counter() - start
            preds[(method, k)] = pred
            fpr, tpr, thr = roc_curve(pred, y)
            roc_rows.append(pd.DataFrame({"method": method, "folds": k, "fpr": fpr, "tpr": tpr,
                                          "threshold": thr}))
            rows.append({
                "method": METHODS.get(method, method),
                "key": method,
                "folds": k,
                "auc": auc_trapezoid(pred, y),
                "fold_auc": float(np.mean(fold_auc)) if fold_auc else np.nan,
                "accuracy": float(np.mean((pred >= 0.5) == (y == 1))),
                "seconds": elapsed,
                "error": "",
            })
    table = pd.DataFrame(rows).sort_values(["auc", "folds"], ascending=[False, False],
                                           kind="mergesort", na_position="last")
    roc = pd.concat(roc_rows, ignore_index=True) if roc_rows else pd.DataFrame()
    return EvalReport(table.reset_index(drop=True), roc, errors, preds)
