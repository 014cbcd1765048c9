"""Random forest classifier for binary outcomes.

Bagged, fully grown Gini trees. At each node ``mtry`` predictors are drawn
without replacement; numeric predictors split on a threshold and factors on
a subset of levels (the optimal subset for a binary response is a prefix of
the levels ordered by their positive fraction). A node with no improving
split among its drawn predictors becomes a leaf.

Every tree gets its own counter-based stream (Philox for the bootstrap,
SplitMix64 for predictor draws) derived from one seed, so trees can be built
in any order or in parallel with identical results.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from numba import njit

from .. import SCHEMA_VERSION
from ..ingest import SchemaError
from .encoding import ColumnSpec, infer_columns, level_codes
from .metrics import auc_trapezoid

log = logging.getLogger(__name__)

MTRY_RANGE = (5, 20)
MAX_LEVELS = 62
_PREDICT_CHUNK = 8192

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@njit(nogil=True, cache=True)
def _next_u64(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(nogil=True, cache=True)
def _randbelow(state, n):
    return np.int64(_next_u64(state) % np.uint64(n))


@njit(nogil=True, cache=True)
def _grow_tree(X, y, is_cat, n_levels, mtry, seed):
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    catmask = np.zeros(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    state = np.empty(1, np.uint64)
    state[0] = seed
    idx = np.arange(n)
    feats = np.arange(p)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    sp = 1
    n_nodes = 1
    cnt_l = np.zeros(MAX_LEVELS + 2)
    pos_l = np.zeros(MAX_LEVELS + 2)
    vals = np.empty(n)
    ys = np.empty(n)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        cnt = hi - lo
        pos = 0.0
        for i in range(lo, hi):
            pos += y[idx[i]]
        value[node] = pos / cnt
        if cnt < 2 or pos == 0.0 or pos == cnt:
            continue
        neg = cnt - pos
        best = (pos * pos + neg * neg) / cnt
        best_f = -1
        best_thr = 0.0
        best_mask = np.int64(0)

        for k in range(mtry):
            j = k + _randbelow(state, p - k)
            tmp = feats[k]
            feats[k] = feats[j]
            feats[j] = tmp
            f = feats[k]
            if is_cat[f]:
                nl = n_levels[f]
                for l in range(nl):
                    cnt_l[l] = 0.0
                    pos_l[l] = 0.0
                for i in range(lo, hi):
                    l = np.int64(X[idx[i], f])
                    cnt_l[l] += 1.0
                    pos_l[l] += y[idx[i]]
                present = np.empty(nl, np.int64)
                frac = np.empty(nl)
                m = 0
                for l in range(nl):
                    if cnt_l[l] > 0:
                        present[m] = l
                        frac[m] = pos_l[l] / cnt_l[l]
                        m += 1
                if m < 2:
                    continue
                order = np.argsort(frac[:m], kind="mergesort")
                lc = 0.0
                lp = 0.0
                mask = np.int64(0)
                for q in range(m - 1):
                    l = present[order[q]]
                    lc += cnt_l[l]
                    lp += pos_l[l]
                    mask |= np.int64(1) << l
                    rc = cnt - lc
                    rp = pos - lp
                    ln = lc - lp
                    rn = rc - rp
                    score = (lp * lp + ln * ln) / lc + (rp * rp + rn * rn) / rc
                    if score > best:
                        best = score
                        best_f = f
                        best_mask = mask
            else:
                for i in range(cnt):
                    vals[i] = X[idx[lo + i], f]
                    ys[i] = y[idx[lo + i]]
                order = np.argsort(vals[:cnt], kind="mergesort")
                lp = 0.0
                for q in range(cnt - 1):
                    lp += ys[order[q]]
                    a = vals[order[q]]
                    b = vals[order[q + 1]]
                    if not a < b:
                        continue
                    lc = q + 1.0
                    rc = cnt - lc
                    rp = pos - lp
                    ln = lc - lp
                    rn = rc - rp
                    score = (lp * lp + ln * ln) / lc + (rp * rp + rn * rn) / rc
                    if score > best:
                        best = score
                        best_f = f
                        thr = 0.5 * (a + b)
                        if not thr < b:
                            thr = a
                        best_thr = thr

        if best_f < 0:
            continue

        # partition idx[lo:hi] so that left-going rows come first
        i = lo
        jx = hi - 1
        while i <= jx:
            row = idx[i]
            if is_cat[best_f]:
                goes_left = (best_mask >> np.int64(X[row, best_f])) & 1
            else:
                goes_left = 1 if X[row, best_f] <= best_thr else 0
            if goes_left != 0:
                i += 1
            else:
                idx[i] = idx[jx]
                idx[jx] = row
                jx -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        catmask[node] = best_mask
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        st_node[sp] = right[node]
        st_lo[sp] = i
        st_hi[sp] = hi
        sp += 1
        st_node[sp] = left[node]
        st_lo[sp] = lo
        st_hi[sp] = i
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), catmask[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(nogil=True, cache=True)
def _predict_tree(X, is_cat, feature, threshold, catmask, left, right, value, out):
    for i in range(X.shape[0]):
        node = 0
        while left[node] >= 0:
            f = feature[node]
            if is_cat[f]:
                go = (catmask[node] >> np.int64(X[i, f])) & 1
            else:
                go = 1 if X[i, f] <= threshold[node] else 0
            node = left[node] if go != 0 else right[node]
        out[i] = value[node]


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    catmask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, codes: np.ndarray, is_cat: np.ndarray) -> np.ndarray:
        out = np.empty(codes.shape[0])
        _predict_tree(codes, is_cat, self.feature, self.threshold, self.catmask,
                      self.left, self.right, self.value, out)
        return out

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "catmask": self.catmask.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["catmask"], dtype=np.int64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


def tree_streams(seed: int, n_trees: int):
    """Per-tree ``(bootstrap generator, split seed)`` pairs."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        split_seed = np.uint64(child.generate_state(1, np.uint64)[0])
        out.append((np.random.Generator(np.random.Philox(child)), split_seed))
    return out


def _fit_one(codes, y, is_cat, n_levels, mtry, stream):
    rng, split_seed = stream
    n = len(y)
    boot = rng.integers(0, n, n)
    arrays = _grow_tree(codes[boot], y[boot], is_cat, n_levels, mtry, split_seed)
    counts = np.bincount(boot, minlength=n)
    return Tree(*arrays), counts == 0


@dataclass
class ForestModel:
    """Trained forest; ``predict_proba`` returns P(positive class)."""

    columns: list
    trees: list = field(default_factory=list)
    mtry: int = 15
    n_trees: int = 500
    seed: int = 0
    constant: float | None = None
    oob_auc: float | None = None
    oob_error: float | None = None

    @property
    def is_cat(self) -> np.ndarray:
        return np.array([c.categorical for c in self.columns], dtype=np.bool_)

    def tree_predictions(self, X) -> np.ndarray:
        """Leaf fractions, shape ``(n_trees, n_rows)``."""
        codes = level_codes(X, self.columns)
        is_cat = self.is_cat
        return np.stack([t.predict(codes, is_cat) for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        codes = level_codes(X, self.columns)
        if self.constant is not None:
            return np.full(len(codes), self.constant)
        is_cat = self.is_cat
        out = np.empty(len(codes))
        for lo in range(0, len(codes), _PREDICT_CHUNK):
            block = codes[lo: lo + _PREDICT_CHUNK]
            out[lo: lo + len(block)] = np.mean(
                np.stack([t.predict(block, is_cat) for t in self.trees]), axis=0
            )
        return out

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "forest_model",
            "seed": self.seed,
            "mtry": self.mtry,
            "n_trees": self.n_trees,
            "constant": self.constant,
            "oob_auc": self.oob_auc,
            "oob_error": self.oob_error,
            "columns": [{"name": c.name, "levels": None if c.levels is None else list(c.levels)}
                        for c in self.columns],
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ForestModel":
        if d.get("kind") != "forest_model":
            raise SchemaError(f"expected a forest_model artifact, found {d.get('kind')!r}")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"forest_model schema version mismatch: artifact has {d.get('schema_version')!r}, "
                f"this build expects {SCHEMA_VERSION!r}"
            )
        columns = [ColumnSpec(c["name"], None if c["levels"] is None else tuple(c["levels"]))
                   for c in d["columns"]]
        return cls(
            columns=columns,
            trees=[Tree.from_json(t) for t in d["trees"]],
            mtry=d["mtry"],
            n_trees=d["n_trees"],
            seed=d["seed"],
            constant=d["constant"],
            oob_auc=d["oob_auc"],
            oob_error=d["oob_error"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def train_random_forest(X, y, mtry: int = 15, n_trees: int = 500, seed: int = 0,
                        n_jobs: int = 1, oob: bool = True) -> ForestModel:
    """Fit a forest on ``X`` (DataFrame with categorical dtypes, or array).

    ``mtry`` must lie in [5, 20]; it is capped at the number of predictors.

    Warns and returns a constant model when ``y`` has a single class.
    """
    lo, hi = MTRY_RANGE
    if not lo <= mtry <= hi:
        raise ValueError(f"mtry must be in [{lo}, {hi}], got {mtry}")
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    columns = infer_columns(X)
    codes = level_codes(X, columns)
    y = np.asarray(y, dtype=np.float64)
    if codes.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths differ")
    model = ForestModel(columns=columns, mtry=mtry, n_trees=n_trees, seed=seed)
    if np.all(y == y[0]):
        warnings.warn("constant labels; forest reduces to a constant prediction", RuntimeWarning)
        model.constant = float(y[0])
        return model
    for c in columns:
        if c.categorical and len(c.levels) > MAX_LEVELS:
            raise ValueError(f"{c.name}: more than {MAX_LEVELS} levels")

    is_cat = np.array([c.categorical for c in columns], dtype=np.bool_)
    n_levels = np.array([len(c.levels) if c.categorical else 0 for c in columns], dtype=np.int64)
    m = min(mtry, codes.shape[1])
    streams = tree_streams(seed, n_trees)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_fit_one)(codes, y, is_cat, n_levels, m, s) for s in streams
    )
    model.trees = [t for t, _ in results]

    if oob:
        total = np.zeros(len(y))
        seen = np.zeros(len(y))
        for tree, out_of_bag in results:
            if out_of_bag.any():
                total[out_of_bag] += tree.predict(codes[out_of_bag], is_cat)
                seen[out_of_bag] += 1
        ok = seen > 0
        if ok.any():
            prob = total[ok] / seen[ok]
            model.oob_error = float(np.mean((prob >= 0.5) != (y[ok] == 1)))
            if 0 < y[ok].sum() < ok.sum():
                model.oob_auc = auc_trapezoid(prob, y[ok])
    return model


class RandomForestClassifier:
    """Thin estimator wrapper used by the benchmark runner."""

    def __init__(self, mtry=15, n_trees=500, seed=0, n_jobs=1):
        self.mtry = mtry
        self.n_trees = n_trees
        self.seed = seed
        self.n_jobs = n_jobs
        self.model_: ForestModel | None = None

    def fit(self, X, y):
        self.model_ = train_random_forest(X, y, self.mtry, self.n_trees, self.seed,
                                          self.n_jobs, oob=False)
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self.model_.predict_proba(X)
