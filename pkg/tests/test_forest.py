import json
import warnings

import numpy as np
import pandas as pd
import pytest

from passcomp.classifiers.forest import ForestModel, train_random_forest
from passcomp.classifiers.metrics import auc_trapezoid


def threshold_data(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = pd.DataFrame(rng.normal(size=(n, 6)), columns=[f"x{i}" for i in range(6)])
    X["grp"] = pd.Categorical(rng.choice(list("abc"), size=n), categories=list("abc"))
    y = (X["x2"] > 0.3).astype(int).to_numpy()
    return X, y


def test_separable_training_auc_is_one():
    X, y = threshold_data()
    model = train_random_forest(X, y, mtry=5, n_trees=30, seed=1)
    assert auc_trapezoid(model.predict_proba(X), y) == 1.0


def test_prediction_is_mean_of_tree_leaves():
    X, y = threshold_data(seed=3)
    model = train_random_forest(X, y, mtry=5, n_trees=25, seed=4)
    leaves = model.tree_predictions(X)
    assert leaves.shape == (25, len(X))
    assert np.all((leaves >= 0) & (leaves <= 1))
    np.testing.assert_array_equal(model.predict_proba(X), leaves.mean(axis=0))


def test_categorical_subset_split():
    rng = np.random.default_rng(5)
    cats = list("abcdef")
    g = rng.choice(cats, size=400)
    X = pd.DataFrame({"g": pd.Categorical(g, categories=cats), "noise": rng.normal(size=400)})
    y = np.isin(g, ["b", "e", "f"]).astype(int)
    model = train_random_forest(X, y, mtry=5, n_trees=10, seed=0)
    assert auc_trapezoid(model.predict_proba(X), y) == 1.0


def test_json_round_trip_bit_exact(tmp_path):
    X, y = threshold_data(seed=6)
    model = train_random_forest(X, y, mtry=5, n_trees=15, seed=7)
    path = tmp_path / "forest.json"
    model.save(path)
    back = ForestModel.load(path)
    assert back.predict_proba(X).tobytes() == model.predict_proba(X).tobytes()
    doc = json.loads(path.read_text())
    assert doc["seed"] == 7 and doc["schema_version"] == "1"


def test_constant_labels_warn():
    X, _ = threshold_data(n=50)
    with pytest.warns(RuntimeWarning, match="constant"):
        model = train_random_forest(X, np.ones(50), mtry=5, n_trees=5)
    np.testing.assert_array_equal(model.predict_proba(X), 1.0)


@pytest.mark.parametrize("mtry", [4, 21])
def test_mtry_range_enforced(mtry):
    X, y = threshold_data(n=50)
    with pytest.raises(ValueError, match="mtry"):
        train_random_forest(X, y, mtry=mtry, n_trees=2)


def test_deterministic_across_thread_counts():
    X, y = threshold_data(seed=8)
    y = np.where(np.random.default_rng(1).random(len(y)) < 0.15, 1 - y, y)
    a = train_random_forest(X, y, mtry=5, n_trees=20, seed=11, n_jobs=1)
    b = train_random_forest(X, y, mtry=5, n_trees=20, seed=11, n_jobs=4)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    c = train_random_forest(X, y, mtry=5, n_trees=20, seed=12)
    assert json.dumps(a.to_json()) != json.dumps(c.to_json())


def test_out_of_bag_estimate_present():
    X, y = threshold_data(seed=9)
    model = train_random_forest(X, y, mtry=5, n_trees=40, seed=0)
    assert 0.9 <= model.oob_auc <= 1.0
    assert 0.0 <= model.oob_error <= 0.1
