import warnings

import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm

from passcomp.classifiers.glm import (
    BinomialGLM, GLMConvergenceError, SeparationWarning, irls, train_glm,
)
from passcomp.classifiers.metrics import auc_trapezoid

SM_LINKS = {
    "logit": sm.families.links.Logit(),
    "probit": sm.families.links.Probit(),
    "cloglog": sm.families.links.CLogLog(),
}


def design(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    g = rng.choice(list("pqr"), size=n)
    eta = -0.3 + 0.8 * x[:, 0] - 0.5 * x[:, 1] + 0.6 * (g == "q")
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
    X = pd.DataFrame(x, columns=["a", "b", "c"])
    X["g"] = pd.Categorical(g, categories=list("pqr"))
    return X, y


@pytest.mark.parametrize("link", ["logit", "probit", "cloglog"])
def test_matches_statsmodels(link):
    X, y = design(seed=1)
    model = BinomialGLM(link, tol=1e-14).fit(X, y)
    Xd = np.column_stack([np.ones(len(X)), X[["a", "b", "c"]].to_numpy(),
                          (X["g"] == "q").to_numpy(float), (X["g"] == "r").to_numpy(float)])
    ref = sm.GLM(y, Xd, family=sm.families.Binomial(link=SM_LINKS[link])).fit(tol=1e-12)
    np.testing.assert_allclose(model.coef_, ref.params, atol=1e-6)
    np.testing.assert_allclose(model.predict_proba(X), ref.predict(Xd), atol=1e-7)
    # the default stopping rule lands close to the same optimum
    np.testing.assert_allclose(train_glm(X, y, link).coef_, ref.params, atol=1e-3)


def test_intercept_only_base_rate():
    y = np.array([1] * 30 + [0] * 70)
    beta, _ = irls(np.ones((100, 1)), y, "logit")
    assert 1 / (1 + np.exp(-beta[0])) == pytest.approx(0.30, abs=1e-10)


def test_balanced_symmetric_intercept_zero():
    x = np.linspace(-2, 2, 40)
    X = pd.DataFrame({"x": np.r_[x, x]})
    y = np.r_[(x > 0).astype(int), (x < 0).astype(int)]
    model = train_glm(X, y, "logit")
    assert abs(model.coef_[0]) < 1e-6


@pytest.mark.parametrize("link", ["logit", "probit", "cloglog"])
def test_separation_warns_and_ranks_perfectly(link):
    rng = np.random.default_rng(2)
    flag = rng.integers(0, 2, size=120)
    X = pd.DataFrame({"flag": flag.astype(float), "noise": rng.normal(size=120)})
    with pytest.warns(SeparationWarning):
        model = train_glm(X.iloc[:80], flag[:80], link)
    assert np.abs(model.coef_).max() <= 50.0 + 1e-9
    assert auc_trapezoid(model.predict_proba(X.iloc[80:]), flag[80:]) == 1.0


def test_non_convergence_carries_trajectory():
    X, y = design(seed=3)
    Xd = np.column_stack([np.ones(len(X)), X[["a", "b", "c"]].to_numpy()])
    with pytest.raises(GLMConvergenceError) as err:
        irls(Xd, y, "logit", tol=0.0, max_iter=3)
    assert len(err.value.deviances) == 4


def test_deviance_decreases():
    X, y = design(seed=4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = BinomialGLM("probit").fit(X, y)
    d = np.asarray(model.deviances_)
    assert np.all(np.diff(d[1:]) <= 1e-9 * d[1:-1])


def test_separation_stall_is_not_a_convergence_failure():
    rng = np.random.default_rng(5)
    flag = rng.integers(0, 2, size=60).astype(float)
    Xd = np.column_stack([np.ones(60), flag, rng.normal(size=60)])
    with pytest.warns(SeparationWarning):
        beta, dev = irls(Xd, flag, "cloglog", tol=0.0, max_iter=40)
    assert len(dev) == 41 and np.abs(beta).max() <= 50.0 + 1e-9
