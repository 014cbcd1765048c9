"""Binomial regression fitted by iteratively reweighted least squares."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import special

from .encoding import indicator_design, infer_columns

LINKS = ("logit", "probit", "cloglog")
_EPS = 1e-10
_MAX_ETA = 30.0
COEF_CAP = 50.0
# fitted probabilities this close to 0 or 1 signal separation
_SEP_TOL = 1e-6


class GLMConvergenceError(RuntimeError):
    def __init__(self, deviances):
        super().__init__(f"IRLS did not converge; deviance trajectory {list(deviances)}")
        self.deviances = list(deviances)


class SeparationWarning(RuntimeWarning):
    pass


def _linkinv(eta, link):
    if link == "logit":
        return special.expit(eta)
    if link == "probit":
        return special.ndtr(eta)
    return -np.expm1(-np.exp(eta))


def _mu_eta(eta, link):
    """d mu / d eta."""
    if link == "logit":
        m = special.expit(eta)
        return m * (1.0 - m)
    if link == "probit":
        return np.exp(-0.5 * eta * eta) / np.sqrt(2.0 * np.pi)
    return np.exp(eta - np.exp(eta))


def _link(mu, link):
    if link == "logit":
        return special.logit(mu)
    if link == "probit":
        return special.ndtri(mu)
    return np.log(-np.log1p(-mu))


def binomial_deviance(y, mu) -> float:
    mu = np.clip(mu, _EPS, 1 - _EPS)
    return float(-2.0 * np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu)))


def irls(X, y, link: str = "logit", tol: float = 1e-8, max_iter: int = 50):
    """Fit coefficients for ``y ~ X`` (``X`` includes any intercept column).

    Convergence is ``|dev - dev_old| / (|dev| + 0.1) < tol``. Rank-deficient
    designs get the minimum-norm least-squares step. Under complete or
    quasi-complete separation the coefficient vector is rescaled so its
    largest entry is ``COEF_CAP`` and a :class:`SeparationWarning` is issued.

    Returns:
        ``(beta, deviance_trajectory)``.

    Raises:
        GLMConvergenceError: after ``max_iter`` iterations without convergence,
            unless the stall is explained by separation.
    """
    if link not in LINKS:
        raise ValueError(f"unknown link {link!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mu = (y + 0.5) / 2.0
    eta = _link(mu, link)
    dev = binomial_deviance(y, mu)
    trajectory = [dev]
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        d = _mu_eta(eta, link)
        var = mu * (1.0 - mu)
        ok = (d > _EPS) & (var > _EPS)
        z = eta + (y - mu) / np.where(ok, d, 1.0)
        w = np.where(ok, d * d / np.where(ok, var, 1.0), 0.0)
        sw = np.sqrt(w)
        beta_old = beta
        beta, *_ = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)
        dev_old = dev
        # halve the step while the deviance goes up
        for _halving in range(30):
            eta = np.clip(X @ beta, -_MAX_ETA, _MAX_ETA)
            mu = np.clip(_linkinv(eta, link), _EPS, 1 - _EPS)
            dev = binomial_deviance(y, mu)
            if len(trajectory) == 1 or dev <= dev_old * (1 + 1e-12):
                break
            beta = 0.5 * (beta + beta_old)
        trajectory.append(dev)
        if abs(dev - dev_old) / (abs(dev) + 0.1) < tol:
            converged = True
            break
    else:
        converged = False

    fitted = _linkinv(np.clip(X @ beta, -_MAX_ETA, _MAX_ETA), link)
    extreme = np.any((fitted < _SEP_TOL) | (fitted > 1 - _SEP_TOL))
    # a deviance still creeping down toward 0/1 fits is separation, not failure
    tail = np.asarray(trajectory[1:])
    creeping = np.all(np.diff(tail) <= 1e-6 * tail[:-1])
    if not converged and not (extreme and creeping):
        raise GLMConvergenceError(trajectory)
    if extreme or np.any(np.abs(X @ beta) >= _MAX_ETA) or np.abs(beta).max() > COEF_CAP:
        warnings.warn("fitted probabilities at 0 or 1: separation detected, coefficients capped",
                      SeparationWarning)
        peak = np.abs(beta).max()
        if peak > COEF_CAP:
            beta = beta * (COEF_CAP / peak)
    return beta, trajectory


class BinomialGLM:
    """Binomial regression on numeric predictors plus factor indicators."""

    def __init__(self, link: str = "logit", tol: float = 1e-8, max_iter: int = 50):
        if link not in LINKS:
            raise ValueError(f"unknown link {link!r}")
        self.link = link
        self.tol = tol
        self.max_iter = max_iter

    def _design(self, X):
        design, _ = indicator_design(X, self.columns_)
        return np.column_stack([np.ones(len(design)), design])

    def fit(self, X, y):
        self.columns_ = infer_columns(X)
        _, names = indicator_design(X.iloc[:1] if hasattr(X, "iloc") else np.asarray(X)[:1],
                                    self.columns_)
        self.names_ = ["(intercept)"] + names
        self.coef_, self.deviances_ = irls(self._design(X), y, self.link, self.tol, self.max_iter)
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._design(X) @ self.coef_

    def predict_proba(self, X) -> np.ndarray:
        return _linkinv(self.decision_function(X), self.link)


def train_glm(X, y, link: str = "logit") -> BinomialGLM:
    return BinomialGLM(link).fit(X, y)
