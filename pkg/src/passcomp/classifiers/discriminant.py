"""Gaussian linear and quadratic discriminant analysis (two classes)."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .encoding import indicator_design, infer_columns

RIDGE = 1e-6


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


def _cholesky(cov, names):
    if not np.all(np.isfinite(cov)):
        bad = [n for n, row in zip(names, cov) if not np.all(np.isfinite(row))]
        raise SingularCovarianceError(f"covariance not finite; check {bad}")
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.cholesky(cov + RIDGE * np.eye(len(cov)), lower=True)
    except linalg.LinAlgError:
        diag = np.diag(cov)
        bad = [n for n, v in zip(names, diag) if not v > 0]
        raise SingularCovarianceError(f"covariance singular after ridge; check {bad or names}")


def _log_density(Z, mean, chol):
    diff = linalg.solve_triangular(chol, (Z - mean).T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (np.sum(diff * diff, axis=0) + logdet)


class DiscriminantAnalysis:
    """Class-conditional Gaussians with shared (linear) or per-class
    (quadratic) covariance, fitted on the standardized indicator design.

    ``predict_proba`` returns the posterior probability of class 1 with
    priors equal to the training class proportions.
    """

    def __init__(self, kind: str = "linear"):
        if kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown kind {kind!r}")
        self.kind = kind

    def _design(self, X):
        design, _ = indicator_design(X, self.columns_)
        return (design - self.center_) / self.scale_

    def fit(self, X, y):
        self.columns_ = infer_columns(X)
        design, self.names_ = indicator_design(X, self.columns_)
        y = np.asarray(y).astype(bool)
        if y.all() or not y.any():
            raise ValueError("discriminant analysis needs both classes")
        self.center_ = design.mean(axis=0)
        scale = design.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (design - self.center_) / self.scale_
        groups = [Z[~y], Z[y]]
        self.means_ = [g.mean(axis=0) for g in groups]
        self.log_priors_ = np.log([len(g) / len(Z) for g in groups])
        if self.kind == "linear":
            resid = np.vstack([g - m for g, m in zip(groups, self.means_)])
            pooled = resid.T @ resid / max(len(Z) - 2, 1)
            chol = _cholesky(pooled, self.names_)
            self.chols_ = [chol, chol]
        else:
            self.chols_ = [
                _cholesky(np.cov(g, rowvar=False, ddof=1).reshape(Z.shape[1], Z.shape[1]),
                          self.names_)
                for g in groups
            ]
        return self

    def predict_proba(self, X) -> np.ndarray:
        Z = self._design(X)
        scores = np.stack([
            _log_density(Z, m, c) + lp
            for m, c, lp in zip(self.means_, self.chols_, self.log_priors_)
        ])
        return np.exp(scores[1] - np.logaddexp(scores[0], scores[1]))


def train_discriminant(X, y, kind: str = "linear") -> DiscriminantAnalysis:
    return DiscriminantAnalysis(kind).fit(X, y)
