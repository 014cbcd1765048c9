"""Completion models: random forest, binomial GLMs and discriminant analysis."""

from .discriminant import DiscriminantAnalysis, train_discriminant
from .forest import ForestModel, RandomForestClassifier, train_random_forest
from .glm import BinomialGLM, train_glm
from .metrics import auc_trapezoid, roc_curve
from .validation import (
    METHODS, EvalReport, FoldPlan, cross_val_predict, make_fold_plan, make_model, run_benchmark,
)

__all__ = [
    "DiscriminantAnalysis", "train_discriminant", "ForestModel", "RandomForestClassifier",
    "train_random_forest", "BinomialGLM", "train_glm", "auc_trapezoid", "roc_curve", "METHODS",
    "EvalReport", "FoldPlan", "cross_val_predict", "make_fold_plan", "make_model", "run_benchmark",
]
