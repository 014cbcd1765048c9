"""Turning feature tables into numeric designs.

Trees consume categorical columns as integer level codes; the linear and
discriminant models use drop-first indicator columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    levels: tuple | None = None

    @property
    def categorical(self) -> bool:
        return self.levels is not None


def infer_columns(X, names=None) -> list[ColumnSpec]:
    """Column specs from a DataFrame (categorical dtype = factor) or array."""
    if isinstance(X, pd.DataFrame):
        specs = []
        for c in X.columns:
            dtype = X[c].dtype
            if isinstance(dtype, pd.CategoricalDtype):
                specs.append(ColumnSpec(str(c), tuple(dtype.categories.tolist())))
            else:
                specs.append(ColumnSpec(str(c)))
        return specs
    X = np.asarray(X)
    names = names or [f"x{i}" for i in range(X.shape[1])]
    return [ColumnSpec(n) for n in names]


def level_codes(X, columns: list[ColumnSpec]) -> np.ndarray:
    """Float matrix with categorical columns replaced by level codes."""
    if not isinstance(X, pd.DataFrame):
        return np.asarray(X, dtype=np.float64)
    out = np.empty((len(X), len(columns)), dtype=np.float64)
    for j, spec in enumerate(columns):
        col = X[spec.name]
        if spec.categorical:
            codes = pd.Categorical(col, categories=list(spec.levels)).codes
            if (codes < 0).any():
                bad = sorted(set(col[codes < 0].astype(str)))
                raise ValueError(f"{spec.name}: values outside declared levels {bad}")
            out[:, j] = codes
        else:
            out[:, j] = pd.to_numeric(col).to_numpy(dtype=np.float64)
    return out


def indicator_design(X, columns: list[ColumnSpec]) -> tuple[np.ndarray, list[str]]:
    """Numeric columns plus drop-first indicators for each factor."""
    codes = level_codes(X, columns)
    blocks, names = [], []
    for j, spec in enumerate(columns):
        if spec.categorical:
            for li, level in enumerate(spec.levels[1:], start=1):
                blocks.append((codes[:, j] == li).astype(np.float64))
                names.append(f"{spec.name}={level}")
        else:
            blocks.append(codes[:, j])
            names.append(spec.name)
    design = np.column_stack(blocks) if blocks else np.empty((len(codes), 0))
    return design, names
