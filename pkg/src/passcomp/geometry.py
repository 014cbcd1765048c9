"""Distance kernels on the field plane.

All inputs are in yards. Functions accept single points as ``(x, y)`` pairs or
arrays of shape ``(..., 2)`` and broadcast like numpy.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Point2(NamedTuple):
    x: float
    y: float


class DegenerateLineError(ValueError):
    """Raised when the two points defining a line coincide."""


def _xy(p):
    a = np.asarray(p, dtype=np.float64)
    return a[..., 0], a[..., 1]


def point_to_line_distance(p0, p1, p2):
    """Distance from ``p0`` to the infinite line through ``p1`` and ``p2``.

    The numerator is the magnitude of the cross product between the line
    direction and the offset from ``p0`` to ``p1``; dividing by the direction
    length projects that offset onto the unit normal.

    Raises:
        DegenerateLineError: if ``p1`` and ``p2`` coincide anywhere.
    """
    x0, y0 = _xy(p0)
    x1, y1 = _xy(p1)
    x2, y2 = _xy(p2)
    dx = x2 - x1
    dy = y2 - y1
    norm = np.hypot(dx, dy)
    if np.any(norm == 0.0):
        raise DegenerateLineError("line points coincide")
    d = np.abs(dx * (y1 - y0) - (x1 - x0) * dy) / norm
    return float(d) if np.ndim(d) == 0 else d


def euclidean(p0, p1):
    x0, y0 = _xy(p0)
    x1, y1 = _xy(p1)
    d = np.hypot(x1 - x0, y1 - y0)
    return float(d) if np.ndim(d) == 0 else d


def frame_delta(h_now, h_prev):
    """Change in a distance between consecutive frames (negative = closing)."""
    return np.subtract(h_now, h_prev)
