"""Shared domain types."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Lane3D:
    """One lane: ordered road-frame polyline with strictly increasing y."""

    points: np.ndarray  # (N, 3) meters
    category: int | None = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 2:
            raise ValueError(f"lane needs (N>=2, 3) points, got {p.shape}")
        if not np.isfinite(p).all():
            raise ValueError("lane contains non-finite coordinates")
        if not (np.diff(p[:, 1]) > 0).all():
            raise ValueError("lane y-coordinates must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def y_span(self):
        return float(self.points[0, 1]), float(self.points[-1, 1])

    def x_at(self, ys):
        return np.interp(ys, self.points[:, 1], self.points[:, 0])

    def z_at(self, ys):
        return np.interp(ys, self.points[:, 1], self.points[:, 2])
