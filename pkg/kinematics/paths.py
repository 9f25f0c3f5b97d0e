# kinematics/paths.py
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class Path:
    """
    Lane centerline as a metric polyline. Arc-length lookups past either end
    extrapolate along the first/last segment.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("Path needs at least two (x, y) points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("Path points must be finite")
        # drop repeated vertices so every segment has a direction
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.hypot(*np.diff(pts, axis=0).T) > 1e-9
        pts = pts[keep]
        if len(pts) < 2:
            raise ValueError("Path collapses to a single point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points) -> "Path":
        return cls(np.asarray(points, dtype=float))

    @cached_property
    def _segments(self):
        deltas = np.diff(self.points, axis=0)
        lengths = np.hypot(deltas[:, 0], deltas[:, 1])
        units = deltas / lengths[:, None]
        headings = np.arctan2(deltas[:, 1], deltas[:, 0])
        cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        return deltas, lengths, units, headings, cumulative

    @property
    def length(self) -> float:
        return float(self._segments[4][-1])

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Arc length of the closest path point and the signed lateral offset (left positive)."""
        deltas, lengths, units, _, cumulative = self._segments
        rel = np.array([x, y]) - self.points[:-1]
        along = np.einsum("ij,ij->i", rel, units)
        lo = np.zeros_like(along)
        hi = lengths.copy()
        lo[0] = -np.inf
        hi[-1] = np.inf
        along = np.clip(along, lo, hi)
        foot = self.points[:-1] + units * along[:, None]
        dist = np.hypot(x - foot[:, 0], y - foot[:, 1])
        idx = int(np.argmin(dist))
        cross = units[idx, 0] * rel[idx, 1] - units[idx, 1] * rel[idx, 0]
        offset = float(np.copysign(dist[idx], cross)) if dist[idx] > 0 else 0.0
        return float(cumulative[idx] + along[idx]), offset

    def locate(self, s):
        """Vectorized (x, y, heading) at arc lengths ``s``."""
        _, _, units, headings, cumulative = self._segments
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(cumulative, s, side="right") - 1, 0, len(units) - 1)
        local = s - cumulative[idx]
        xy = self.points[idx] + units[idx] * local[..., None]
        return xy[..., 0], xy[..., 1], headings[idx]

    def normal_at(self, s):
        _, _, units, _, cumulative = self._segments
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(cumulative, s, side="right") - 1, 0, len(units) - 1)
        u = units[idx]
        return np.stack([-u[..., 1], u[..., 0]], axis=-1)

    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0)) -> "Path":
        c, s = np.cos(rotation), np.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        return Path(self.points @ rot.T + np.asarray(shift, dtype=float))

    def to_list(self) -> list[list[float]]:
        return np.round(self.points, 6).tolist()
