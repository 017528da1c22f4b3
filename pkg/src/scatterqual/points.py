from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite configuration of points in R^d, stored as an (n, d) array.

    Duplicates are allowed; ``has_duplicates`` flags them.  ``info`` carries
    provenance such as the rejection-sampling acceptance rate.
    """

    points: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InputError(f"points must be an (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("point set contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    @property
    def has_duplicates(self) -> bool:
        if self.n < 2:
            return False
        return np.unique(self.points, axis=0).shape[0] < self.n

    def lexsorted(self) -> np.ndarray:
        """Indices that sort the points lexicographically (first coordinate major)."""
        return np.lexsort(self.points.T[::-1])


def as_points(P) -> np.ndarray:
    """Coerce a PointSet or array-like into a float (n, d) array."""
    if isinstance(P, PointSet):
        return P.points
    return PointSet(P).points
