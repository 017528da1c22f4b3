"""Bounded convex domains: axis boxes, Euclidean balls and half-space polytopes.

All domains are open.  Besides membership and volume they expose the
interior-cone parameters used by the hole and empty-ball constructions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection
from scipy.special import gamma as gamma_fn

from .errors import InputError, NumericalFailure
from .points import PointSet

INSIDE, STRADDLE, OUTSIDE = 1, 0, -1


@dataclass(frozen=True)
class ConeParameters:
    radius: float
    angle: float
    ball_factor: float


def cone_from_radius(radius, diameter):
    """Cone radius r, angle 2 arcsin(r / 2 diam) and ball factor sin/(1 + sin)."""
    theta = 2.0 * math.asin(radius / (2.0 * diameter))
    s = math.sin(theta)
    return ConeParameters(radius=radius, angle=theta, ball_factor=s / (1.0 + s))


def unit_ball_volume(d):
    return math.pi ** (d / 2) / gamma_fn(d / 2 + 1)


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    kind: str
    params: dict = field(repr=False)
    dim: int

    # -- constructors -------------------------------------------------------

    @classmethod
    def box(cls, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("box corners must be vectors of equal length")
        if not np.all(hi > lo):
            raise InputError("box must have positive side lengths")
        return cls("axis-box", {"lower": lo, "upper": hi}, lo.size)

    @classmethod
    def unit_cube(cls, d):
        return cls.box(np.zeros(d), np.ones(d))

    @classmethod
    def ball(cls, center, radius):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if radius <= 0:
            raise InputError("ball radius must be positive")
        return cls("euclidean-ball", {"center": c, "radius": float(radius)}, c.size)

    @classmethod
    def polytope(cls, normals, offsets, interior_point):
        """Open polytope {x : <a_i, x> < b_i for all i}."""
        A = np.atleast_2d(np.asarray(normals, dtype=float))
        b = np.asarray(offsets, dtype=float).ravel()
        x0 = np.atleast_1d(np.asarray(interior_point, dtype=float))
        if A.shape[0] != b.size or A.shape[1] != x0.size:
            raise InputError("half-space normals, offsets and interior point disagree in shape")
        if not np.all(A @ x0 < b):
            raise InputError("interior point does not satisfy all constraints strictly")
        dom = cls("halfspace-polytope", {"normals": A, "offsets": b, "interior": x0}, x0.size)
        dom.bounding_box  # raises for unbounded input
        return dom

    @classmethod
    def simplex(cls, d):
        """Standard simplex {x > 0, sum x < 1}."""
        A = np.vstack([-np.eye(d), np.ones((1, d))])
        b = np.concatenate([np.zeros(d), [1.0]])
        return cls.polytope(A, b, np.full(d, 1.0 / (d + 1)))

    # -- geometry -----------------------------------------------------------

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InputError(f"point dimension {x.shape[-1]} does not match domain dimension {self.dim}")
        return x

    def contains(self, x):
        """Strict membership; accepts a single point or an (m, d) array."""
        x = self._check(x)
        if self.kind == "axis-box":
            p = self.params
            return np.all((x > p["lower"]) & (x < p["upper"]), axis=-1)
        if self.kind == "euclidean-ball":
            p = self.params
            return np.sum((x - p["center"]) ** 2, axis=-1) < p["radius"] ** 2
        p = self.params
        return np.all(x @ p["normals"].T < p["offsets"], axis=-1)

    def boundary_distance(self, x):
        """Distance to the boundary for interior points; non-positive outside."""
        x = self._check(x)
        if self.kind == "axis-box":
            p = self.params
            return np.min(np.minimum(x - p["lower"], p["upper"] - x), axis=-1)
        if self.kind == "euclidean-ball":
            p = self.params
            return p["radius"] - np.linalg.norm(x - p["center"], axis=-1)
        p = self.params
        norms = np.linalg.norm(p["normals"], axis=1)
        return np.min((p["offsets"] - x @ p["normals"].T) / norms, axis=-1)

    def cell_status(self, centers, widths):
        """Classify axis-aligned cells as INSIDE (closed cell in closure of the
        domain), OUTSIDE (no overlap) or STRADDLE.  Exact for all three kinds.

        ``widths`` is either shared, shape (d,), or per cell, shape (m, d).
        """
        c = self._check(np.atleast_2d(centers))
        half = 0.5 * np.asarray(widths, dtype=float)
        status = np.full(c.shape[0], STRADDLE, dtype=np.int8)
        if self.kind == "axis-box":
            p = self.params
            inside = np.all((c - half >= p["lower"]) & (c + half <= p["upper"]), axis=1)
            outside = np.any((c + half <= p["lower"]) | (c - half >= p["upper"]), axis=1)
        elif self.kind == "euclidean-ball":
            p = self.params
            off = np.abs(c - p["center"])
            far = np.linalg.norm(off + half, axis=1)
            near = np.linalg.norm(np.maximum(off - half, 0.0), axis=1)
            inside = far <= p["radius"]
            outside = near >= p["radius"]
        else:
            p = self.params
            A, b = p["normals"], p["offsets"]
            centre_val = c @ A.T
            spread = half @ np.abs(A).T
            inside = np.all(centre_val + spread <= b, axis=1)
            outside = np.any(centre_val - spread >= b, axis=1)
        status[inside] = INSIDE
        status[outside] = OUTSIDE
        return status

    @cached_property
    def vertices(self):
        if self.kind != "halfspace-polytope":
            raise InputError("vertices are only defined for polytopes")
        p = self.params
        A, b = p["normals"], p["offsets"]
        if self.dim == 1:
            a = A[:, 0]
            lo = np.max(b[a < 0] / a[a < 0]) if np.any(a < 0) else -np.inf
            hi = np.min(b[a > 0] / a[a > 0]) if np.any(a > 0) else np.inf
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise InputError("polytope is unbounded")
            return np.array([[lo], [hi]])
        hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), p["interior"])
        v = hs.intersections
        if not np.all(np.isfinite(v)) or np.abs(v).max() > 1e12:
            raise InputError("polytope is unbounded")
        return v

    @cached_property
    def bounding_box(self):
        if self.kind == "axis-box":
            return self.params["lower"].copy(), self.params["upper"].copy()
        if self.kind == "euclidean-ball":
            c, r = self.params["center"], self.params["radius"]
            return c - r, c + r
        v = self.vertices
        return v.min(axis=0), v.max(axis=0)

    @cached_property
    def diameter(self):
        if self.kind == "axis-box":
            return float(np.linalg.norm(self.params["upper"] - self.params["lower"]))
        if self.kind == "euclidean-ball":
            return 2.0 * self.params["radius"]
        v = self.vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.sum(diff**2, axis=-1))))

    @cached_property
    def chebyshev_ball(self):
        """Centre and radius of the largest inscribed ball."""
        if self.kind == "axis-box":
            lo, hi = self.params["lower"], self.params["upper"]
            return 0.5 * (lo + hi), 0.5 * float(np.min(hi - lo))
        if self.kind == "euclidean-ball":
            return self.params["center"].copy(), self.params["radius"]
        p = self.params
        A, b = p["normals"], p["offsets"]
        norms = np.linalg.norm(A, axis=1)
        # maximize t subject to A x + |a_i| t <= b
        cost = np.zeros(self.dim + 1)
        cost[-1] = -1.0
        res = linprog(cost, A_ub=np.hstack([A, norms[:, None]]), b_ub=b,
                      bounds=[(None, None)] * self.dim + [(0, None)], method="highs")
        if not res.success:
            raise NumericalFailure(f"Chebyshev centre LP failed: {res.message}")
        return res.x[:-1], float(res.x[-1])

    def inradius(self):
        return self.chebyshev_ball[1]

    def cone_parameters(self):
        r = min(1.0, self.inradius())
        return cone_from_radius(r, self.diameter)

    def volume_with_error(self, n_samples=400_000, seed=0):
        """(volume, standard error); the error is zero for boxes and balls."""
        if self.kind == "axis-box":
            return float(np.prod(self.params["upper"] - self.params["lower"])), 0.0
        if self.kind == "euclidean-ball":
            return unit_ball_volume(self.dim) * self.params["radius"] ** self.dim, 0.0
        lo, hi = self.bounding_box
        box_vol = float(np.prod(hi - lo))
        rng = np.random.default_rng(seed)
        x = rng.uniform(lo, hi, size=(n_samples, self.dim))
        frac = float(np.mean(self.contains(x)))
        return box_vol * frac, box_vol * math.sqrt(frac * (1.0 - frac) / n_samples)

    def volume(self, n_samples=400_000, seed=0):
        return self.volume_with_error(n_samples, seed)[0]

    def sample_uniform(self, seed, n, max_draws=None):
        """n i.i.d. uniform points by rejection from the bounding box."""
        if n < 1:
            raise InputError("n must be at least 1")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        lo, hi = self.bounding_box
        max_draws = max_draws or max(10**7, 100 * n)
        accepted, drawn, count = [], 0, 0
        batch = max(2 * n, 1024)
        while count < n:
            if drawn >= max_draws:
                rate = count / max(drawn, 1)
                raise NumericalFailure(
                    f"rejection sampling stalled: acceptance rate {rate:.3g} after {drawn} draws")
            x = rng.uniform(lo, hi, size=(batch, self.dim))
            drawn += batch
            x = x[self.contains(x)]
            accepted.append(x)
            count += x.shape[0]
        rate = count / drawn
        if rate < 1e-6:
            raise NumericalFailure(f"pathological acceptance rate {rate:.3g}")
        return PointSet(np.concatenate(accepted)[:n], info={"acceptance_rate": rate})
