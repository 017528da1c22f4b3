"""Point-set families used by the rate and equivalence studies."""
from __future__ import annotations

import math

import numpy as np

from .distance import cell_grid
from .errors import InputError, NumericalFailure
from .points import PointSet


def grid_points(domain, n):
    """Cell-centre grid with about n points inside the domain.

    For the unit cube and n = k^d this is exactly the k^d cell-centre grid.
    """
    lo, hi = domain.bounding_box
    vol_ratio = domain.volume() / float(np.prod(hi - lo))
    mesh = (float(np.prod(hi - lo)) * vol_ratio / n) ** (1.0 / domain.dim)
    g = cell_grid(domain, mesh * (1 + 1e-12))
    return PointSet(g.centers[g.center_in], info={"family": "grid"})


def random_points(domain, n, rng):
    ps = domain.sample_uniform(rng, n)
    ps.info["family"] = "random"
    return ps


def grid_with_hole(domain, n, radius, center=None):
    """Grid points with every point inside an open ball removed."""
    base = grid_points(domain, n).points
    if center is None:
        center = domain.chebyshev_ball[0]
    keep = np.linalg.norm(base - center, axis=1) >= radius
    if keep.sum() == 0:
        raise NumericalFailure(f"hole of radius {radius:.4g} swallows the domain")
    return PointSet(base[keep], info={"family": "grid-with-hole", "hole_radius": radius})


def make_family(name, domain, hole_scale=0.4, hole_exponent=None):
    """Return generator (n, rng) -> PointSet for a named family.

    The hole family removes a ball of radius hole_scale * n^(-hole_exponent)
    around the Chebyshev centre.  The default exponent is the largest hole
    still compatible with optimal L_gamma behaviour at gamma = 2,
    1/d - 1/(2 + d).
    """
    d = domain.dim
    if name == "grid":
        return lambda n, rng=None: grid_points(domain, n)
    if name == "random":
        return lambda n, rng: random_points(domain, n, rng)
    if name == "grid-with-hole":
        e = hole_exponent if hole_exponent is not None else 1.0 / d - 1.0 / (2.0 + d)
        return lambda n, rng=None: grid_with_hole(domain, n, hole_scale * n ** (-e))
    raise InputError(f"unknown point family {name!r}")


def gamma_exponent(s, p, q):
    """gamma = s / (1/q - 1/p) for q < p, infinity otherwise."""
    if q >= p:
        return math.inf
    return s / (1.0 / q - (0.0 if math.isinf(p) else 1.0 / p))
