"""Distance function dist(., P), its L_gamma norms and the covering radius.

The grid quadrature is certified: dist(., P) is 1-Lipschitz, so its value on
a cell differs from the value at the cell centre by at most half the cell
diagonal.  Cells that straddle the boundary only contribute to the upper
bracket.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .domain import INSIDE, OUTSIDE, ConvexDomain
from .errors import InputError, NumericalFailure
from .points import PointSet, as_points

_QUERY_CHUNK = 1 << 15


@dataclass(frozen=True)
class NormEstimate:
    value: float
    lower: float
    upper: float
    method: str
    gamma: float
    location: Optional[np.ndarray] = None
    refined: Optional[float] = None

    def __post_init__(self):
        if not (self.lower <= self.value <= self.upper):
            raise NumericalFailure(
                f"inconsistent bracket: {self.lower} <= {self.value} <= {self.upper} violated")

    @property
    def width(self):
        return self.upper - self.lower


@lru_cache(maxsize=None)
def _ring_offsets(d, k):
    if k == 0:
        return np.zeros((1, d), dtype=np.int64)
    rng = range(-k, k + 1)
    offs = [o for o in itertools.product(rng, repeat=d) if max(abs(v) for v in o) == k]
    return np.array(offs, dtype=np.int64)


class GridIndex:
    """Uniform-bucket spatial index answering exact nearest-point queries.

    Buckets are stored CSR-style: points sorted by linear cell id with
    ``starts``/``ends`` per cell.  Queries scan Chebyshev rings of cells around
    the query cell until no unseen bucket can hold a closer point.
    """

    def __init__(self, points, cell_size=None):
        P = as_points(points)
        if P.shape[0] == 0:
            raise InputError("cannot index an empty point set")
        self.source = points if isinstance(points, PointSet) else PointSet(P)
        self.points = P
        n, d = P.shape
        self.dim = d
        self.origin = P.min(axis=0)
        extent = P.max(axis=0) - self.origin
        if cell_size is None:
            diam = float(np.linalg.norm(extent))
            k = math.ceil(n ** (1.0 / d) - 1e-9)
            cell_size = diam / k if diam > 0 else 1.0
        if cell_size <= 0:
            raise InputError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.shape = tuple(int(s) for s in np.floor(extent / self.cell_size).astype(np.int64) + 1)
        coords = np.floor((P - self.origin) / self.cell_size).astype(np.int64)
        coords = np.minimum(coords, np.array(self.shape) - 1)
        lin = np.ravel_multi_index(coords.T, self.shape)
        self._order = np.argsort(lin, kind="stable")
        sorted_lin = lin[self._order]
        ncell = int(np.prod(self.shape))
        cells = np.arange(ncell)
        self._starts = np.searchsorted(sorted_lin, cells, side="left")
        self._ends = np.searchsorted(sorted_lin, cells, side="right")
        self._coords = coords

    @property
    def buckets(self):
        """Mapping from integer cell coordinates to point indices."""
        out = {}
        for i, c in enumerate(map(tuple, self._coords)):
            out.setdefault(c, []).append(i)
        return out

    def query(self, X):
        """Nearest distances and point indices for an (m, d) array of queries."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise InputError(f"query dimension {X.shape[1]} does not match index dimension {self.dim}")
        dist = np.empty(X.shape[0])
        idx = np.empty(X.shape[0], dtype=np.int64)
        for lo in range(0, X.shape[0], _QUERY_CHUNK):
            sl = slice(lo, lo + _QUERY_CHUNK)
            dist[sl], idx[sl] = self._query_chunk(X[sl])
        if single:
            return float(dist[0]), int(idx[0])
        return dist, idx

    def _query_chunk(self, X):
        m = X.shape[0]
        shape = np.array(self.shape)
        qc = np.floor((X - self.origin) / self.cell_size).astype(np.int64)
        kmax = np.max(np.maximum(np.abs(qc), np.abs(qc - (shape - 1))), axis=1)
        best = np.full(m, np.inf)
        arg = np.full(m, -1, dtype=np.int64)
        active = np.arange(m)
        k = 0
        while active.size:
            offs = _ring_offsets(self.dim, k)
            cells = qc[active][:, None, :] + offs[None, :, :]
            valid = np.all((cells >= 0) & (cells < shape), axis=2)
            ai, oi = np.nonzero(valid)
            if ai.size:
                lin = np.ravel_multi_index(cells[ai, oi].T, self.shape)
                s, e = self._starts[lin], self._ends[lin]
                cnt = e - s
                total = int(cnt.sum())
                if total:
                    q_rep = np.repeat(active[ai], cnt)
                    first = np.repeat(np.cumsum(cnt) - cnt, cnt)
                    pos = np.repeat(s, cnt) + (np.arange(total) - first)
                    pidx = self._order[pos]
                    diff = X[q_rep] - self.points[pidx]
                    d2 = np.einsum("ij,ij->i", diff, diff)
                    # q_rep is grouped and nondecreasing, so segment reductions apply
                    head = np.ones(total, dtype=bool)
                    head[1:] = q_rep[1:] != q_rep[:-1]
                    seg = np.flatnonzero(head)
                    hq = q_rep[seg]
                    hd = np.minimum.reduceat(d2, seg)
                    gid = np.cumsum(head) - 1
                    cand = np.where(d2 == hd[gid], pidx, np.iinfo(np.int64).max)
                    hp = np.minimum.reduceat(cand, seg)
                    better = (hd < best[hq]) | ((hd == best[hq]) & (hp < arg[hq]))
                    best[hq[better]] = hd[better]
                    arg[hq[better]] = hp[better]
            done = (best[active] <= (k * self.cell_size) ** 2) | (k >= kmax[active])
            active = active[~done]
            k += 1
        return np.sqrt(best), arg


def dist_to_set(x, index: GridIndex) -> float:
    """Exact Euclidean distance from a single point to the indexed set."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("dist_to_set takes a single point; use GridIndex.query for batches")
    return index.query(x)[0]


def _as_index(P):
    return P if isinstance(P, GridIndex) else GridIndex(P)


# -- cell grids -------------------------------------------------------------

@dataclass(frozen=True)
class CellGrid:
    """Midpoint grid over a domain's bounding box, outside cells removed."""

    centers: np.ndarray
    widths: np.ndarray
    status: np.ndarray
    center_in: np.ndarray

    @property
    def cell_volume(self):
        return float(np.prod(self.widths))

    @property
    def half_diagonal(self):
        return 0.5 * float(np.linalg.norm(self.widths))


def cell_grid(domain: ConvexDomain, mesh, lower=None, upper=None) -> CellGrid:
    """Cells of side <= mesh covering [lower, upper] (default: the bounding box)."""
    if mesh <= 0:
        raise InputError("mesh must be positive")
    lo, hi = domain.bounding_box
    lo = lo if lower is None else np.asarray(lower, dtype=float)
    hi = hi if upper is None else np.asarray(upper, dtype=float)
    extent = hi - lo
    counts = np.maximum(np.ceil(extent / mesh - 1e-9).astype(np.int64), 1)
    widths = extent / counts
    axes = [lo[j] + (np.arange(counts[j]) + 0.5) * widths[j] for j in range(domain.dim)]
    mesh_axes = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([a.ravel() for a in mesh_axes], axis=1)
    status = domain.cell_status(centers, widths)
    keep = status != OUTSIDE
    centers, status = centers[keep], status[keep]
    return CellGrid(centers, widths, status, domain.contains(centers))


def _fsum_pow(values, gamma):
    return math.fsum((values**gamma).tolist())


def lgamma_norm(domain: ConvexDomain, P, gamma, mesh, index=None) -> NormEstimate:
    """Certified midpoint-grid estimate of ||dist(., P)||_{L_gamma(domain)}."""
    if gamma is None or gamma <= 0:
        raise InputError("gamma must be positive")
    if math.isinf(gamma):
        return covering_radius(domain, P, mesh, index=index)
    index = index or _as_index(P)
    grid = cell_grid(domain, mesh)
    if not grid.center_in.any():
        raise NumericalFailure("mesh too coarse: no cell centre lies in the domain")
    D = index.query(grid.centers)[0]
    vol, delta = grid.cell_volume, grid.half_diagonal
    interior = grid.status == INSIDE
    value = (vol * _fsum_pow(D[grid.center_in], gamma)) ** (1.0 / gamma)
    lower = (vol * _fsum_pow(np.maximum(D[interior] - delta, 0.0), gamma)) ** (1.0 / gamma)
    upper = (vol * _fsum_pow(D + delta, gamma)) ** (1.0 / gamma)
    return NormEstimate(value, min(lower, value), max(upper, value), "grid-certified", float(gamma))


def covering_radius(domain: ConvexDomain, P, mesh, index=None) -> NormEstimate:
    """Certified bracket for sup_{x in domain} dist(x, P)."""
    index = index or _as_index(P)
    grid = cell_grid(domain, mesh)
    if not grid.center_in.any():
        raise NumericalFailure("mesh too coarse: no cell centre lies in the domain")
    D = index.query(grid.centers)[0]
    inside_D = np.where(grid.center_in, D, -np.inf)
    i = int(np.argmax(inside_D))
    lower = float(inside_D[i])
    upper = float(D.max()) + grid.half_diagonal
    return NormEstimate(lower, lower, upper, "grid-certified", math.inf,
                        location=grid.centers[i].copy())


def lgamma_norm_1d_exact(interval, P, gamma) -> float:
    """Exact ||dist(., P)||_{L_gamma(a, b)} for points on an interval."""
    a, b = map(float, interval)
    x = np.sort(as_points(P)[:, 0]) if not np.isscalar(P) else np.array([float(P)])
    if x.size == 0:
        raise InputError("empty point set")
    if x[0] < a or x[-1] > b:
        raise InputError("points must lie in the closed interval")
    g1 = gamma + 1.0
    if math.isinf(gamma):
        return max(x[0] - a, b - x[-1], 0.5 * float(np.max(np.diff(x), initial=0.0)))
    parts = [(x[0] - a) ** g1 / g1, (b - x[-1]) ** g1 / g1]
    parts.extend((2.0 * (0.5 * np.diff(x)) ** g1 / g1).tolist())
    return math.fsum(parts) ** (1.0 / gamma)


def greedy_separated_subset(P, h):
    """Greedy subset X of P with pairwise distances >= h covering P within h.

    Points are visited in ascending lexicographic order; a point is selected
    unless it lies strictly within distance h of an earlier selection.
    Returns (PointSet, selected indices into P).
    """
    if h <= 0:
        raise InputError("h must be positive")
    ps = P if isinstance(P, PointSet) else PointSet(P)
    if ps.n == 0:
        raise InputError("empty point set")
    pts = ps.points
    tree = cKDTree(pts)
    excluded = np.zeros(ps.n, dtype=bool)
    chosen = []
    for i in ps.lexsorted():
        if excluded[i]:
            continue
        chosen.append(i)
        nb = np.asarray(tree.query_ball_point(pts[i], r=h), dtype=np.int64)
        if nb.size:
            close = np.linalg.norm(pts[nb] - pts[i], axis=1) < h
            excluded[nb[close]] = True
    chosen = np.array(chosen, dtype=np.int64)
    return PointSet(pts[chosen]), chosen
