"""Coverings of a domain by good cubes and the disjoint empty balls inside them.

A cube B_inf(x, rho) is good when sup of dist(., P) over its intersection with
the domain stays below c * rho.  The good radius r_P(x) is the smallest such
rho below the cone radius.  Cubes are chosen greedily by decreasing good
radius over a finite candidate grid, which keeps the half-cubes disjoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .distance import GridIndex, cell_grid
from .domain import OUTSIDE, ConvexDomain
from .errors import GloballyBadPointSet, InputError, NumericalFailure

DEFAULT_C = 0.25


@dataclass
class GoodCover:
    centers: np.ndarray
    radii: np.ndarray
    c: float
    multiplicity_observed: int
    candidates: np.ndarray = field(repr=False)
    ball_centers: np.ndarray = None
    ball_radii: np.ndarray = None
    ball_valid: np.ndarray = None

    @property
    def size(self):
        return self.radii.size

    @property
    def completed(self):
        return self.ball_radii is not None

    def containing_cube(self, Y):
        """Index of the first cube (construction order) containing each point.

        Points missed by every open cube, which can only happen between
        candidate nodes, go to the cube minimizing ||y - y_i||_inf / r_i.
        """
        Y = np.atleast_2d(Y)
        out = np.full(Y.shape[0], -1, dtype=np.int64)
        best = np.full(Y.shape[0], np.inf)
        best_i = np.zeros(Y.shape[0], dtype=np.int64)
        for i in range(self.size):
            scaled = np.max(np.abs(Y - self.centers[i]), axis=1) / self.radii[i]
            hit = (scaled < 1.0) & (out < 0)
            out[hit] = i
            closer = scaled < best
            best[closer] = scaled[closer]
            best_i[closer] = i
        miss = out < 0
        out[miss] = best_i[miss]
        return out


def _index(P):
    return P if isinstance(P, GridIndex) else GridIndex(P)


class DistanceField:
    """dist(., P) sampled at the centres of a square-cell grid, with a
    square-block sparse table for fast certified maxima over cubes.

    Cells lying entirely outside the domain hold -inf.  For any axis cube the
    maximum over all cells meeting it plus half a cell diagonal bounds the
    supremum of dist(., P) over the cube's intersection with the domain.
    """

    def __init__(self, domain: ConvexDomain, index: GridIndex, mesh, lower=None, upper=None):
        if mesh <= 0:
            raise InputError("probe mesh must be positive")
        lo, hi = domain.bounding_box
        lo = lo if lower is None else np.maximum(np.asarray(lower, dtype=float), lo)
        hi = hi if upper is None else np.minimum(np.asarray(upper, dtype=float), hi)
        self.dim = d = domain.dim
        self.origin = lo
        self.width = float(mesh)
        self.counts = np.maximum(np.ceil((hi - lo) / mesh - 1e-9).astype(np.int64), 1)
        axes = [lo[j] + (np.arange(self.counts[j]) + 0.5) * mesh for j in range(d)]
        grids = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([g.ravel() for g in grids], axis=1)
        keep = domain.cell_status(centers, np.full(d, mesh)) != OUTSIDE
        values = np.full(centers.shape[0], -np.inf)
        if keep.any():
            values[keep] = index.query(centers[keep])[0]
        self.certificate = 0.5 * mesh * math.sqrt(d)
        table = [values.reshape(tuple(self.counts))]
        step = 1
        while 2 * step <= self.counts.min():
            prev = table[-1]
            cur = prev
            for ax in range(d):
                n_ax = cur.shape[ax]
                a = np.take(cur, np.arange(0, n_ax - step), axis=ax)
                b = np.take(cur, np.arange(step, n_ax), axis=ax)
                cur = np.maximum(a, b)
            table.append(cur)
            step *= 2
        self._table = table

    def local_sup(self, X, rho):
        """(values, empty) with values = certified sup over cube ∩ domain."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (X.shape[0],))
        top = self.counts - 1
        i_lo = np.clip(np.floor((X - rho[:, None] - self.origin) / self.width).astype(np.int64), 0, top)
        i_hi = np.clip(np.floor((X + rho[:, None] - self.origin) / self.width).astype(np.int64), 0, top)
        span = i_hi - i_lo + 1
        level = np.floor(np.log2(span.min(axis=1))).astype(np.int64)
        level = np.minimum(level, len(self._table) - 1)
        best = np.full(X.shape[0], -np.inf)
        for lev in np.unique(level):
            rows = np.flatnonzero(level == lev)
            tab = self._table[lev]
            block = 1 << int(lev)
            lo_r, hi_r = i_lo[rows], i_hi[rows]
            tiles = -(-(hi_r - lo_r + 1) // block)
            tmax = int(tiles.max())
            for t in np.ndindex(*([tmax] * self.dim)):
                start = np.minimum(lo_r + np.array(t) * block, hi_r - block + 1)
                vals = tab[tuple(start.T)]
                best[rows] = np.maximum(best[rows], vals)
        empty = ~np.isfinite(best)
        return np.where(empty, 0.0, best + self.certificate), empty


def default_probe_mesh(domain, n):
    return (domain.volume() / n) ** (1.0 / domain.dim) / 8.0


def local_fill(domain, P, x, rho, probe_mesh=None, index=None):
    """Certified upper estimate of sup_{y in domain ∩ B_inf(x, rho)} dist(y, P).

    Returns (value, empty_flag); the flag is set when no probe cell meets the
    domain, in which case the value is 0.
    """
    if rho <= 0:
        raise InputError("rho must be positive")
    index = index or _index(P)
    x = np.asarray(x, dtype=float)
    mesh = probe_mesh or default_probe_mesh(domain, index.points.shape[0])
    field_ = DistanceField(domain, index, mesh, lower=x - rho, upper=x + rho)
    v, e = field_.local_sup(x[None], rho)
    return float(v[0]), bool(e[0])


def good_radii(domain, P, X, c=DEFAULT_C, rel_tol=1e-3, probe_mesh=None, index=None,
               cone_radius=None, raise_on_bad=True, field=None):
    """Vectorized good radius r_P(x) for each row of X.

    Geometric scan (factor 2) from max(1e-3 r, dist(x, P) / c) up to the cone
    radius r, then bisection to relative tolerance ``rel_tol``.  Rows for which
    no scale below r qualifies get NaN, or raise GloballyBadPointSet.
    """
    if not 0 < c < 1:
        raise InputError("c must lie in (0, 1)")
    index = index or _index(P)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = domain.cone_parameters().radius if cone_radius is None else cone_radius
    top = r * (1.0 - 1e-9)
    dist0 = index.query(X)[0]
    start = np.minimum(np.maximum(1e-3 * r, dist0 / c), top)

    if field is None:
        field = DistanceField(domain, index, probe_mesh or default_probe_mesh(domain, index.points.shape[0]))

    def good(rows, rho):
        v, e = field.local_sup(X[rows], rho)
        return (v < c * rho) & ~e

    hi = np.full(X.shape[0], np.nan)
    lo = np.zeros(X.shape[0])
    rho = start.copy()
    pending = np.arange(X.shape[0])
    while pending.size:
        ok = good(pending, rho[pending])
        hi[pending[ok]] = rho[pending[ok]]
        fail = pending[~ok]
        lo[fail] = rho[fail]
        at_top = rho[fail] >= top
        fail = fail[~at_top]
        rho[fail] = np.minimum(2.0 * rho[fail], top)
        pending = fail
    bad = np.isnan(hi)
    if bad.any() and raise_on_bad:
        raise GloballyBadPointSet(
            f"{int(bad.sum())} of {X.shape[0]} locations admit no good cube below radius {r:.4g}")
    live = np.flatnonzero(~bad & (lo > 0))
    while live.size:
        mid = 0.5 * (lo[live] + hi[live])
        ok = good(live, mid)
        hi[live[ok]] = mid[ok]
        lo[live[~ok]] = mid[~ok]
        live = live[(hi[live] - lo[live]) > rel_tol * hi[live]]
    return hi


def good_radius(domain, P, x, c=DEFAULT_C, rel_tol=1e-3, probe_mesh=None, index=None):
    return float(good_radii(domain, P, np.asarray(x, dtype=float)[None], c, rel_tol,
                            probe_mesh=probe_mesh, index=index)[0])


def build_good_cover(domain, P, c=DEFAULT_C, candidate_mesh=None, index=None, rel_tol=1e-3,
                     probe_mesh=None):
    """Greedy covering of the candidate grid by good cubes of decreasing radius."""
    index = index or _index(P)
    if candidate_mesh is None:
        candidate_mesh = 0.25 * (domain.volume() / index.points.shape[0]) ** (1.0 / domain.dim)
    grid = cell_grid(domain, candidate_mesh)
    cand = grid.centers[grid.center_in]
    if cand.shape[0] == 0:
        raise NumericalFailure("candidate grid has no node inside the domain")
    radii = good_radii(domain, index, cand, c, rel_tol=rel_tol, probe_mesh=probe_mesh, index=index)
    order = np.lexsort((np.arange(cand.shape[0]), -radii))
    tree = cKDTree(cand)

    def inside(y, r):
        nb = np.asarray(tree.query_ball_point(y, r, p=np.inf), dtype=np.int64)
        return nb[np.max(np.abs(cand[nb] - y), axis=1) < r] if nb.size else nb

    covered = np.zeros(cand.shape[0], dtype=bool)
    counts = np.zeros(cand.shape[0], dtype=np.int64)
    centers, rs = [], []
    for j in order:
        if covered[j]:
            continue
        y, r = cand[j], radii[j]
        centers.append(y)
        rs.append(r)
        hit = inside(y, r)
        covered[hit] = True
        counts[hit] += 1
    rs = np.minimum.accumulate(np.array(rs))
    centers = np.array(centers)
    return GoodCover(centers, rs, c, int(counts.max()), candidates=cand)


def empty_balls(cover: GoodCover, domain: ConvexDomain, P, probes=16, index=None) -> GoodCover:
    """Place an empty ball B(z_i, d_i) in each cube's quarter-cube.

    z_i maximizes min(dist(z, P), distance to the boundary) over probes of
    Q_i/4 ∩ domain, and d_i = min(c_theta c r_i / 8, that value).  Cubes with
    no usable probe are flagged invalid.
    """
    index = index or _index(P)
    d = domain.dim
    c_theta = domain.cone_parameters().ball_factor
    unit = -1.0 + (2.0 * np.arange(probes) + 1.0) / probes
    offs = np.stack([a.ravel() for a in np.meshgrid(*([unit] * d), indexing="ij")], axis=1)
    zs = cover.centers[:, None, :] + (cover.radii / 4.0)[:, None, None] * offs[None]
    flat = zs.reshape(-1, d)
    inside = domain.contains(flat)
    score = np.full(flat.shape[0], -np.inf)
    if inside.any():
        dd = index.query(flat[inside])[0]
        score[inside] = np.minimum(dd, domain.boundary_distance(flat[inside]))
    score = score.reshape(cover.size, -1)
    best = np.argmax(score, axis=1)
    best_score = score[np.arange(cover.size), best]
    z = zs[np.arange(cover.size), best]
    cap = c_theta * cover.c * cover.radii / 8.0
    radii = np.minimum(cap, np.where(np.isfinite(best_score), best_score, 0.0))
    # strict emptiness margin
    radii = radii * (1.0 - 1e-9)
    valid = radii > 0
    radii = np.where(valid, radii, 0.0)
    out = replace(cover, ball_centers=z, ball_radii=radii, ball_valid=valid)
    check_balls(out, domain, index)
    return out


def check_balls(cover: GoodCover, domain, index):
    """Assert emptiness, containment and pairwise disjointness of valid balls."""
    v = cover.ball_valid
    z, rad = cover.ball_centers[v], cover.ball_radii[v]
    if z.shape[0] == 0:
        return
    gap = index.query(z)[0] - rad
    if np.any(gap <= 0):
        raise NumericalFailure("an empty ball contains a sampling point")
    if np.any(domain.boundary_distance(z) < rad):
        raise NumericalFailure("an empty ball leaves the domain")
    for lo in range(0, z.shape[0], 512):
        dz = np.linalg.norm(z[lo:lo + 512, None, :] - z[None, :, :], axis=-1)
        need = rad[lo:lo + 512, None] + rad[None, :]
        np.fill_diagonal(dz[:, lo:lo + 512], np.inf)
        if np.any(dz <= need):
            raise NumericalFailure("empty balls overlap")


def half_cubes_disjoint(cover: GoodCover) -> bool:
    y, r = cover.centers, cover.radii
    dist = np.max(np.abs(y[:, None, :] - y[None, :, :]), axis=-1)
    need = 0.5 * (r[:, None] + r[None, :])
    np.fill_diagonal(dist, np.inf)
    return bool(np.all(dist >= need))
