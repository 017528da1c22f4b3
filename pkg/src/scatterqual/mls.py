"""Moving least squares sampling operator S_P f = sum_x f(x) u_x.

At an evaluation point y the weights u(y) come from weighted polynomial
regression with the compactly supported profile w(t) = (1 - t)^4 (4t + 1):
fit a polynomial of degree <= m to the data near y, evaluate it at y.  Since
the fitted value is linear in the data it can be written as sum_x f(x) u_x(y),
and the fit reproduces polynomials of degree <= m exactly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .distance import NormEstimate, cell_grid, covering_radius
from .errors import InputError, NumericalFailure
from .points import PointSet
from .testfunctions import multi_indices

RANK_TOL = 1e-12
# bound on chunk_size * K * M floats held at once
_CHUNK_BUDGET = 4_000_000
_BLOCK = 4096


def wendland(t):
    t = np.asarray(t, dtype=float)
    return np.where(t < 1.0, (1.0 - t) ** 4 * (4.0 * t + 1.0), 0.0)


def poly_dim(d, m):
    return math.comb(d + m, d) if m >= 0 else 0


def _exponents(d, m):
    return np.array([a for k in range(m + 1) for a in multi_indices(d, k)], dtype=np.int64).reshape(-1, d)


@dataclass
class LocalWeights:
    """Sparse weight vector (u_x(y))_{x in P} at one evaluation point."""

    indices: np.ndarray
    values: np.ndarray
    degree: int
    radius: float
    n: int

    def dense(self):
        out = np.zeros(self.n)
        out[self.indices] = self.values
        return out

    @property
    def lebesgue(self):
        return float(np.abs(self.values).sum())


def _solve_chunk(pts, nbr, Y, radius, m):
    """Weights for a batch sharing degree m.

    nbr is (b, K) padded with -1.  Returns (weights (b, K), ok (b,)).
    """
    b, K = nbr.shape
    d = pts.shape[1]
    E = _exponents(d, m)
    M = E.shape[0]
    valid = nbr >= 0
    X = pts[np.where(valid, nbr, 0)]
    diff = (X - Y[:, None, :]) / radius[:, None, None]
    t = np.linalg.norm(diff, axis=-1)
    w = np.where(valid, wendland(t), 0.0)
    pw = [diff**k for k in range(m + 1)]
    V = np.empty((b, K, M))
    for i, e in enumerate(E):
        V[:, :, i] = np.prod([pw[ej][..., j] for j, ej in enumerate(e)], axis=0)
    G = np.matmul((V * w[..., None]).transpose(0, 2, 1), V)
    support = (w > 0).sum(axis=1)
    ev = np.linalg.eigvalsh(G)
    ok = (support >= M) & (ev[:, 0] > RANK_TOL * np.maximum(ev[:, -1], 1e-300))
    e0 = np.zeros((b, M, 1))
    e0[:, 0, 0] = 1.0
    G_safe = np.where(ok[:, None, None], G, np.eye(M)[None])
    a = np.linalg.solve(G_safe, e0)[..., 0]
    u = w * np.matmul(V, a[..., None])[..., 0]
    u[~ok] = 0.0
    return u, ok


@dataclass
class MLSOperator:
    """Generalized MLS weights on a fixed point set.

    Rank-deficient local systems are retried with the radius grown by
    ``growth`` up to ``max_growth`` times, then with the degree lowered by
    one, down to degree 0.  Points that fail even then are reported as failed.
    """

    P: PointSet
    degree: int = 2
    support_factor: float = 3.0
    growth: float = 1.5
    max_growth: int = 4
    tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.P, PointSet):
            self.P = PointSet(self.P)
        if self.degree < 0:
            raise InputError("degree must be >= 0")
        if self.P.n == 0:
            raise InputError("empty point set")
        self.tree = cKDTree(self.P.points)

    def _neighbors(self, Y, radius):
        counts = np.asarray(self.tree.query_ball_point(Y, radius, return_length=True))
        K = int(max(counts.max(initial=0), 1))
        K = min(K, self.P.n)
        dd, ii = self.tree.query(Y, k=K)
        dd, ii = dd.reshape(Y.shape[0], K), ii.reshape(Y.shape[0], K)
        ii = np.where(dd < radius[:, None], ii, -1)
        return ii

    def _batch(self, Y, radius, m):
        nbr = self._neighbors(Y, radius)
        K = nbr.shape[1]
        step = max(1, _CHUNK_BUDGET // max(1, K * poly_dim(Y.shape[1], m) * 4))
        U = np.empty(nbr.shape)
        ok = np.empty(Y.shape[0], dtype=bool)
        for lo in range(0, Y.shape[0], step):
            sl = slice(lo, lo + step)
            U[sl], ok[sl] = _solve_chunk(self.P.points, nbr[sl], Y[sl], radius[sl], m)
        return nbr, U, ok

    def weight_matrix(self, Y, radius, threads=1):
        """Sparse (len(Y), n) matrix of weights u_x(y) with per-row diagnostics.

        ``radius`` is a scalar or per-point array of initial support radii.
        Returns (csr matrix, degree used, radius used, failed mask); failed
        rows are empty.
        """
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.P.dim:
            raise InputError("evaluation points have the wrong dimension")
        rad0 = np.broadcast_to(np.asarray(radius, dtype=float), (Y.shape[0],)).copy()
        if np.any(~(rad0 > 0)):
            raise InputError("support radius must be positive")
        # fixed blocks so results do not depend on the thread count
        blocks = [np.arange(lo, min(lo + _BLOCK, Y.shape[0])) for lo in range(0, Y.shape[0], _BLOCK)]
        job = lambda ix: self._ladder(Y[ix], rad0[ix])
        if threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(threads) as ex:
                res = list(ex.map(job, blocks))
        else:
            res = [job(ix) for ix in blocks]
        if len(res) == 1:
            return res[0]
        return (sparse.vstack([r[0] for r in res], format="csr"),
                *(np.concatenate([r[k] for r in res]) for k in (1, 2, 3)))

    def _ladder(self, Y, rad0):
        nY = Y.shape[0]
        deg = np.full(nY, -1, dtype=np.int64)
        rad = np.full(nY, np.nan)
        rows, cols, vals = [], [], []
        pending = np.arange(nY)
        for m in range(self.degree, -1, -1):
            for attempt in range(self.max_growth + 1):
                if pending.size == 0:
                    break
                r = rad0[pending] * self.growth**attempt
                nbr, U, ok = self._batch(Y[pending], r, m)
                keep = (nbr >= 0) & ok[:, None]
                rows.append(np.broadcast_to(pending[:, None], nbr.shape)[keep])
                cols.append(nbr[keep])
                vals.append(U[keep])
                deg[pending[ok]] = m
                rad[pending[ok]] = r[ok]
                pending = pending[~ok]
        failed = deg < 0
        rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
        order = np.argsort(rows, kind="stable")
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=nY))])
        mat = sparse.csr_matrix((vals[order], cols[order], indptr), shape=(nY, self.P.n))
        return mat, deg, rad, failed


def mls_weights(y, P, degree, radius, operator=None) -> LocalWeights:
    """Weights (u_x(y))_{x in P} at a single evaluation point."""
    op = operator or MLSOperator(P if isinstance(P, PointSet) else PointSet(P), degree=degree)
    if op.degree != degree:
        op = MLSOperator(op.P, degree=degree, support_factor=op.support_factor)
    mat, deg, rad, failed = op.weight_matrix(np.asarray(y, dtype=float)[None], radius)
    if failed[0]:
        raise NumericalFailure("isolated evaluation point: no solvable local system at any degree")
    row = mat.getrow(0)
    return LocalWeights(row.indices.copy(), row.data.copy(), int(deg[0]), float(rad[0]), op.P.n)


@dataclass
class Approximation:
    """Values of S_P f at evaluation points plus per-point diagnostics."""

    points: np.ndarray
    values: np.ndarray
    degree_used: np.ndarray
    radius_used: np.ndarray
    failed: np.ndarray
    lebesgue: np.ndarray

    @property
    def n_failed(self):
        return int(self.failed.sum())


def support_radii(Y, policy, support_factor, covering=None, cover=None):
    """Initial MLS radius at each evaluation point for a given policy."""
    if policy == "global":
        if covering is None:
            raise InputError("global policy needs a covering-radius estimate")
        return np.full(Y.shape[0], support_factor * covering.upper)
    if policy == "good-cover":
        if cover is None:
            raise InputError("good-cover policy needs a GoodCover")
        cube = cover.containing_cube(Y)
        return support_factor * cover.c * cover.radii[cube]
    raise InputError(f"unknown policy {policy!r}")


def approximate(f, P, Y, policy="global", *, domain=None, cover=None, covering=None,
                degree=2, support_factor=3.0, mesh=None, threads=1, operator=None) -> Approximation:
    """Evaluate S_P f at Y.

    The global policy uses one radius, support_factor times the certified
    covering radius (computed on ``domain`` at ``mesh`` if not supplied).
    The good-cover policy puts each y in its first containing cube Q_i and
    uses support_factor * c * r_i.
    """
    ps = P if isinstance(P, PointSet) else PointSet(P)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if policy == "global" and covering is None:
        if domain is None:
            raise InputError("global policy needs a domain or a covering estimate")
        mesh = mesh or (domain.volume() / ps.n) ** (1.0 / domain.dim) / 4.0
        covering = covering_radius(domain, ps, mesh)
    op = operator or MLSOperator(ps, degree=degree, support_factor=support_factor)
    rad = support_radii(Y, policy, support_factor, covering=covering, cover=cover)
    W, deg, used, failed = op.weight_matrix(Y, rad, threads=threads)
    fP = f(ps.points) if callable(f) else np.asarray(f, dtype=float)
    vals = W @ fP
    vals[failed] = np.nan
    leb = np.asarray(abs(W).sum(axis=1)).ravel()
    return Approximation(Y, vals, deg, used, failed, leb)


def _grid_norm(residual, vol, q):
    if math.isinf(q):
        return float(np.max(np.abs(residual)))
    return (vol * math.fsum((np.abs(residual) ** q).tolist())) ** (1.0 / q)


def quadrature_nodes(domain, mesh):
    """In-domain cell centres of the midpoint grid and the cell volume."""
    g = cell_grid(domain, mesh)
    return g.centers[g.center_in], g.cell_volume


def lq_error(f, approximant, domain, q, mesh) -> NormEstimate:
    """Grid L_q norm of f - approximant over the domain.

    ``approximant`` maps an (m, d) array of points to values.  The estimate is
    taken at ``mesh`` and again at ``mesh / 2`` (stored in ``refined``) as a
    refinement diagnostic; failed evaluations are excluded.  No Lipschitz
    certificate is claimed.
    """
    if q <= 0:
        raise InputError("q must be positive")
    out = []
    for h in (mesh, mesh / 2.0):
        Y, vol = quadrature_nodes(domain, h)
        if Y.shape[0] == 0:
            raise NumericalFailure("mesh too coarse: no cell centre lies in the domain")
        r = f(Y) - approximant(Y)
        out.append(_grid_norm(r[np.isfinite(r)], vol, q))
    return NormEstimate(out[0], out[0], out[0], "grid", float(q), refined=out[1])


def rate_study(f, family, n_list, s, p, q, domain, *, seed=0, degree=None, support_factor=3.0,
               c=0.5, mesh_factor=0.25, threads=1):
    """Error of S_P f against the geometric predictor over a schedule of n.

    For q < p the predictor is ||dist(., P)||_{L_gamma}^s with
    gamma = s / (1/q - 1/p) and the good-cover policy is used; otherwise it is
    the covering radius to the power s - d (1/p - 1/q) and the global policy
    is used.  The evaluation and distance meshes are mesh_factor times the
    nominal spacing (vol / n)^(1/d).
    """
    from .cover import build_good_cover
    from .distance import lgamma_norm
    from .families import gamma_exponent
    from .tables import RateTable

    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InputError("n_list must be strictly increasing")
    d = domain.dim
    degree = int(math.ceil(s)) if degree is None else degree
    gamma = gamma_exponent(s, p, q)
    inv = lambda t: 0.0 if math.isinf(t) else 1.0 / t
    table = RateTable(["n", "error", "predictor", "ratio"], meta={"gamma": gamma, "s": s, "p": p, "q": q})
    for n in n_list:
        P = family(n, np.random.SeedSequence([seed, n]))
        mesh = mesh_factor * (domain.volume() / P.n) ** (1.0 / d)
        op = MLSOperator(P, degree=degree, support_factor=support_factor)
        if q < p:
            cover = build_good_cover(domain, P, c)
            pred = lgamma_norm(domain, P, gamma, mesh).value ** s
            approx = lambda Y: approximate(f, P, Y, "good-cover", cover=cover, operator=op,
                                           support_factor=support_factor, threads=threads).values
        else:
            cov = covering_radius(domain, P, mesh)
            pred = cov.value ** (s - d * (inv(p) - inv(q)))
            approx = lambda Y: approximate(f, P, Y, "global", covering=cov, operator=op,
                                           support_factor=support_factor, threads=threads).values
        err = lq_error(f, approx, domain, q, mesh).value
        table.rows.append({"n": P.n, "error": err, "predictor": pred, "ratio": err / pred})
    table.fit_slope("n", "error")
    return table
