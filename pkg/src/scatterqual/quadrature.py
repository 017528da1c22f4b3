"""Optimal-weight kernel quadrature with Matérn kernels.

For a reproducing kernel K the squared worst-case error of the rule
Q(f) = sum_i w_i f(x_i) over the unit ball is <w, K w> - 2 <w, b> + c with
b_i = int K(x, x_i) dx and c = int int K(x, y) dx dy.  The optimal weights
solve K w = b.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .errors import DegenerateConfiguration, InputError
from .points import as_points

_NUS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class Kernel:
    """Matérn kernel with half-integer smoothness nu and length scale ell."""

    nu: float
    lengthscale: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.nu not in _NUS:
            raise InputError(f"nu must be one of {_NUS}, got {self.nu}")
        if self.lengthscale <= 0:
            raise InputError("length scale must be positive")

    @classmethod
    def for_sobolev(cls, s, d, lengthscale=1.0):
        """Kernel whose native space is W^s_2 (equivalent norm): nu = s - d/2."""
        return cls(s - d / 2.0, lengthscale, d)

    def radial(self, r):
        r = np.asarray(r, dtype=float) / self.lengthscale
        if self.nu == 0.5:
            return np.exp(-r)
        if self.nu == 1.5:
            a = math.sqrt(3.0) * r
            return (1.0 + a) * np.exp(-a)
        a = math.sqrt(5.0) * r
        return (1.0 + a + a * a / 3.0) * np.exp(-a)

    def __call__(self, X, Y=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
        return self.radial(cdist(X, Y))


@dataclass
class Gram:
    matrix: np.ndarray
    factor: tuple
    jitter: float


def _unique_points(P):
    pts = as_points(P)
    uniq, first = np.unique(pts, axis=0, return_index=True)
    if uniq.shape[0] < pts.shape[0]:
        warnings.warn(f"collapsed {pts.shape[0] - uniq.shape[0]} duplicate points", RuntimeWarning)
        return pts[np.sort(first)]
    return pts


def gram(P, kernel: Kernel) -> Gram:
    """Gram matrix with a Cholesky factor.

    Jitter 1e-12 trace/n is added only if the plain factorization fails, then
    raised tenfold up to 1e-6 trace/n.
    """
    pts = _unique_points(P)
    K = kernel(pts)
    n = K.shape[0]
    base = np.trace(K) / n
    for jit in [0.0] + [base * 10.0**e for e in range(-12, -5)]:
        try:
            fac = linalg.cho_factor(K + jit * np.eye(n), lower=True, check_finite=False)
            return Gram(K, fac, jit)
        except linalg.LinAlgError:
            continue
    raise DegenerateConfiguration("degenerate configuration: Cholesky failed at maximal jitter")


@dataclass(frozen=True)
class IntegrationSpec:
    """Low-discrepancy integration settings: 2^log2_points scrambled Sobol
    points per batch; closed forms on intervals when available."""

    log2_points: int = 14
    seed: int = 0
    closed_form: bool = True


def _interval(domain):
    if domain.dim == 1 and domain.kind == "axis-box":
        lo, hi = domain.bounding_box
        return float(lo[0]), float(hi[0])
    return None


def _closed_F(kernel, u):
    """int_0^u k(t) dt for the 1D kernel profile."""
    ell = kernel.lengthscale
    if kernel.nu == 0.5:
        return ell * (1.0 - np.exp(-u / ell))
    lam = math.sqrt(3.0) / ell
    return 2.0 / lam - np.exp(-lam * u) * (2.0 / lam + u)


def _closed_int_F(kernel, L):
    ell = kernel.lengthscale
    if kernel.nu == 0.5:
        return ell * L - ell * ell * (1.0 - math.exp(-L / ell))
    lam = math.sqrt(3.0) / ell
    e = math.exp(-lam * L)
    return 2.0 * L / lam - 2.0 * (1.0 - e) / lam**2 - (1.0 - e * (1.0 + lam * L)) / lam**2


def _has_closed_form(domain, kernel, spec):
    return spec.closed_form and _interval(domain) is not None and kernel.nu in (0.5, 1.5)


def _qmc_nodes(domain, spec, batch):
    lo, hi = domain.bounding_box
    sob = qmc.Sobol(domain.dim, scramble=True, seed=np.random.default_rng([spec.seed, batch]))
    X = qmc.scale(sob.random_base2(spec.log2_points), lo, hi)
    return X, domain.contains(X), float(np.prod(hi - lo))


def kernel_embedding(domain, P, kernel, spec=IntegrationSpec(), return_discrepancy=False):
    """b_i = int_domain K(x, x_i) dx.

    Closed form on intervals for nu in {1/2, 3/2}; otherwise the mean of two
    scrambled Sobol batches, with max |batch1 - batch2| as discrepancy.
    """
    if domain.dim != kernel.dim:
        raise InputError("kernel and domain dimensions differ")
    pts = as_points(P)
    if _has_closed_form(domain, kernel, spec):
        a, b = _interval(domain)
        t = pts[:, 0]
        out = _closed_F(kernel, t - a) + _closed_F(kernel, b - t)
        return (out, 0.0) if return_discrepancy else out
    ests = []
    for batch in (0, 1):
        X, inside, box = _qmc_nodes(domain, spec, batch)
        ests.append(box * (kernel(pts, X[inside]).sum(axis=1) / X.shape[0]))
    out = 0.5 * (ests[0] + ests[1])
    disc = float(np.max(np.abs(ests[0] - ests[1])))
    return (out, disc) if return_discrepancy else out


def initial_error_sq(domain, kernel, spec=IntegrationSpec(), return_discrepancy=False):
    """c = int int K(x, y) dx dy, the squared error of the zero rule."""
    if domain.dim != kernel.dim:
        raise InputError("kernel and domain dimensions differ")
    if _has_closed_form(domain, kernel, spec):
        a, b = _interval(domain)
        c = 2.0 * _closed_int_F(kernel, b - a)
        return (c, 0.0) if return_discrepancy else c
    ests = []
    for pair in ((0, 1), (2, 3)):
        # product points: two independent scrambles, capped at 2^12 each
        sub = IntegrationSpec(min(spec.log2_points, 12), spec.seed)
        X, ix, box = _qmc_nodes(domain, sub, pair[0] + 2)
        Y, iy, _ = _qmc_nodes(domain, sub, pair[1] + 2)
        ests.append(box * box * kernel(X[ix], Y[iy]).sum() / (X.shape[0] * Y.shape[0]))
    c = 0.5 * (ests[0] + ests[1])
    return (c, abs(ests[0] - ests[1])) if return_discrepancy else c


@dataclass
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    gram: Gram
    embedding: np.ndarray
    initial_error_sq: float
    residual: float = math.nan

    @property
    def jitter(self):
        return self.gram.jitter


def optimal_weights(rule: QuadratureRule):
    """Solve K w = b with the stored Cholesky factor; returns (w, relative residual)."""
    w = linalg.cho_solve(rule.gram.factor, rule.embedding, check_finite=False)
    b = rule.embedding
    res = float(np.linalg.norm(rule.gram.matrix @ w - b) / max(np.linalg.norm(b), 1e-300))
    return w, res


def quadrature_rule(domain, P, kernel, spec=IntegrationSpec()) -> QuadratureRule:
    """Rule on P with optimal weights."""
    pts = _unique_points(P)
    G = gram(pts, kernel)
    b = kernel_embedding(domain, pts, kernel, spec)
    c = initial_error_sq(domain, kernel, spec)
    rule = QuadratureRule(pts, np.zeros(pts.shape[0]), G, b, float(c))
    rule.weights, rule.residual = optimal_weights(rule)
    return rule


def wce_squared(rule: QuadratureRule, w):
    w = np.asarray(w, dtype=float)
    if w.shape != rule.embedding.shape:
        raise InputError("weight vector has the wrong length")
    return float(w @ rule.gram.matrix @ w - 2.0 * w @ rule.embedding + rule.initial_error_sq)


def worst_case_error(rule: QuadratureRule, w=None, return_raw=False):
    """sqrt(<w, K w> - 2 <w, b> + c), clamped at 0; optionally the raw square."""
    raw = wce_squared(rule, rule.weights if w is None else w)
    val = math.sqrt(max(raw, 0.0))
    return (val, raw) if return_raw else val


def equal_weights(rule: QuadratureRule, volume):
    return np.full(rule.points.shape[0], volume / rule.points.shape[0])
