"""Nonnegative bump functions that vanish on P, and the lower bounds they give.

Any algorithm that only sees f on P returns the same output for f and for 0,
so a function g >= 0 with g|_P = 0 and unit Sobolev norm forces a worst-case
error of at least ||g||_{L_q}.  Norms of scaled bumps are obtained from norms
of the reference profile by exact scaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from .distance import GridIndex, NormEstimate, covering_radius
from .errors import InputError, NumericalFailure
from .families import gamma_exponent
from .testfunctions import multi_indices

_U_CAP = 1e3  # exp(1 - u) underflows long before u reaches this


def _radial(t, order):
    """psi^(k)(t) for psi(t) = exp(1 - 1/(1 - t)), k = 0..order, zero for t >= 1."""
    t = np.asarray(t, dtype=float)
    inside = t < 1.0
    u = np.where(inside, np.minimum(1.0 / np.where(inside, 1.0 - t, 1.0), _U_CAP), _U_CAP)
    psi = np.where(inside, np.exp(1.0 - u), 0.0)
    g1, g2, g3 = -u**2, -2.0 * u**3, -6.0 * u**4
    out = [psi]
    if order >= 1:
        out.append(psi * g1)
    if order >= 2:
        out.append(psi * (g1**2 + g2))
    if order >= 3:
        out.append(psi * (g1**3 + 3.0 * g1 * g2 + g3))
    return out


def bump_derivative(alpha, x):
    """D^alpha phi at rows of x for phi(x) = exp(1 - 1/(1 - |x|^2)), |alpha| <= 3."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    alpha = tuple(int(a) for a in alpha)
    k = sum(alpha)
    if k > 3:
        raise InputError("bump derivatives are available up to order 3")
    idx = [j for j, a in enumerate(alpha) for _ in range(a)]
    r2 = np.einsum("ij,ij->i", x, x)
    psi = _radial(r2, k)
    if k == 0:
        return psi[0]
    if k == 1:
        return 2.0 * x[:, idx[0]] * psi[1]
    if k == 2:
        i, j = idx
        return 4.0 * x[:, i] * x[:, j] * psi[2] + 2.0 * (i == j) * psi[1]
    i, j, l = idx
    mixed = (i == j) * x[:, l] + (i == l) * x[:, j] + (j == l) * x[:, i]
    return 8.0 * x[:, i] * x[:, j] * x[:, l] * psi[3] + 4.0 * mixed * psi[2]


@dataclass(frozen=True)
class BumpFunction:
    """x -> amplitude * phi((x - center) / radius)."""

    center: np.ndarray
    radius: float
    amplitude: float = 1.0

    def __call__(self, x):
        return self.derivative((0,) * len(self.center), x)

    def derivative(self, alpha, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scale = self.amplitude * self.radius ** (-sum(alpha))
        return scale * bump_derivative(alpha, (x - self.center) / self.radius)


@dataclass(frozen=True)
class ReferenceNorms:
    """Norms of the reference bump phi on R^d.

    ``terms[k]`` is sum_{|alpha| = k} ||D^alpha phi||_p^p for finite p and
    max_{|alpha| = k} sup |D^alpha phi| for p = infinity.
    """

    d: int
    q: float
    p: float
    s: int
    lq: float
    terms: tuple
    rel_change: float

    @property
    def seminorm(self):
        t = self.terms[self.s]
        return t if math.isinf(self.p) else t ** (1.0 / self.p)

    @property
    def norm(self):
        if math.isinf(self.p):
            return max(self.terms)
        return math.fsum(self.terms) ** (1.0 / self.p)

    def scaled_lq(self, amplitude, radius):
        e = 0.0 if math.isinf(self.q) else self.d / self.q
        return amplitude * radius**e * self.lq

    def scaled_sobolev_p(self, amplitude, radius):
        """||a phi(./rho)||_{W^s_p}^p for finite p, the plain norm for p = inf."""
        a = np.asarray(amplitude, dtype=float)
        r = np.asarray(radius, dtype=float)
        if math.isinf(self.p):
            return a * np.max([r ** (-k) * t for k, t in enumerate(self.terms)], axis=0)
        return a**self.p * np.sum([r ** (self.d - k * self.p) * t for k, t in enumerate(self.terms)], axis=0)

    def scaled_sobolev(self, amplitude, radius):
        v = self.scaled_sobolev_p(amplitude, radius)
        return v if math.isinf(self.p) else v ** (1.0 / self.p)


def _default_mesh(d):
    return {1: 1 / 512, 2: 1 / 128, 3: 1 / 40}.get(d, 1 / 16)


def _grid(d, mesh):
    k = int(math.ceil(2.0 / mesh))
    ax = -1.0 + (np.arange(k) + 0.5) * (2.0 / k)
    g = np.stack([a.ravel() for a in np.meshgrid(*([ax] * d), indexing="ij")], axis=1)
    g = g[np.einsum("ij,ij->i", g, g) < 1.0]
    return g, (2.0 / k) ** d


def _sup(alpha, nodes):
    vals = np.abs(bump_derivative(alpha, nodes))
    x0 = nodes[int(np.argmax(vals))]
    res = optimize.minimize(lambda x: -abs(bump_derivative(alpha, x[None])[0]), x0, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    return max(float(vals.max()), -float(res.fun))


def _norms_at(d, q, p, s, mesh):
    nodes, vol = _grid(d, mesh)
    phi = bump_derivative((0,) * d, nodes)
    lq = 1.0 if math.isinf(q) else (vol * math.fsum((phi**q).tolist())) ** (1.0 / q)
    terms = []
    for k in range(s + 1):
        if math.isinf(p):
            terms.append(max(_sup(a, nodes) for a in multi_indices(d, k)))
        else:
            terms.append(math.fsum(vol * math.fsum((np.abs(bump_derivative(a, nodes)) ** p).tolist())
                                   for a in multi_indices(d, k)))
    return lq, terms


@lru_cache(maxsize=64)
def _cached(d, q, p, s, mesh):
    lq1, t1 = _norms_at(d, q, p, s, mesh)
    lq2, t2 = _norms_at(d, q, p, s, mesh / 2.0)
    rel = max(abs(a - b) / abs(b) for a, b in zip([lq1] + t1, [lq2] + t2))
    if rel > 1e-4:
        raise NumericalFailure(f"reference norm quadrature not converged (relative change {rel:.2e})")
    return ReferenceNorms(d, q, p, s, lq2, tuple(t2), rel)


def reference_norms(d, q, p, s, mesh=None) -> ReferenceNorms:
    """||phi||_{L_q} and the W^s_p terms by midpoint quadrature over B(0, 1).

    Computed at ``mesh`` and ``mesh / 2``; the finer values are kept and the
    relative change between the two must stay below 1e-4.  Suprema (p = inf)
    are polished with a local optimizer started from the best node.
    """
    if int(s) != s or not 0 <= s <= 3:
        raise InputError("s must be an integer between 0 and 3")
    if q <= 0 or p < 1:
        raise InputError("need q > 0 and p >= 1")
    return _cached(int(d), float(q), float(p), int(s), float(mesh or _default_mesh(d)))


def place_ball(domain, x0, h):
    """Centre and radius of a ball inside domain ∩ B(x0, h), radius c_theta h.

    Shrinks the domain's inscribed ball towards x0; convexity keeps the image
    inside the domain, and c_theta <= r / (diam + r) keeps it within B(x0, h).
    """
    cone = domain.cone_parameters()
    if h > cone.radius * (1 + 1e-12):
        raise InputError("h must not exceed the cone radius")
    xc, R = domain.chebyshev_ball
    rho = cone.ball_factor * h
    y = np.asarray(x0, dtype=float) + (rho / R) * (xc - np.asarray(x0, dtype=float))
    return y, rho


def single_hole_fooling(domain, P, q, p, s, covering: NormEstimate = None, mesh=None, reference=None):
    """Bump in the largest hole of P, normalized to unit W^s_p norm.

    Returns (bump, lower_bound) with lower_bound = ||bump||_{L_q}.
    """
    index = P if isinstance(P, GridIndex) else GridIndex(P)
    if covering is None:
        mesh = mesh or (domain.volume() / index.points.shape[0]) ** (1.0 / domain.dim) / 8.0
        covering = covering_radius(domain, index, mesh)
    if covering.location is None:
        raise InputError("covering estimate carries no location")
    x0 = np.asarray(covering.location, dtype=float)
    gap = index.query(x0)[0]
    if not gap > 0:
        raise NumericalFailure("probe failed to locate a hole of positive size")
    h = min(domain.cone_parameters().radius, gap) * (1.0 - 1e-12)
    y, rho = place_ball(domain, x0, h)
    ref = reference or reference_norms(domain.dim, q, p, s)
    amp = 1.0 / float(ref.scaled_sobolev(1.0, rho))
    bump = BumpFunction(y, rho, amp)
    return bump, float(ref.scaled_lq(amp, rho))


@dataclass(frozen=True)
class MultiBump:
    """Sum of bumps with pairwise disjoint supports, scaled by 1 / norm."""

    centers: np.ndarray
    radii: np.ndarray
    amplitudes: np.ndarray

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        tree = cKDTree(self.centers)
        hits = tree.query_ball_point(x, float(self.radii.max()))
        for row, balls in enumerate(hits):
            for i in balls:
                b = BumpFunction(self.centers[i], self.radii[i], self.amplitudes[i])
                out[row] += b(x[row])[0]
        return out


def multi_hole_fooling(domain, P, cover, q, p, s, reference=None):
    """Sum of bumps d_i^{s + gamma/p} phi((x - z_i) / d_i) over the cover's
    empty balls, normalized to unit W^s_p norm.

    Supports are disjoint, so the L_q norm and (for p < inf) the p-th power
    of the Sobolev norm are sums of per-ball terms, each exact by scaling.
    Returns (function, lower_bound).
    """
    if not q < p:
        raise InputError("multi-hole bounds need q < p")
    if not cover.completed:
        raise InputError("cover has no empty balls; run empty_balls first")
    v = cover.ball_valid
    z, dr = cover.ball_centers[v], cover.ball_radii[v]
    if dr.size == 0:
        raise NumericalFailure("cover has no valid empty ball")
    if z.shape[0] > 1:
        tree = cKDTree(z)
        for i, j in tree.query_pairs(2.0 * float(dr.max())):
            if np.linalg.norm(z[i] - z[j]) <= dr[i] + dr[j]:
                raise NumericalFailure("bump supports overlap")
    gamma = gamma_exponent(s, p, q)
    ref = reference or reference_norms(domain.dim, q, p, s)
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    amp = dr ** (s + gamma * inv_p)
    lq = math.fsum((ref.scaled_lq(amp, dr) ** q).tolist()) ** (1.0 / q)
    per_ball = ref.scaled_sobolev_p(amp, dr)
    if math.isinf(p):
        wnorm = float(np.max(per_ball))
    else:
        wnorm = math.fsum(np.asarray(per_ball).tolist()) ** (1.0 / p)
    return MultiBump(z, dr, amp / wnorm), lq / wnorm
