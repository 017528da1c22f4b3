"""Test functions with analytic partial derivatives up to order three.

Derivatives are requested by multi-index, e.g. ``f.derivative((1, 0), x)``
for d/dx_1.  ``sup_bounds(s)`` returns analytic upper bounds for
max_{|alpha| = k} sup |D^alpha f| (k = 0..s) where available; those are what
make a normalized error a valid lower estimate of a worst-case error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError


@dataclass
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    dim: int
    evaluator: Callable
    derivatives: Callable  # (alpha tuple, x) -> values
    smoothness: tuple = (math.inf, math.inf)  # (s, p) class label
    sup_bound: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise InputError(f"{self.name} expects points of dimension {self.dim}")
        return self.evaluator(x)

    def derivative(self, alpha, x):
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim:
            raise InputError("multi-index length must equal the dimension")
        if sum(alpha) > 3:
            raise InputError("derivatives are supplied up to order 3")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if sum(alpha) == 0:
            return self.evaluator(x)
        return self.derivatives(alpha, x)

    def sup_bounds(self, s):
        if self.sup_bound is None:
            return None
        return [self.sup_bound(k) for k in range(s + 1)]


def multi_indices(d, order):
    """All multi-indices alpha in N_0^d with |alpha| == order."""
    if d == 1:
        return [(order,)]
    out = []
    for first in range(order, -1, -1):
        out.extend((first,) + rest for rest in multi_indices(d - 1, order - first))
    return out


def polynomial(coeffs: dict, dim: int, name="polynomial"):
    """Polynomial sum_c coeffs[alpha] x^alpha, keys are exponent tuples."""
    terms = [(np.array(k, dtype=int), float(v)) for k, v in coeffs.items()]

    def deriv(alpha, x):
        a = np.array(alpha)
        out = np.zeros(x.shape[0])
        for e, c in terms:
            if np.any(e < a):
                continue
            fac = np.prod([math.perm(int(ei), int(ai)) for ei, ai in zip(e, a)])
            out += c * fac * np.prod(x ** (e - a), axis=1)
        return out

    return TestFunction(name, dim, lambda x: deriv((0,) * dim, x), deriv)


def sine_product(dim=2, freq=2 * math.pi):
    """f(x) = sin(w x_1) prod_{j>1} cos(w x_j)."""

    def deriv(alpha, x):
        out = np.ones(x.shape[0])
        for j in range(dim):
            k = alpha[j]
            # k-th derivative of sin / cos is a phase shift by k*pi/2
            shift = (0.0 if j == 0 else math.pi / 2) + k * math.pi / 2
            out = out * freq**k * np.sin(freq * x[:, j] + shift)
        return out

    return TestFunction("sine_product", dim, lambda x: deriv((0,) * dim, x), deriv,
                        sup_bound=lambda k: freq**k)


def lacunary(s=2, dim=2, levels=14, base_freq=2 * math.pi * 0.73, seed=11):
    """Ridge sum sum_k 2^{-s k} cos(2^k w <e_k, x> + phi_k).

    Every dyadic scale carries the same share of s-th order variation, so
    sampling errors of any local method decay like h^s rather than faster.
    Directions e_k and phases phi_k are fixed pseudo-random.
    """
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, 2 * math.pi, size=levels + 1)
    if dim == 1:
        dirs = np.ones((levels + 1, 1))
    else:
        raw = rng.standard_normal((levels + 1, dim))
        raw[:, :2] = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    phases = rng.uniform(0, 2 * math.pi, size=levels + 1)
    k = np.arange(levels + 1)
    amp = 2.0 ** (-s * k)
    freq = base_freq * 2.0**k

    def deriv(alpha, x):
        order = sum(alpha)
        arg = (x @ dirs.T) * freq + phases
        coef = amp * freq**order * np.prod(dirs ** np.array(alpha), axis=1)
        return np.cos(arg + order * math.pi / 2) @ coef

    def bound(order):
        return float(np.sum(amp * freq**order))

    return TestFunction(f"lacunary_s{s}", dim, lambda x: deriv((0,) * dim, x), deriv,
                        smoothness=(s, math.inf), sup_bound=bound)


def catalogue(dim):
    return {
        "linear": polynomial({(1,) + (0,) * (dim - 1): 3.0, (0,) * dim: 7.0,
                              **({(0, 1) + (0,) * (dim - 2): -2.0} if dim > 1 else {})}, dim, "linear"),
        "sine_product": sine_product(dim),
        "lacunary": lacunary(2, dim),
    }
