"""Optimal-weight quadrature on random points in [0, 1] for the exponential kernel.

The kernel exp(-|x - y|) reproduces W^1_2(0, 1); the worst-case error of the
optimal rule on n random points decays like 1/n, while plain Monte Carlo
weights 1/n stay near n^(-1/2).
"""
import numpy as np

from scatterqual import ConvexDomain
from scatterqual.quadrature import Kernel, equal_weights, quadrature_rule, worst_case_error

unit = ConvexDomain.box([0.0], [1.0])
kernel = Kernel(0.5)
rng = np.random.default_rng(0)
print(f"{'n':>6} {'optimal':>12} {'equal':>12}")
for n in (16, 64, 256, 1024):
    rule = quadrature_rule(unit, rng.uniform(size=(n, 1)), kernel)
    print(f"{n:>6} {worst_case_error(rule):>12.4e} {worst_case_error(rule, equal_weights(rule, 1.0)):>12.4e}")
