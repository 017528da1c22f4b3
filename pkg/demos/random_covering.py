"""How well do uniform random points cover the unit square?

Prints the mean L_2 norm of the distance function over trials for growing n,
its normalized value n^(1/2) * mean, and the limit constant check for
n^(gamma/d) * mean(int dist^gamma).
"""
import math

from scatterqual import ConvexDomain
from scatterqual.experiments import ExperimentConfig, limit_constant, limit_constant_check, random_rate_study

square = ConvexDomain.unit_cube(2)

cfg = ExperimentConfig(domain=square, gamma=2.0, alpha=1.0, n_list=(64, 256, 1024), trials=10, seed=1)
print("L_2 norm of dist(., P_n) for random P_n")
print(random_rate_study(cfg))

cfg = ExperimentConfig(domain=square, gamma=math.inf, n_list=(64, 256, 1024), trials=10, seed=1)
print("\ncovering radius; normalized by (log n / n)^(1/2)")
print(random_rate_study(cfg))

cfg = ExperimentConfig(domain=square, gamma=2.0, n_list=(256, 1024), trials=10, seed=1)
print(f"\nlimit constant, expected {limit_constant(square, 2.0):.5f}")
print(limit_constant_check(cfg))
