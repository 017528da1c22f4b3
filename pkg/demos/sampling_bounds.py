"""Upper and lower bounds for recovery from samples on three point families.

For s = 2, p = inf, q = 1 in the plane, the error of MLS recovery normalized
by ||dist||_{L_2}^2 stays in a narrow band across grids, random points and
grids with a hole.  The fooling function gives a certified lower bound.
"""
import math

from scatterqual.experiments import equivalence_study

t = equivalence_study(["grid", "random", "grid-with-hole"], 2, math.inf, 1.0, [256, 1024], seed=0)
print(t)
print(f"\nratio band max/min: {t.meta['band']:.2f}")
