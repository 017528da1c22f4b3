"""Grid points with one hole of radius 0.4 n^(-e) in the middle.

For gamma = 2 in the plane the hole stays invisible in the L_2 norm of the
distance function as long as e >= 1/4; bigger holes (e = 1/8) slow the decay
of the norm, while the covering radius notices any hole at all.
"""
import math

from scatterqual.experiments import hole_demo

ns = [256, 1024, 4096, 16384]
for e in (0.5, 0.25, 0.125):
    t = hole_demo(2, 2.0, ns, hole_exponent=e)
    print(f"hole exponent {e}: L_2 slope {t.fit.slope:+.3f} (grid without hole: -0.5)")

for e in (0.5, 0.25):
    t = hole_demo(2, math.inf, ns, hole_exponent=e)
    print(f"hole exponent {e}: covering radius slope {t.fit.slope:+.3f}")
