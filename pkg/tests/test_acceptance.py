"""End-to-end acceptance checks at full experiment scale (a few minutes).

Each test prints one PASS/FAIL line with the measured quantity and the target.
"""
import math

import numpy as np
import pytest

from scatterqual.distance import covering_radius, lgamma_norm
from scatterqual.domain import ConvexDomain
from scatterqual.experiments import (
    ExperimentConfig,
    equivalence_study,
    hole_demo,
    integration_rate_study,
    limit_constant_check,
    random_rate_study,
)
from scatterqual.families import grid_points, make_family
from scatterqual.mls import MLSOperator, rate_study
from scatterqual.quadrature import Kernel, equal_weights, quadrature_rule, worst_case_error
from scatterqual.tables import loglog_slope
from scatterqual.testfunctions import lacunary, multi_indices

pytestmark = pytest.mark.acceptance

UNIT = ConvexDomain.box([0.0], [1.0])
SQUARE = ConvexDomain.unit_cube(2)


def report(name, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def test_limit_constant_interval():
    cfg = ExperimentConfig(domain=UNIT, gamma=1.0, n_list=(1000,), trials=200, seed=0)
    row = limit_constant_check(cfg).rows[0]
    report("limit constant d=1", row["rel_error"] < 0.05,
           f"estimate {row['mean']:.5f} vs 0.5, relative error {row['rel_error']:.4f} (tol 0.05)")


def test_limit_constant_square():
    cfg = ExperimentConfig(domain=SQUARE, gamma=2.0, n_list=(4096,), trials=50, seed=0, mesh=1 / 512,
                           threads=4)
    row = limit_constant_check(cfg).rows[0]
    report("limit constant d=2", row["rel_error"] < 0.10,
           f"estimate {row['mean']:.5f} vs 1/pi = {1 / math.pi:.6f}, relative error {row['rel_error']:.4f} (tol 0.10)")


def test_random_covering_rates():
    base = dict(domain=SQUARE, n_list=(64, 256, 1024, 4096), trials=50, seed=0, threads=4)
    fin = random_rate_study(ExperimentConfig(gamma=2.0, alpha=2.0, **base))
    inf = random_rate_study(ExperimentConfig(gamma=math.inf, alpha=1.0, **base))
    norm = inf.column("normalized")
    band = np.max(np.abs(norm / norm.mean() - 1.0))
    ok = abs(fin.fit.slope + 1.0) <= 0.10 and band <= 0.20
    report("random covering rates", ok,
           f"gamma=2 slope {fin.fit.slope:.4f} (target -1 +- 0.10); gamma=inf normalized "
           f"{np.round(norm, 4).tolist()} max deviation from mean {band:.3f} (tol 0.20)")


def test_grid_baseline():
    ks = [8, 16, 32, 64]
    inside, norms = [], []
    for k in ks:
        P = grid_points(SQUARE, k * k)
        cov = covering_radius(SQUARE, P, 1 / (8 * k))
        exact = math.sqrt(2) / (2 * k)
        inside.append(cov.lower <= exact <= cov.upper)
        norms.append(lgamma_norm(SQUARE, P, 2.0, 1 / (8 * k)).value)
    slope = loglog_slope([k * k for k in ks], norms).slope
    ok = all(inside) and abs(slope + 0.5) <= 0.025
    report("grid baseline", ok, f"covering radius bracketed {inside}; L_2 slope {slope:.4f} (target -0.5 +- 5%)")


def test_kernel_quadrature_closed_form():
    rule = quadrature_rule(UNIT, np.array([[0.5]]), Kernel(0.5))
    w_ref = 2.0 - 2.0 * math.exp(-0.5)
    wce_ref = math.sqrt(2.0 / math.e - w_ref**2)
    w, wce = rule.weights[0], worst_case_error(rule)
    identity = abs(wce**2 - (rule.initial_error_sq - rule.embedding @ rule.weights))
    rng = np.random.default_rng(0)
    violations = 0
    for _ in range(100):
        P = rng.uniform(size=(int(rng.integers(2, 40)), 1))
        r = quadrature_rule(UNIT, P, Kernel(0.5))
        violations += worst_case_error(r) > worst_case_error(r, equal_weights(r, 1.0))
    ok = abs(w - w_ref) <= 1e-6 and abs(wce - wce_ref) <= 1e-6 and identity <= 1e-10 and violations == 0
    report("kernel quadrature closed form", ok,
           f"w* {w:.7f} (oracle {w_ref:.7f}), wce {wce:.7f} (oracle {wce_ref:.7f}), "
           f"identity residual {identity:.1e}, equal-weight violations {violations}/100")


def test_integration_rate_random_points():
    t = integration_rate_study([16, 32, 64, 128, 256, 512, 1024], trials=20, seed=0, nu=0.5, threads=4)
    report("integration rate", abs(t.fit.slope + 1.0) <= 0.15, f"wce slope {t.fit.slope:.4f} (target -1 +- 0.15)")


def test_mls_reproduction():
    P = SQUARE.sample_uniform(np.random.SeedSequence(1), 2000)
    Y = np.random.default_rng(2).uniform(size=(1000, 2))
    worst_rel, worst_sum = 0.0, 0.0
    for m in (0, 1, 2, 3):
        W, deg, _, failed = MLSOperator(P, degree=m).weight_matrix(Y, 0.12)
        assert not failed.any() and np.all(deg == m)
        worst_sum = max(worst_sum, float(np.max(np.abs(np.asarray(W.sum(axis=1)).ravel() - 1.0))))
        for k in range(m + 1):
            for a, b in multi_indices(2, k):
                p = lambda Z: (Z[:, 0] - 0.3) ** a * (Z[:, 1] + 0.2) ** b
                exact = p(Y)
                worst_rel = max(worst_rel, float(np.max(np.abs(W @ p(P.points) - exact)) / np.max(np.abs(exact))))
    report("MLS reproduction", worst_rel <= 1e-9 and worst_sum <= 1e-10,
           f"max relative reproduction error {worst_rel:.1e}, max |sum u - 1| {worst_sum:.1e}")


def test_approximation_rate_q_ge_p():
    f = lacunary(2, 2)
    t = rate_study(f, make_family("grid", SQUARE), [256, 1024, 4096, 16384], 2, math.inf, math.inf, SQUARE,
                   degree=2, mesh_factor=0.5, threads=4)
    slope = t.fit.slope
    report("approximation rate q >= p", abs(slope + 1.0) <= 0.15,
           f"L_inf error slope {slope:.4f} vs n (target -s/d = -1 +- 15%)")


def test_equivalence_band():
    t = equivalence_study(["grid", "random", "grid-with-hole"], 2, math.inf, 1.0, [256, 1024, 4096],
                          seed=0, threads=4)
    below = all(r["lower"] <= r["measured"] and r["lower"] <= r["test_error"] for r in t.rows)
    assert below, "fooling lower bound exceeds the measured error"
    band = t.meta["band"]
    report("equivalence band", band <= 10.0 and below,
           f"measured / ||dist||_2^2 ratio band {band:.3f} (tol 10), lower <= measured in all {len(t.rows)} rows")


def test_hole_threshold():
    ns = [256, 1024, 4096, 16384]
    at = hole_demo(2, 2.0, ns, hole_exponent=0.25, threads=4).fit.slope
    big = hole_demo(2, 2.0, ns, hole_exponent=0.125, threads=4).fit.slope
    ok = abs(at + 0.5) <= 0.10 and big >= -0.5 + 0.05
    report("hole threshold", ok, f"exponent 1/4 slope {at:.4f} (target -0.5 +- 0.10); exponent 1/8 slope "
                                 f"{big:.4f} (must be >= -0.45)")
