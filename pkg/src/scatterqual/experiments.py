"""Randomized and designed experiments on point-set quality.

Every trial draws from its own substream SeedSequence([seed, n, trial]), so
tables do not depend on the schedule or on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cover import build_good_cover, empty_balls
from .distance import covering_radius, lgamma_norm, lgamma_norm_1d_exact
from .domain import ConvexDomain, unit_ball_volume
from .errors import InputError, NumericalFailure
from .families import gamma_exponent, grid_with_hole, make_family
from .fooling import multi_hole_fooling, reference_norms, single_hole_fooling
from .mls import MLSOperator, approximate, lq_error
from .quadrature import Kernel, quadrature_rule, worst_case_error
from .tables import RateTable, loglog_slope
from .testfunctions import lacunary


@dataclass
class ExperimentConfig:
    domain: ConvexDomain = field(default_factory=lambda: ConvexDomain.unit_cube(2))
    gamma: float = 2.0
    alpha: float = 1.0
    n_list: tuple = (64, 256, 1024, 4096)
    trials: int = 10
    seed: int = 0
    mesh_factor: float = 0.125  # mesh = mesh_factor * (vol / n)^(1/d)
    mesh: float = None  # fixed mesh, overrides mesh_factor
    family: str = "random"
    threads: int = 1
    out: str = None

    def __post_init__(self):
        self.n_list = tuple(int(n) for n in self.n_list)
        if not self.n_list:
            raise InputError("empty n schedule")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise InputError("n schedule must be strictly increasing")
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        if not self.gamma > 0:
            raise InputError("gamma must be positive")
        if self.threads < 1:
            raise InputError("threads must be at least 1")

    def mesh_for(self, n):
        if self.mesh:
            return float(self.mesh)
        return self.mesh_factor * (self.domain.volume() / n) ** (1.0 / self.domain.dim)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _trial_norms(cfg, n, gamma, exact_1d):
    """Per-trial ||dist(., P)||_{L_gamma}; failed trials come back as NaN."""
    dom = cfg.domain
    family = make_family(cfg.family, dom)

    def one(t):
        P = family(n, np.random.SeedSequence([cfg.seed, n, t]))
        try:
            if exact_1d:
                lo, hi = dom.bounding_box
                return lgamma_norm_1d_exact((lo[0], hi[0]), P, gamma)
            return lgamma_norm(dom, P, gamma, cfg.mesh_for(n)).value
        except NumericalFailure:
            return math.nan

    return np.array(_map(one, list(range(cfg.trials)), cfg.threads))


def _use_exact_1d(dom):
    return dom.dim == 1 and dom.kind == "axis-box"


def _summary(vals):
    ok = vals[np.isfinite(vals)]
    if ok.size == 0:
        raise NumericalFailure("every trial failed")
    se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else math.nan
    q05, q95 = np.quantile(ok, [0.05, 0.95])
    return float(ok.mean()), se, float(q05), float(q95), int(vals.size - ok.size)


def random_rate_study(cfg: ExperimentConfig) -> RateTable:
    """Mean of ||dist(., P_n)||_{L_gamma}^alpha over trials for each n.

    Finite gamma: slope of log mean against log n.  gamma = inf: the column
    ``normalized`` is mean * (n / log n)^(alpha/d) and the slope is fitted
    against log(log n / n), which should be alpha / d.
    """
    d = cfg.domain.dim
    cols = ["n", "mean", "stderr", "q05", "q95", "normalized", "dropped"]
    table = RateTable(cols, meta={"gamma": cfg.gamma, "alpha": cfg.alpha, "family": cfg.family})
    exact = _use_exact_1d(cfg.domain)
    for n in cfg.n_list:
        vals = _trial_norms(cfg, n, cfg.gamma, exact) ** cfg.alpha
        mean, se, q05, q95, dropped = _summary(vals)
        if math.isinf(cfg.gamma):
            norm = mean * (n / math.log(n)) ** (cfg.alpha / d)
        else:
            norm = mean * n ** (cfg.alpha / d)
        table.rows.append(dict(n=n, mean=mean, stderr=se, q05=q05, q95=q95, normalized=norm, dropped=dropped))
    if len(cfg.n_list) > 1:
        if math.isinf(cfg.gamma):
            ns = np.array(cfg.n_list, dtype=float)
            table.fit = loglog_slope(np.log(ns) / ns, table.column("mean"))
        else:
            table.fit_slope("n", "mean")
    return table


def limit_constant(domain, gamma):
    """(vol / vol(B_1))^(gamma/d) Gamma(1 + gamma/d)."""
    d = domain.dim
    return (domain.volume() / unit_ball_volume(d)) ** (gamma / d) * math.gamma(1.0 + gamma / d)


def limit_constant_check(cfg: ExperimentConfig) -> RateTable:
    """Mean of n^(gamma/d) (1/vol) int dist(x, P_n)^gamma dx against its limit."""
    if math.isinf(cfg.gamma):
        raise InputError("the limit constant needs finite gamma")
    dom = cfg.domain
    d, vol = dom.dim, dom.volume()
    ref = limit_constant(dom, cfg.gamma)
    table = RateTable(["n", "mean", "stderr", "q05", "q95", "reference", "rel_error", "dropped"],
                      reference=ref, meta={"gamma": cfg.gamma})
    exact = _use_exact_1d(dom)
    for n in cfg.n_list:
        norms = _trial_norms(cfg, n, cfg.gamma, exact)
        stat = n ** (cfg.gamma / d) * norms**cfg.gamma / vol
        mean, se, q05, q95, dropped = _summary(stat)
        table.rows.append(dict(n=n, mean=mean, stderr=se, q05=q05, q95=q95, reference=ref,
                               rel_error=abs(mean - ref) / ref, dropped=dropped))
    return table


def hole_demo(d, gamma, n_list, hole_exponent, seed=0, hole_scale=0.4, mesh_factor=0.25,
              threads=1) -> RateTable:
    """||dist(., P_n)||_{L_gamma} for grid points with a hole of radius
    hole_scale * n^(-hole_exponent) around the centre of the unit cube."""
    dom = ConvexDomain.unit_cube(d)
    table = RateTable(["n", "hole_radius", "norm", "lower", "upper"],
                      meta={"gamma": gamma, "hole_exponent": hole_exponent, "seed": seed})

    def one(n):
        r = hole_scale * n ** (-hole_exponent)
        if r >= 0.5:
            raise NumericalFailure(f"hole of radius {r:.4g} swallows the domain")
        P = grid_with_hole(dom, n, r)
        est = lgamma_norm(dom, P, gamma, mesh_factor * n ** (-1.0 / d))
        return dict(n=n, hole_radius=r, norm=est.value, lower=est.lower, upper=est.upper)

    table.rows = _map(one, list(n_list), threads)
    table.fit_slope("n", "norm")
    return table


def _function_norm_bound(f, s, p, domain):
    """Upper bound for ||f||_{W^s_p(domain)} from analytic sup bounds."""
    bounds = f.sup_bounds(s)
    if math.isinf(p):
        return max(bounds)
    from .testfunctions import multi_indices
    vol = domain.volume()
    return math.fsum(len(multi_indices(domain.dim, k)) * vol * b**p for k, b in enumerate(bounds)) ** (1.0 / p)


def equivalence_study(families, s, p, q, n_list, seed=0, domain=None, degree=None, c=0.5,
                      support_factor=3.0, mesh_factor=0.25, threads=1, test_function=None) -> RateTable:
    """Measured MLS error against the geometric predictor and a fooling lower bound.

    ``test_error`` is the L_q error on a test function divided by a bound on
    its W^s_p norm, ``fooling_error`` the error on the normalized fooling
    function (S_P of it is zero), and ``measured`` the larger of the two;
    each is the error on a function from the unit ball.  The predictor is
    ||dist||_{L_gamma}^s for q < p and h^{s - d(1/p - 1/q)} otherwise.
    """
    dom = domain or ConvexDomain.unit_cube(2)
    d = dom.dim
    degree = int(math.ceil(s)) if degree is None else degree
    f = test_function or lacunary(int(s), d)
    fnorm = _function_norm_bound(f, int(s), p, dom)
    gamma = gamma_exponent(s, p, q)
    ref = reference_norms(d, q, p, int(s))
    inv = lambda t: 0.0 if math.isinf(t) else 1.0 / t
    cols = ["family", "n", "measured", "test_error", "fooling_error", "predictor", "lower",
            "ratio", "lower_ratio"]
    table = RateTable(cols, meta={"s": s, "p": p, "q": q, "gamma": gamma})
    for fam in families:
        gen = make_family(fam, dom)
        for n in n_list:
            P = gen(n, np.random.SeedSequence([seed, n]))
            mesh = mesh_factor * (dom.volume() / P.n) ** (1.0 / d)
            op = MLSOperator(P, degree=degree, support_factor=support_factor)
            cov = covering_radius(dom, P, mesh)
            if q < p:
                cover = empty_balls(build_good_cover(dom, P, c), dom, P)
                pred = lgamma_norm(dom, P, gamma, mesh).value ** s
                _, lower = multi_hole_fooling(dom, P, cover, q, p, int(s), reference=ref)
                approx = lambda Y: approximate(f, P, Y, "good-cover", cover=cover, operator=op,
                                               support_factor=support_factor, threads=threads).values
            else:
                pred = cov.value ** (s - d * (inv(p) - inv(q)))
                _, lower = single_hole_fooling(dom, P, q, p, int(s), covering=cov, reference=ref)
                approx = lambda Y: approximate(f, P, Y, "global", covering=cov, operator=op,
                                               support_factor=support_factor, threads=threads).values
            test_err = lq_error(f, approx, dom, q, mesh).value / fnorm
            # S_P of a function vanishing on P is identically zero
            fool_err = lower
            measured = max(test_err, fool_err)
            if not lower <= measured:
                raise NumericalFailure(f"fooling bound {lower:.3e} exceeds measured error {measured:.3e}")
            table.rows.append(dict(family=fam, n=P.n, measured=measured, test_error=test_err,
                                   fooling_error=fool_err, predictor=pred, lower=lower,
                                   ratio=measured / pred, lower_ratio=lower / pred))
    ratios = table.column("ratio")
    table.meta["band"] = float(ratios.max() / ratios.min())
    return table


def integration_rate_study(n_list, trials=20, seed=0, nu=0.5, domain=None, threads=1) -> RateTable:
    """Mean worst-case error of optimal-weight quadrature on uniform random points."""
    dom = domain or ConvexDomain.box([0.0], [1.0])
    kernel = Kernel(nu, 1.0, dom.dim)
    table = RateTable(["n", "mean", "stderr", "q05", "q95", "dropped"], meta={"nu": nu})
    for n in n_list:
        def one(t, n=n):
            P = dom.sample_uniform(np.random.SeedSequence([seed, n, t]), n)
            return worst_case_error(quadrature_rule(dom, P, kernel))
        vals = np.array(_map(one, list(range(trials)), threads))
        mean, se, q05, q95, dropped = _summary(vals)
        table.rows.append(dict(n=n, mean=mean, stderr=se, q05=q05, q95=q95, dropped=dropped))
    table.fit_slope("n", "mean")
    return table
