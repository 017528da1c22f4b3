"""Command-line front end.

Option precedence, lowest first: built-in defaults, SCATTERQUAL_SEED (seed
only), the --config file, explicit command-line flags.  Every run writes its
CSV output and a manifest.json into --out.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io as sio
from .cover import build_good_cover, empty_balls
from .distance import greedy_separated_subset, lgamma_norm
from .errors import InputError, NumericalFailure
from .experiments import (ExperimentConfig, equivalence_study, hole_demo, limit_constant_check,
                          random_rate_study)
from .families import make_family
from .fooling import multi_hole_fooling, single_hole_fooling
from .mls import approximate, lq_error, quadrature_nodes, rate_study
from .quadrature import IntegrationSpec, Kernel, equal_weights, quadrature_rule, worst_case_error
from .testfunctions import catalogue

DEFAULTS = {
    "domain": None, "d": 2, "gamma": 2.0, "alpha": 1.0, "n": [64, 256, 1024, 4096], "trials": 10,
    "seed": 0, "mesh": None, "mesh_factor": 0.125, "family": "random",
    "families": ["grid", "random", "grid-with-hole"], "threads": 1, "out": "scatterqual_out",
    "points": None, "h": None, "c": 0.5, "s": 2.0, "p": math.inf, "q": 1.0, "degree": None,
    "support_factor": 3.0, "policy": "global", "function": "lacunary", "hole_exponent": 0.25,
    "hole_scale": 0.4, "nu": 0.5, "lengthscale": 1.0, "qmc_log2": 14, "sample_mesh": None,
    "header": False,
}

COMMANDS = {
    "distnorm": ("L_gamma norm of dist(., P) or the covering radius", ["gamma"]),
    "subset": ("greedy h-separated subset", ["h"]),
    "cover": ("good-cube cover with empty balls", ["c"]),
    "approx": ("MLS approximation error, or a rate study without --points",
               ["function", "degree", "policy", "q", "s", "p", "c", "support_factor", "n", "family"]),
    "lower": ("fooling-function lower bound", ["s", "p", "q", "c", "sample_mesh"]),
    "quad": ("optimal-weight kernel quadrature", ["nu", "lengthscale", "qmc_log2"]),
    "random-rates": ("covering rates of random points", ["d", "gamma", "alpha", "n", "trials", "family"]),
    "limit-const": ("limit constant of the normalized L_gamma statistic", ["d", "gamma", "n", "trials"]),
    "hole-demo": ("grid points with a shrinking hole", ["d", "gamma", "n", "hole_exponent", "hole_scale"]),
    "equiv": ("measured error, geometric predictor and lower bound",
              ["families", "s", "p", "q", "n", "d", "c", "degree", "support_factor"]),
    "replay": ("rerun the command recorded in a manifest", []),
}

GLOBAL = ["config", "seed", "out", "mesh", "threads", "points", "domain", "mesh_factor"]


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _Usage(message)


def _add(p, key):
    flag = "--" + key.replace("_", "-")
    conv = sio.CONFIG_KEYS.get(key, str)
    p.add_argument(flag, dest=key, type=str, default=argparse.SUPPRESS,
                   help=f"({conv.__name__ if hasattr(conv, '__name__') else 'value'})")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    for k in GLOBAL:
        _add(common, k)
    parser = _Parser(prog="scatterqual", description="Quality of scattered point sets.",
                     parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (text, keys) in COMMANDS.items():
        sp = sub.add_parser(name, help=text, description=text, parents=[common])
        for k in keys:
            _add(sp, k)
        sp.add_argument("--header", action="store_true", default=argparse.SUPPRESS,
                        help="write a header row in point CSV output")
        if name == "replay":
            sp.add_argument("manifest")
    return parser


def resolve(args) -> dict:
    """Merge defaults, environment, config file and flags."""
    opts = dict(DEFAULTS)
    env = os.environ.get("SCATTERQUAL_SEED")
    if env is not None:
        opts["seed"] = sio.convert("seed", env)
    given = {k: v for k, v in vars(args).items() if k not in ("command", "manifest")}
    if "config" in given:
        opts.update(sio.load_config(given.pop("config")))
    opts["header"] = bool(given.pop("header", False))
    for k, v in given.items():
        opts[k] = sio.convert(k, v)
    if opts["domain"] is None:
        opts["domain"] = f"box(0,1)^{opts['d']}"
    return opts


def _domain(opts):
    return sio.parse_domain(opts["domain"])


def _points(opts, required=True):
    if opts["points"] is None:
        if required:
            raise InputError("this command needs --points <csv>")
        return None
    return sio.read_points_csv(opts["points"])


def _mesh(opts, dom, n):
    if opts["mesh"]:
        return opts["mesh"]
    return opts["mesh_factor"] * (dom.volume() / n) ** (1.0 / dom.dim)


# -- commands ------------------------------------------------------------------
# each returns {file name: CSV text} and a short summary for stdout

def cmd_distnorm(opts):
    dom, P = _domain(opts), _points(opts)
    est = lgamma_norm(dom, P, opts["gamma"], _mesh(opts, dom, P.n))
    rows = [dict(method=est.method, gamma=est.gamma, value=est.value, lower=est.lower, upper=est.upper)]
    text = sio.csv_text(["method", "gamma", "value", "lower", "upper"], rows)
    return {"distnorm.csv": text}, text


def cmd_subset(opts):
    P = _points(opts)
    if opts["h"] is None:
        raise InputError("subset needs --h")
    X, idx = greedy_separated_subset(P, opts["h"])
    text = sio.points_csv(X.points, header=opts["header"])
    return {"subset.csv": text}, f"selected {X.n} of {P.n} points\n"


def cmd_cover(opts):
    dom, P = _domain(opts), _points(opts)
    cover = empty_balls(build_good_cover(dom, P, opts["c"]), dom, P)
    text = sio.cover_csv(cover)
    return {"cover.csv": text}, f"{cover.size} cubes, multiplicity {cover.multiplicity_observed}\n"


def cmd_approx(opts):
    dom = _domain(opts)
    funcs = catalogue(dom.dim)
    if opts["function"] not in funcs:
        raise InputError(f"unknown function {opts['function']!r}; choose from {sorted(funcs)}")
    f = funcs[opts["function"]]
    degree = opts["degree"] if opts["degree"] is not None else int(math.ceil(opts["s"]))
    P = _points(opts, required=False)
    if P is None:
        fam = make_family(opts["family"], dom)
        table = rate_study(f, fam, opts["n"], opts["s"], opts["p"], opts["q"], dom, seed=opts["seed"],
                           degree=degree, support_factor=opts["support_factor"], c=opts["c"],
                           threads=opts["threads"])
        text = sio.table_csv(table, _comments(opts))
        return {"approx_rates.csv": text}, str(table) + "\n"
    mesh = _mesh(opts, dom, P.n)
    cover = build_good_cover(dom, P, opts["c"]) if opts["policy"] == "good-cover" else None
    run = lambda Y: approximate(f, P, Y, opts["policy"], domain=dom, cover=cover, degree=degree,
                                support_factor=opts["support_factor"], threads=opts["threads"])
    Y, _ = quadrature_nodes(dom, mesh)
    res = run(Y)
    err = lq_error(f, lambda Z: run(Z).values, dom, opts["q"], mesh)
    out = {"approx.csv": sio.evaluations_csv(Y, f(Y), res.values)}
    summary = (f"L_{opts['q']} error {err.value:.6g} (mesh/2: {err.refined:.6g}), "
               f"failed points {res.n_failed}, max Lebesgue {np.nanmax(res.lebesgue):.4g}\n")
    out["approx_error.csv"] = sio.csv_text(["q", "error", "refined", "failed"],
                                           [[opts["q"], err.value, err.refined, res.n_failed]])
    return out, summary


def cmd_lower(opts):
    dom, P = _domain(opts), _points(opts)
    s, p, q = int(opts["s"]), opts["p"], opts["q"]
    if q < p:
        cover = empty_balls(build_good_cover(dom, P, opts["c"]), dom, P)
        func, lb = multi_hole_fooling(dom, P, cover, q, p, s)
    else:
        func, lb = single_hole_fooling(dom, P, q, p, s, mesh=_mesh(opts, dom, P.n))
    out = {"lower.csv": sio.csv_text(["s", "p", "q", "lower_bound"], [[s, p, q, lb]])}
    if opts["sample_mesh"]:
        out["fooling_samples.csv"] = sio.samples_csv(func, dom, opts["sample_mesh"])
    return out, f"lower bound {lb:.6g}\n"


def cmd_quad(opts):
    dom, P = _domain(opts), _points(opts)
    kernel = Kernel(opts["nu"], opts["lengthscale"], dom.dim)
    rule = quadrature_rule(dom, P, kernel, IntegrationSpec(opts["qmc_log2"], opts["seed"]))
    wce = worst_case_error(rule)
    eq = worst_case_error(rule, equal_weights(rule, dom.volume()))
    text = sio.rule_csv(rule, wce, rule.jitter)
    return {"quad.csv": text}, f"wce {wce:.6g} (equal weights {eq:.6g}), jitter {rule.jitter:.3g}\n"


def _experiment(opts):
    return ExperimentConfig(domain=_domain(opts), gamma=opts["gamma"], alpha=opts["alpha"],
                            n_list=opts["n"], trials=opts["trials"], seed=opts["seed"],
                            mesh_factor=opts["mesh_factor"], mesh=opts["mesh"], family=opts["family"],
                            threads=opts["threads"], out=opts["out"])


def _comments(opts):
    snap = {k: v for k, v in opts.items() if k not in ("out", "threads")}
    return {"config_hash": sio.config_hash(snap), "seed": opts["seed"], "version": f"scatterqual {sio.VERSION}"}


def cmd_random_rates(opts):
    table = random_rate_study(_experiment(opts))
    return {"random_rates.csv": sio.table_csv(table, _comments(opts))}, str(table) + "\n"


def cmd_limit_const(opts):
    table = limit_constant_check(_experiment(opts))
    return {"limit_const.csv": sio.table_csv(table, _comments(opts))}, str(table) + "\n"


def cmd_hole_demo(opts):
    d = sio.parse_domain(opts["domain"]).dim
    table = hole_demo(d, opts["gamma"], opts["n"], opts["hole_exponent"], seed=opts["seed"],
                      hole_scale=opts["hole_scale"], threads=opts["threads"])
    return {"hole_demo.csv": sio.table_csv(table, _comments(opts))}, str(table) + "\n"


def cmd_equiv(opts):
    table = equivalence_study(opts["families"], opts["s"], opts["p"], opts["q"], opts["n"],
                              seed=opts["seed"], domain=_domain(opts), degree=opts["degree"],
                              c=opts["c"], support_factor=opts["support_factor"], threads=opts["threads"])
    summary = str(table) + f"\nratio band (max/min) {table.meta['band']:.3g}\n"
    return {"equiv.csv": sio.table_csv(table, _comments(opts))}, summary


HANDLERS = {
    "distnorm": cmd_distnorm, "subset": cmd_subset, "cover": cmd_cover, "approx": cmd_approx,
    "lower": cmd_lower, "quad": cmd_quad, "random-rates": cmd_random_rates,
    "limit-const": cmd_limit_const, "hole-demo": cmd_hole_demo, "equiv": cmd_equiv,
}


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage:
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    if args.command == "replay":
        try:
            man = sio.RunManifest.read(args.manifest)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        argv = list(man.argv)
        if getattr(args, "out", None):
            argv += ["--out", args.out]
        return main(argv)
    started = _now()
    manifest = None
    problem = None
    try:
        opts = resolve(args)
        manifest = sio.RunManifest(args.command, argv, {k: v for k, v in opts.items()}, opts["seed"],
                                   started=started)
        files, summary = HANDLERS[args.command](opts)
        out = Path(opts["out"])
        for name, text in files.items():
            sio.atomic_write(out / name, text)
            manifest.outputs.append(str(out / name))
        sys.stdout.write(summary)
        code = 0
    except (InputError, FileNotFoundError) as exc:
        problem = f"input error: {exc}"
        code = 1
    except NumericalFailure as exc:
        problem = f"numerical failure: {exc}"
        code = 2
    if problem:
        print(problem, file=sys.stderr)
    if manifest is not None:
        manifest.finished = _now()
        manifest.exit_code = code
        if problem:
            manifest.diagnostics.append(problem)
        manifest.write(Path(manifest.config["out"]) / "manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
