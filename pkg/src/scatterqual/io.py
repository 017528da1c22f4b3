"""CSV exchange, domain strings, flat key=value configs and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .domain import ConvexDomain
from .errors import InputError
from .points import PointSet

try:
    from importlib.metadata import version as _pkg_version
    VERSION = _pkg_version("artifact")
except Exception:  # not installed, e.g. running from a source tree
    VERSION = "0.1.0"


# -- atomic files -------------------------------------------------------------

def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- CSV ----------------------------------------------------------------------

def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_points_csv(path) -> PointSet:
    """Points from CSV, one per row; a non-numeric first row is a header.
    Lines starting with '#' are skipped."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.lstrip().startswith("#")) if r]
    except FileNotFoundError:
        raise InputError(f"no such points file: {path}") from None
    if rows and not all(_is_number(v) for v in rows[0]):
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no points")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise InputError(f"{path}: row {i + 1} has {len(r)} fields, expected {width}")
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return PointSet(arr, info={"source": str(path)})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(columns, rows, comments=None, footer=None):
    """CSV text with an optional '# key: value' comment block and footer rows."""
    buf = io.StringIO()
    for k, v in (comments or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    if columns:
        w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns] if isinstance(r, dict) else [_fmt(x) for x in r])
    for r in footer or []:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def points_csv(points, header=False):
    """One point per row, d columns; a header row only on request."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = [f"x{j + 1}" for j in range(pts.shape[1])]
    return csv_text(cols if header else None, pts.tolist())


def write_points_csv(path, points, header=False):
    atomic_write(path, points_csv(points, header))


def cover_csv(cover):
    """One row per cube: order index, centre, radius, ball centre, ball radius, validity."""
    d = cover.centers.shape[1]
    cols = (["order"] + [f"y{j + 1}" for j in range(d)] + ["radius"]
            + [f"z{j + 1}" for j in range(d)] + ["ball_radius", "valid"])
    rows = []
    for i in range(cover.size):
        rows.append([i, *cover.centers[i], cover.radii[i], *cover.ball_centers[i], cover.ball_radii[i],
                     int(cover.ball_valid[i])])
    return csv_text(cols, rows)


def table_csv(table, comments=None):
    text = csv_text(table.columns, table.rows, comments)
    if table.fit is not None:
        text += f"# slope: {float(table.fit.slope)!r}\n# slope_half_width: {float(table.fit.half_width)!r}\n"
    if table.reference is not None:
        text += f"# reference: {float(table.reference)!r}\n"
    return text


def evaluations_csv(Y, f_values, approx_values):
    """Approximant export: coordinates, f, S_P f, residual."""
    Y = np.atleast_2d(Y)
    cols = [f"x{j + 1}" for j in range(Y.shape[1])] + ["f", "approx", "residual"]
    rows = np.column_stack([Y, f_values, approx_values, f_values - approx_values])
    return csv_text(cols, rows.tolist())


def rule_csv(rule, wce, jitter):
    """Quadrature rule export with a footer row wce, c, jitter."""
    d = rule.points.shape[1]
    cols = [f"x{j + 1}" for j in range(d)] + ["weight"]
    rows = np.column_stack([rule.points, rule.weights]).tolist()
    footer = [["wce", "c", "jitter"], [wce, rule.initial_error_sq, jitter]]
    return csv_text(cols, rows, footer=footer)


def samples_csv(func, domain, mesh):
    """Sample a function on the in-domain midpoint grid."""
    from .mls import quadrature_nodes

    Y, _ = quadrature_nodes(domain, mesh)
    cols = [f"x{j + 1}" for j in range(domain.dim)] + ["value"]
    return csv_text(cols, np.column_stack([Y, func(Y)]).tolist())


# -- domains ------------------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PAIR = re.compile(rf"\(\s*({_NUM})\s*,\s*({_NUM})\s*\)")


def parse_domain(text) -> ConvexDomain:
    """Domain from a string.

    ``box(0,1)^2``, ``box(0,1)x(0,2)``, ``cube^3``, ``ball(0.5)^2`` (centred at
    the origin), ``simplex^2``.
    """
    s = text.replace(" ", "").lower()
    m = re.fullmatch(r"(cube|simplex)\^(\d+)", s)
    if m:
        d = int(m.group(2))
        return ConvexDomain.unit_cube(d) if m.group(1) == "cube" else ConvexDomain.simplex(d)
    m = re.fullmatch(rf"ball\(({_NUM})\)\^(\d+)", s)
    if m:
        return ConvexDomain.ball(np.zeros(int(m.group(2))), float(m.group(1)))
    if s.startswith("box"):
        body = s[3:]
        m = re.fullmatch(rf"(\({_NUM},{_NUM}\))\^(\d+)", body)
        if m:
            pairs = [_PAIR.fullmatch(m.group(1)).groups()] * int(m.group(2))
        else:
            parts = body.split("x")
            pairs = [_PAIR.fullmatch(p).groups() if _PAIR.fullmatch(p) else None for p in parts]
            if not parts or None in pairs:
                raise InputError(f"cannot parse domain {text!r}")
        lo = [float(a) for a, _ in pairs]
        hi = [float(b) for _, b in pairs]
        return ConvexDomain.box(lo, hi)
    raise InputError(f"cannot parse domain {text!r}")


# -- configs ------------------------------------------------------------------

def parse_float(v):
    v = str(v).strip().lower()
    if v in ("inf", "infinity", "+inf"):
        return math.inf
    return float(v)


def parse_int_list(v):
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).replace(" ", "").split(",") if x]


def parse_str_list(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    return [x for x in str(v).replace(" ", "").split(",") if x]


CONFIG_KEYS = {
    "domain": str, "d": int, "gamma": parse_float, "alpha": float, "n": parse_int_list,
    "trials": int, "seed": int, "mesh": float, "mesh_factor": float, "family": str,
    "families": parse_str_list, "threads": int, "out": str, "points": str, "h": float,
    "c": float, "s": float, "p": parse_float, "q": parse_float, "degree": int,
    "support_factor": float, "policy": str, "function": str, "hole_exponent": float,
    "hole_scale": float, "nu": float, "lengthscale": float, "qmc_log2": int,
    "sample_mesh": float,
}


def convert(key, value):
    if key not in CONFIG_KEYS:
        raise InputError(f"unknown config key {key!r}")
    try:
        return CONFIG_KEYS[key](value)
    except (TypeError, ValueError):
        raise InputError(f"bad value {value!r} for {key}") from None


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file; '#' starts a comment.

    Unknown keys and malformed lines raise InputError with the line number.
    """
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise InputError(f"no such config file: {path}") from None
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{no}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{no}: unknown config key {key!r}")
        try:
            out[key] = convert(key, value)
        except InputError as exc:
            raise InputError(f"{path}:{no}: {exc}") from None
    return out


def config_hash(values: dict) -> str:
    text = "\n".join(f"{k}={values[k]!r}" for k in sorted(values))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- manifests ----------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    argv: list
    config: dict
    seed: int
    version: str = VERSION
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    exit_code: int = 0

    def write(self, path):
        atomic_write(path, json.dumps(asdict(self), indent=2, default=str) + "\n")

    @classmethod
    def read(cls, path):
        try:
            return cls(**json.loads(Path(path).read_text()))
        except (FileNotFoundError, json.JSONDecodeError, TypeError) as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from None
