from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    half_width: float  # 95% confidence half-width
    residuals: np.ndarray = field(repr=False)


def loglog_slope(x, y) -> SlopeFit:
    """Ordinary least squares fit of log y against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points for a slope")
    res = stats.linregress(lx, ly)
    dof = lx.size - 2
    hw = float(stats.t.ppf(0.975, dof) * res.stderr) if dof > 0 else math.nan
    resid = ly - (res.intercept + res.slope * lx)
    return SlopeFit(float(res.slope), float(res.intercept), hw, resid)


@dataclass
class RateTable:
    """Rows of per-n statistics plus a log-log slope fit.

    ``columns`` fixes the column order for CSV export; every row is a dict
    keyed by those names.
    """

    columns: list
    rows: list = field(default_factory=list)
    fit: SlopeFit = None
    reference: float = None
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def fit_slope(self, x="n", y="mean"):
        self.fit = loglog_slope(self.column(x), self.column(y))
        return self.fit

    def __str__(self):
        head = " ".join(f"{c:>14s}" for c in self.columns)
        lines = [head]
        for r in self.rows:
            lines.append(" ".join(f"{r[c]:>14.6g}" if isinstance(r[c], (int, float, np.floating, np.integer))
                                  else f"{str(r[c]):>14s}" for c in self.columns))
        if self.fit is not None:
            lines.append(f"slope {self.fit.slope:.4f} ± {self.fit.half_width:.4f}")
        if self.reference is not None:
            lines.append(f"reference {self.reference:.6g}")
        return "\n".join(lines)
