"""Experiment reports: tabular rows, slope fits, pass/fail checks."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1


def loglog_slope(x, y, yerr=None):
    """Least-squares slope of log|y| against log x.

    With ``yerr`` the fit is weighted by the delta-method variance of
    log|y|, and the returned standard error follows from it; otherwise the
    standard error comes from the residuals.

    Returns
    -------
    slope, stderr : float
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 2:
        raise ValueError("need at least two points for a slope")
    if np.any(y <= 0) or np.any(x <= 0):
        return float("nan"), float("nan")
    lx, ly = np.log(x), np.log(y)
    X = np.stack([np.ones_like(lx), lx], axis=1)
    if yerr is not None:
        s = np.maximum(np.asarray(yerr, dtype=float) / y, 1e-300)
        Wt = 1.0 / s**2
        XtW = X.T * Wt
        cov = np.linalg.inv(XtW @ X)
        beta = cov @ (XtW @ ly)
        return float(beta[1]), float(math.sqrt(cov[1, 1]))
    beta, *_ = np.linalg.lstsq(X, ly, rcond=None)
    if len(x) > 2:
        res = ly - X @ beta
        s2 = float(res @ res) / (len(x) - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        return float(beta[1]), float(math.sqrt(cov[1, 1]))
    return float(beta[1]), 0.0


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class ExperimentReport:
    name: str
    rows: list
    meta: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def failed_checks(self):
        return [k for k, v in self.checks.items() if not v]

    def column(self, key):
        return np.array([r[key] for r in self.rows])

    def fit_slope(self, xkey, ykey, errkey=None, label=None):
        err = self.column(errkey) if errkey else None
        slope, se = loglog_slope(self.column(xkey), self.column(ykey), err)
        self.slopes[label or ykey] = {"slope": slope, "stderr": se}
        return slope, se

    def columns(self):
        cols = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = self.columns()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(cols)
        for r in self.rows:
            wr.writerow([_fmt(r.get(c, "")) for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def clean(o):
            if isinstance(o, dict):
                return {str(k): clean(v) for k, v in o.items()}
            if isinstance(o, (list, tuple)):
                return [clean(v) for v in o]
            if isinstance(o, np.ndarray):
                return clean(o.tolist())
            if isinstance(o, (np.floating, float)):
                f = float(o)
                return f if math.isfinite(f) else str(f)
            if isinstance(o, (np.integer,)):
                return int(o)
            if isinstance(o, np.bool_):
                return bool(o)
            return o

        return clean({"schema_version": SCHEMA_VERSION, "name": self.name, "rows": self.rows,
                      "slopes": self.slopes, "checks": self.checks, "passed": self.passed,
                      "meta": self.meta})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [f"[{self.name}]"]
        cols = self.columns()
        lines.append("  " + "  ".join(f"{c:>14s}" for c in cols))
        for r in self.rows:
            cells = []
            for c in cols:
                v = r.get(c, "")
                cells.append(f"{v:14.6g}" if isinstance(v, (float, np.floating)) else f"{str(v):>14s}")
            lines.append("  " + "  ".join(cells))
        for k, s in self.slopes.items():
            lines.append(f"  slope[{k}] = {s['slope']:.4f} +- {s['stderr']:.4f}")
        for k, v in self.checks.items():
            lines.append(f"  check {k}: {'PASS' if v else 'FAIL'}")
        return "\n".join(lines)
