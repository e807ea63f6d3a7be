"""Bin-level comparison of empirical and closed-form densities.

All distances work on bin *masses*. An implicit extra bin carries whatever
mass lies outside the histogram range (``1 − Σ masses``), so TV and KL are
computed between full probability vectors.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .estimation import HistogramDensity
from .stationary import GridDensity


def bin_average(density: GridDensity, edges) -> np.ndarray:
    """Mass of ``density`` in each bin, via the cumulative trapezoid on its grid."""
    edges = np.asarray(edges, dtype=float)
    g = density.grid
    if edges[0] < g[0] - 1e-12 or edges[-1] > g[-1] + 1e-12:
        raise ValueError("density grid does not cover the bin range")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density.values[1:] + density.values[:-1]) * np.diff(g))])
    return np.diff(np.interp(edges, g, cum))


def _with_tail(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("bin masses must be non-negative")
    return np.append(p, max(0.0, 1.0 - float(p.sum())))


def total_variation(p_bins, q_bins) -> float:
    """½Σ|p_i − q_i| including the out-of-range remainder."""
    p, q = _with_tail(p_bins), _with_tail(q_bins)
    if p.shape != q.shape:
        raise ValueError("binnings differ")
    return 0.5 * float(np.abs(p - q).sum())


def kl_divergence(p_bins, q_bins) -> float:
    """Σ p log(p/q) with 0·log 0 = 0; ``inf`` when p puts mass where q has none."""
    p, q = _with_tail(p_bins), _with_tail(q_bins)
    if p.shape != q.shape:
        raise ValueError("binnings differ")
    live = p > 0
    if np.any(q[live] == 0):
        return math.inf
    with np.errstate(over="ignore"):
        terms = p[live] * np.log(p[live] / q[live])
    return max(0.0, float(np.sum(terms)))


@dataclass
class ComparisonReport:
    algorithm: str
    seed: int
    steps: int
    tv_emp_vs_closed: float
    tv_emp_vs_target: float
    kl_emp_vs_closed: float
    max_bin_error: float
    mean_bin_error: float
    z_constant: float
    wall_seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("extra"))
        return d

    def to_json(self) -> str:
        d = self.to_dict()
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return json.dumps(d, indent=2, sort_keys=False) + "\n"


def compare(
    emp_masses,
    closed_masses,
    target_masses,
    *,
    algorithm: str,
    seed: int,
    steps: int,
    z_constant: float,
    wall_seconds: float = 0.0,
    extra: Optional[dict] = None,
) -> ComparisonReport:
    emp = np.asarray(emp_masses, dtype=float)
    closed = np.asarray(closed_masses, dtype=float)
    err = np.abs(emp - closed)
    return ComparisonReport(
        algorithm=algorithm,
        seed=seed,
        steps=steps,
        tv_emp_vs_closed=total_variation(emp, closed),
        tv_emp_vs_target=total_variation(emp, target_masses),
        kl_emp_vs_closed=kl_divergence(emp, closed),
        max_bin_error=float(err.max()),
        mean_bin_error=float(err.mean()),
        z_constant=z_constant,
        wall_seconds=wall_seconds,
        extra=dict(extra or {}),
    )


def compare_histogram(hist: HistogramDensity, closed: GridDensity, target: GridDensity, **meta) -> ComparisonReport:
    return compare(hist.masses(), bin_average(closed, hist.edges), bin_average(target, hist.edges), **meta)
