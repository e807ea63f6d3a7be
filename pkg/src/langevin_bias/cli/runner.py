"""Run an experiment end to end and write its CSV, JSON and SVG outputs."""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..analysis import ComparisonReport, bin_average, compare
from ..estimation import HistogramDensity, merge_all, to_density
from ..samplers import Algorithm, ChainDivergence, GammaMode, run_chains
from ..stationary import (
    GRID_HI,
    GRID_LO,
    GridDensity,
    stationary_adam,
    stationary_downscaled_gamma,
    target_density,
)
from ..targets import get_target
from .config import ExperimentConfig

log = logging.getLogger(__name__)

CSV_HEADER = ("bin_left", "bin_right", "target_density", "closed_form_density", "empirical_density")
GRID_SPACING = 1e-3

# Exponent on G^{-α'} left in the stationary density by each treatment of Γ.
_EXPONENT = {
    GammaMode.DROP: lambda alpha: 1.0,
    GammaMode.EMA: lambda alpha: alpha,
    GammaMode.EMA_STATE: lambda alpha: alpha,
    GammaMode.EXACT_RESCALED: lambda alpha: 0.0,
}


class MalformedCSV(ValueError):
    pass


def _grid_bounds(cfg: ExperimentConfig) -> tuple[float, float, int]:
    lo = min(GRID_LO, cfg.range[0])
    hi = max(GRID_HI, cfg.range[1])
    return lo, hi, int(round((hi - lo) / GRID_SPACING)) + 1


def closed_form_density(cfg: ExperimentConfig) -> GridDensity:
    """Stationary density predicted for the configured sampler."""
    target = get_target(cfg.target)
    lo, hi, n = _grid_bounds(cfg)
    scfg = cfg.sampler_config()
    kind = scfg.metric_kind()
    alg = cfg.algorithm
    if alg in (Algorithm.SGLD, Algorithm.SGRLD_EXACT):
        return target_density(target, lo, hi, n)
    if alg in (Algorithm.ADAM_SGLD, Algorithm.LIMIT_ADAM):
        return stationary_adam(target, kind, cfg.a, lo, hi, n)
    expo = _EXPONENT[scfg.gamma_mode](cfg.alpha)
    if expo == 0.0:
        return target_density(target, lo, hi, n)
    return stationary_downscaled_gamma(target, kind, expo, lo, hi, n)


def target_grid_density(cfg: ExperimentConfig) -> GridDensity:
    lo, hi, n = _grid_bounds(cfg)
    return target_density(get_target(cfg.target), lo, hi, n)


def make_histogram(cfg: ExperimentConfig) -> HistogramDensity:
    return HistogramDensity(cfg.range[0], cfg.range[1], cfg.bin_width)


# --- CSV ---------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def format_csv(edges, target_vals, closed_vals, empirical=None) -> str:
    cols = CSV_HEADER if empirical is not None else CSV_HEADER[:-1]
    lines = [",".join(cols)]
    for i in range(len(edges) - 1):
        row = [edges[i], edges[i + 1], target_vals[i], closed_vals[i]]
        if empirical is not None:
            row.append(empirical[i])
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class DensityCSV:
    bin_left: np.ndarray
    bin_right: np.ndarray
    target: np.ndarray
    closed: np.ndarray
    empirical: Optional[np.ndarray]

    @property
    def widths(self) -> np.ndarray:
        return self.bin_right - self.bin_left


def read_csv(path: str) -> DensityCSV:
    """Parse a density CSV; the empirical column is optional."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedCSV(f"{path}: empty file")
    header = tuple(h.strip() for h in rows[0])
    if header not in (CSV_HEADER, CSV_HEADER[:-1]):
        raise MalformedCSV(f"{path}: unexpected header {','.join(header)}")
    if len(rows) < 2:
        raise MalformedCSV(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise MalformedCSV(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise MalformedCSV(f"{path}: rows do not match the header")
    if not np.all(data[:, 1] > data[:, 0]):
        raise MalformedCSV(f"{path}: bin_right must exceed bin_left")
    emp = data[:, 4] if len(header) == 5 else None
    return DensityCSV(data[:, 0], data[:, 1], data[:, 2], data[:, 3], emp)


# --- experiment --------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: ComparisonReport
    histogram: HistogramDensity
    closed: GridDensity
    target: GridDensity
    paths: dict = field(default_factory=dict)
    diverged: bool = False


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_closed_form(cfg: ExperimentConfig) -> tuple[GridDensity, str]:
    """Write the target and closed-form columns only; returns the density and CSV path."""
    closed = closed_form_density(cfg)
    target = target_grid_density(cfg)
    hist = make_histogram(cfg)
    centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
    os.makedirs(cfg.out_dir(), exist_ok=True)
    path = os.path.join(cfg.out_dir(), f"{cfg.stem}-closed-form.csv")
    _write(path, format_csv(hist.edges, target(centers), closed(centers)))
    return closed, path


def run_experiment(cfg: ExperimentConfig, *, progress: bool = True) -> ExperimentResult:
    """Run the chains, compare against the closed form and write outputs.

    A diverged run still writes what it has, with ``diverged: true`` in the
    JSON report; the caller maps that to a nonzero exit code.
    """
    target_model = get_target(cfg.target)
    if target_model.dim != 1:
        raise ValueError("density experiments need a one-dimensional target")
    scfg = cfg.sampler_config()
    closed = closed_form_density(cfg)
    target = target_grid_density(cfg)

    def report_progress(chain, step):
        log.info("chain %d: %d / %d steps", chain, step, scfg.n_steps)

    t0 = time.perf_counter()
    diverged, divergence_step = False, None
    try:
        results = run_chains(scfg, target_model, cfg.chains, lambda: [make_histogram(cfg)],
                             workers=cfg.workers, progress=report_progress if progress else None)
    except ChainDivergence as exc:
        log.error("%s", exc)
        results = exc.partial
        diverged, divergence_step = True, exc.step
    wall = time.perf_counter() - t0

    hist = merge_all(sinks[0] for _, sinks in results)
    stiff = sum(r.stiff_steps for r, _ in results)
    edges = hist.edges
    closed_m = bin_average(closed, edges)
    target_m = bin_average(target, edges)
    extra = {
        "diverged": diverged,
        "divergence_step": divergence_step,
        "chains": cfg.chains,
        "steps_per_chain": scfg.n_steps,
        "burn_in": scfg.burn_in,
        "gamma_mode": scfg.gamma_mode.value,
        "samples": hist.n,
        "out_of_range_fraction": hist.out_of_range() / hist.n if hist.n else math.nan,
        "stiff_steps": stiff,
    }
    if cfg.name:
        extra["preset"] = cfg.name
    if hist.n:
        report = compare(hist.masses(), closed_m, target_m, algorithm=cfg.algorithm.value, seed=cfg.seed,
                         steps=cfg.steps, z_constant=closed.Z, wall_seconds=wall, extra=extra)
    else:
        nan = math.nan
        report = ComparisonReport(cfg.algorithm.value, cfg.seed, cfg.steps, nan, nan, nan, nan, nan,
                                  closed.Z, wall, extra)

    out = cfg.out_dir()
    os.makedirs(out, exist_ok=True)
    paths = {}
    centers = 0.5 * (edges[:-1] + edges[1:])
    empirical = to_density(hist).density if hist.n else None
    csv_text = format_csv(edges, target(centers), closed(centers), empirical)
    if "csv" in cfg.formats or "svg" in cfg.formats:
        paths["csv"] = os.path.join(out, f"{cfg.stem}.csv")
        _write(paths["csv"], csv_text)
    if "json" in cfg.formats:
        paths["json"] = os.path.join(out, f"{cfg.stem}.json")
        _write(paths["json"], report.to_json())
    if "svg" in cfg.formats:
        from .svg import emit_plot

        paths["svg"] = emit_plot(paths["csv"], os.path.join(out, f"{cfg.stem}.svg"), title=cfg.stem)
    return ExperimentResult(cfg, report, hist, closed, target, paths, diverged)


def compare_csv(path: str, *, algorithm: str = "unknown", seed: int = 0, steps: int = 0,
                z_constant: float = math.nan) -> ComparisonReport:
    """Recompute a report from a density CSV (bin masses by the midpoint rule)."""
    table = read_csv(path)
    if table.empirical is None:
        raise MalformedCSV(f"{path}: no empirical_density column to compare")
    w = table.widths
    return compare(table.empirical * w, table.closed * w, table.target * w, algorithm=algorithm, seed=seed,
                   steps=steps, z_constant=z_constant, extra={"source": os.path.basename(path)})


__all__ = [
    "CSV_HEADER",
    "DensityCSV",
    "ExperimentResult",
    "MalformedCSV",
    "closed_form_density",
    "compare_csv",
    "format_csv",
    "read_csv",
    "run_experiment",
    "write_closed_form",
]
