"""Closed-form stationary densities of one-dimensional diffusions.

For ``dθ = μ(θ)dt + σ(θ)dB`` the invariant density is proportional to
``σ⁻²(θ)·exp(2∫μ/σ²)``. ``stationary_generic_1d`` evaluates that formula on
a grid; the specialized functions evaluate the simplified forms for the
downscaled-Γ diffusion (``p·G^{−α}``) and the Adam limit
(``p·exp(∫aG u′)``). Having both lets the simplifications be checked
numerically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import MetricKind, gamma_exact_1d, metric_at_1d
from .targets import TargetModel, density_on_grid

GRID_LO = -8.0
GRID_HI = 8.0
GRID_POINTS = 16001
PANEL_OFFSET = 1e-3


class DensitySource(enum.Enum):
    GENERIC_BORODIN = "generic_borodin"
    DOWNSCALED_GAMMA = "downscaled_gamma"
    ADAM_FORM = "adam_form"
    TARGET = "target"


@dataclass(frozen=True)
class GridDensity:
    grid: np.ndarray
    values: np.ndarray
    Z: float
    source: DensitySource

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def __call__(self, x):
        """Linear interpolation of the density; zero outside the grid."""
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


def make_grid(lo: float, hi: float, n_points: int) -> np.ndarray:
    if not hi > lo:
        raise ValueError("need hi > lo")
    if n_points < 3:
        raise ValueError("need at least 3 grid points")
    return np.linspace(lo, hi, n_points)


def normalize(grid, raw, source: DensitySource = DensitySource.TARGET) -> tuple[float, GridDensity]:
    """Scale ``raw`` to unit trapezoidal mass; returns ``(Z, density)`` with ``Z = 1/∫raw``."""
    grid = np.asarray(grid, dtype=float)
    raw = np.asarray(raw, dtype=float)
    if raw.shape != grid.shape:
        raise ValueError("raw values must match the grid")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw density has non-finite values")
    if np.any(raw < 0):
        raise ValueError("raw density must be non-negative")
    total = float(np.trapezoid(raw, grid))
    if not (total > 0 and math.isfinite(total)):
        raise ValueError(f"raw density has unusable mass {total}")
    Z = 1.0 / total
    return Z, GridDensity(grid, raw * Z, Z, source)


def cumulative_simpson(f: Callable, grid: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Antiderivative of ``f`` anchored at ``grid[0]``, one 3-point panel per interval.

    Each panel samples its own end points a hair inside the interval, so a
    jump sitting exactly on a node (``sign(u′)`` at a mode) is integrated with
    its one-sided limits. The weights are re-derived for the shifted nodes,
    which keeps the rule exact for cubics like plain Simpson. ``mask`` marks
    nodes whose adjacent panels contribute zero.
    """
    h = np.diff(grid)
    tau = PANEL_OFFSET * h
    mid = 0.5 * (grid[:-1] + grid[1:])
    # nodes at mid ± r; exactness for 1 and t² fixes the weights
    r = 0.5 * h - tau
    w_end = h**3 / (24.0 * r * r)
    w_mid = h - 2.0 * w_end
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fl = np.asarray(f(mid - r), dtype=float)
        fm = np.asarray(f(mid), dtype=float)
        fr = np.asarray(f(mid + r), dtype=float)
    if mask is not None:
        ok = ~(mask[:-1] | mask[1:])
        fl, fm, fr = (np.where(ok, v, 0.0) for v in (fl, fm, fr))
    if not (np.all(np.isfinite(fl)) and np.all(np.isfinite(fm)) and np.all(np.isfinite(fr))):
        raise ValueError("integrand is not finite on the grid")
    panels = w_end * (fl + fr) + w_mid * fm
    return np.concatenate([[0.0], np.cumsum(panels)])


def stationary_generic_1d(
    mu: Callable,
    sigma2: Callable,
    lo: float = GRID_LO,
    hi: float = GRID_HI,
    n_points: int = GRID_POINTS,
    exclude: Optional[tuple[float, float]] = None,
) -> GridDensity:
    """Stationary density of ``dθ = μdt + σdB`` from the generic 1-D formula.

    ``exclude=(a, b)`` zeroes the density and the drift ratio on that window,
    for metrics that are singular at an isolated point.
    """
    grid = make_grid(lo, hi, n_points)
    mask = None
    if exclude is not None:
        a, b = exclude
        mask = (grid >= a) & (grid <= b)

    def ratio(x):
        return 2.0 * mu(x) / sigma2(x)

    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = np.asarray(sigma2(grid), dtype=float)
    live = ~mask if mask is not None else np.ones_like(grid, dtype=bool)
    if not np.all(np.isfinite(s2[live])) or np.any(s2[live] <= 0):
        raise ValueError("sigma^2 must be finite and positive on the grid")
    A = cumulative_simpson(ratio, grid, mask)
    logv = np.where(live, A - np.log(np.where(live, s2, 1.0)), -np.inf)
    raw = np.exp(logv - np.max(logv[live]))
    _, dens = normalize(grid, raw, DensitySource.GENERIC_BORODIN)
    return dens


def downscaled_gamma_sde(target: TargetModel, kind: MetricKind, alpha: float):
    """(μ, σ²) of dθ = ½G u′dt + ½(1−α)Γdt + G^{1/2}dB."""

    def mu(x):
        G = metric_at_1d(kind, target, x)
        gam = gamma_exact_1d(kind, target, x) if alpha < 1 else 0.0
        return 0.5 * G * target.du1(x) + 0.5 * (1.0 - alpha) * gam

    def sigma2(x):
        return metric_at_1d(kind, target, x)

    return mu, sigma2


def adam_limit_sde(target: TargetModel, kind: MetricKind, a: float):
    """(μ, σ²) of dθ = ½(1 + aG)u′dt + dB."""

    def mu(x):
        return 0.5 * (1.0 + a * metric_at_1d(kind, target, x)) * target.du1(x)

    def sigma2(x):
        return np.ones_like(np.asarray(x, dtype=float))

    return mu, sigma2


def stationary_downscaled_gamma(
    target: TargetModel,
    kind: MetricKind,
    alpha: float,
    lo: float = GRID_LO,
    hi: float = GRID_HI,
    n_points: int = GRID_POINTS,
) -> GridDensity:
    """``π ∝ p(θ|D)·G(θ)^{−α}``; ``alpha = 1`` is the dropped-Γ case."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    grid = make_grid(lo, hi, n_points)
    p = density_on_grid(target, grid)
    with np.errstate(divide="ignore"):
        logG = np.log(metric_at_1d(kind, target, grid))
    if np.any(np.isnan(logG)) or np.any(logG == -np.inf):
        raise ValueError("metric must be positive on the grid")
    raw = p * np.exp(-alpha * logG) if alpha else p
    _, dens = normalize(grid, raw, DensitySource.DOWNSCALED_GAMMA)
    return dens


def stationary_adam(
    target: TargetModel,
    kind: MetricKind,
    a: float,
    lo: float = GRID_LO,
    hi: float = GRID_HI,
    n_points: int = GRID_POINTS,
) -> GridDensity:
    """``π ∝ p(θ|D)·exp(∫ aG(x)u′(x)dx)`` with the inner integral by Simpson."""
    if a < 0:
        raise ValueError("a must be >= 0")
    grid = make_grid(lo, hi, n_points)
    p = density_on_grid(target, grid)
    A = cumulative_simpson(lambda x: a * metric_at_1d(kind, target, x) * target.du1(x), grid)
    # Anchor at θ = 0 when possible so Z matches the usual closed-form convention.
    if lo < 0.0 < hi:
        A = A - np.interp(0.0, grid, A)
    raw = p * np.exp(A)
    _, dens = normalize(grid, raw, DensitySource.ADAM_FORM)
    return dens


def adam_closed_form_std_normal(theta, a: float, lam: float):
    """Unnormalized Adam-limit density for the standard normal and RMSprop metric:
    ``φ(θ)·exp(−a|θ|)·(|θ| + λ)^{aλ}``."""
    t = np.abs(np.asarray(theta, dtype=float))
    return np.exp(-0.5 * t * t - a * t) * (t + lam) ** (a * lam) / math.sqrt(2.0 * math.pi)


def target_density(target: TargetModel, lo: float = GRID_LO, hi: float = GRID_HI,
                   n_points: int = GRID_POINTS) -> GridDensity:
    grid = make_grid(lo, hi, n_points)
    _, dens = normalize(grid, density_on_grid(target, grid), DensitySource.TARGET)
    return dens
