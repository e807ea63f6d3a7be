"""Independent reference values for the normalization constants.

Deliberately shares no code with :mod:`langevin_bias.stationary`: integrals
here use Romberg extrapolation and the constants come from special-function
identities, so agreement between the two is evidence rather than tautology.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Abramowitz & Stegun 26.2.17, |error| < 7.5e-8.
_AS_P = 0.2316419
_AS_B = (0.319381530, -0.356563782, 1.781477937, -1.821255978, 1.330274429)
AS_CDF_ERROR = 7.5e-8


class OracleMethod(enum.Enum):
    ROMBERG = "romberg"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    method: OracleMethod


class RombergDidNotConverge(RuntimeError):
    pass


def romberg_integrate(f: Callable, lo: float, hi: float, tol: float = 1e-10,
                      max_levels: int = 22, min_levels: int = 4) -> OracleResult:
    """Romberg integration of a vectorized ``f`` over ``[lo, hi]``.

    The error estimate is the change between the last two diagonal entries
    of the Richardson table, floored at a few ulps of the value.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not hi > lo:
        raise ValueError("need hi > lo")
    h = hi - lo
    fa, fb = np.asarray(f(np.array([lo, hi])), dtype=float)
    prev = [0.5 * h * (fa + fb)]
    if not math.isfinite(prev[0]):
        raise ValueError("integrand is not finite at the end points")
    for k in range(1, max_levels + 1):
        h *= 0.5
        n_new = 2 ** (k - 1)
        x = lo + h * (2 * np.arange(n_new) + 1)
        fx = np.asarray(f(x), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise ValueError("integrand is not finite on [lo, hi]")
        row = [0.5 * prev[0] + h * float(np.sum(fx))]
        for j in range(1, k + 1):
            c = 4.0**j
            row.append(row[j - 1] + (row[j - 1] - prev[j - 1]) / (c - 1.0))
        err = abs(row[k] - prev[k - 1])
        if k >= min_levels and err <= tol:
            floor = 8 * np.finfo(float).eps * max(1.0, abs(row[k]))
            return OracleResult(row[k], max(err, floor), OracleMethod.ROMBERG)
        prev = row
    raise RombergDidNotConverge(f"no convergence to {tol} within {max_levels} levels (last change {err:.3g})")


def normal_cdf(x: float) -> float:
    """Φ(x) by the A&S 26.2.17 rational approximation."""
    if x < 0:
        return 1.0 - normal_cdf(-x)
    t = 1.0 / (1.0 + _AS_P * x)
    poly = t * (_AS_B[0] + t * (_AS_B[1] + t * (_AS_B[2] + t * (_AS_B[3] + t * _AS_B[4]))))
    return 1.0 - math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi) * poly


def analytic_constants() -> dict[str, OracleResult]:
    """Reference ``Z`` values for the four standard-normal experiments.

    shampoo:  1/E|θ|            = √(2π)/2
    monge:    1/E[1+θ²]         = 1/2              (β² = 1)
    adam:     1/(2e^{1/2}(1−Φ(1)))                 (a = 1, λ → 0)
    psgld:    1/E|θ|^{0.9}      = √π/(2^{0.45}Γ(0.95))  (λ → 0, α = 0.9)
    """
    shampoo = math.sqrt(2.0 * math.pi) / 2.0
    tail = 1.0 - normal_cdf(1.0)
    adam_mass = 2.0 * math.exp(0.5) * tail
    adam = 1.0 / adam_mass
    adam_err = adam * 2.0 * math.exp(0.5) * AS_CDF_ERROR / adam_mass
    psgld = math.sqrt(math.pi) / (2.0**0.45 * math.gamma(0.95))
    tiny = 1e-14
    return {
        "psgld": OracleResult(psgld, tiny, OracleMethod.ANALYTIC),
        "shampoo": OracleResult(shampoo, tiny, OracleMethod.ANALYTIC),
        "monge": OracleResult(0.5, tiny, OracleMethod.ANALYTIC),
        "adam": OracleResult(adam, adam_err, OracleMethod.ANALYTIC),
    }


def _phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Raw (unnormalized) standard-normal stationary densities with λ → 0.
RAW_DENSITIES: dict[str, Callable] = {
    "psgld": lambda x: _phi(x) * np.abs(x) ** 0.9,
    "shampoo": lambda x: _phi(x) * np.abs(x),
    "monge": lambda x: _phi(x) * (1.0 + x * x),
    "adam": lambda x: _phi(x) * np.exp(-np.abs(x)),
}


def quadrature_constants(lo: float = -8.0, hi: float = 8.0, tol: float = 1e-9) -> dict[str, OracleResult]:
    """``Z = 1/∫raw`` by Romberg on each half-line (kinks sit at θ = 0)."""
    out = {}
    for name, f in RAW_DENSITIES.items():
        left = romberg_integrate(f, lo, 0.0, tol / 2)
        right = romberg_integrate(f, 0.0, hi, tol / 2)
        mass = left.value + right.value
        err = left.error + right.error
        out[name] = OracleResult(1.0 / mass, err / mass**2, OracleMethod.ROMBERG)
    return out
