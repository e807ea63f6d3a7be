"""Target log-posteriors with analytic gradient oracles.

Every target exposes ``u(θ) = log p(θ|D)`` (possibly up to a constant), its
gradient and, where cheap, the diagonal of its Hessian. One-dimensional
targets additionally carry numba-compiled scalar derivatives so the chain
runner can use the compiled fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numba as nb
import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TargetModel:
    """Immutable description of a target density.

    Array callables take ``theta`` of shape ``(..., dim)``. ``log_density``
    returns shape ``(...)``; ``grad_log_density`` and ``hess_log_density``
    (the Hessian diagonal) return shape ``(..., dim)``.

    ``jit_grad``/``jit_hess`` are scalar numba functions for ``dim == 1``;
    when absent the chain runner falls back to the pure-Python kernels.
    """

    name: str
    dim: int
    log_density: ArrayFn
    grad_log_density: ArrayFn
    hess_log_density: Optional[ArrayFn] = None
    has_analytic_constant: bool = False
    jit_grad: Optional[Callable[[float], float]] = None
    jit_hess: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")

    # 1-D conveniences: elementwise over an array of abscissae.
    def u1(self, x):
        return self.log_density(np.asarray(x, dtype=float)[..., None])

    def du1(self, x):
        return self.grad_log_density(np.asarray(x, dtype=float)[..., None])[..., 0]

    def d2u1(self, x):
        if self.hess_log_density is None:
            raise NotImplementedError(f"target {self.name!r} has no analytic Hessian")
        return self.hess_log_density(np.asarray(x, dtype=float)[..., None])[..., 0]

    @property
    def supports_fast_path(self) -> bool:
        return self.dim == 1 and self.jit_grad is not None and self.jit_hess is not None


@nb.njit(cache=True)
def _std_normal_grad(x):
    return -x


@nb.njit(cache=True)
def _std_normal_hess(x):
    return -1.0


def make_standard_normal(dim: int = 1) -> TargetModel:
    """Standard normal target N(0, I); gradient is ``-θ``."""

    def log_density(theta):
        theta = np.asarray(theta, dtype=float)
        return -0.5 * np.sum(theta * theta, axis=-1) - dim * LOG_SQRT_2PI

    def grad(theta):
        return -np.asarray(theta, dtype=float)

    def hess(theta):
        return np.full(np.shape(theta), -1.0)

    return TargetModel(
        name="std_normal",
        dim=dim,
        log_density=log_density,
        grad_log_density=grad,
        hess_log_density=hess,
        has_analytic_constant=True,
        jit_grad=_std_normal_grad if dim == 1 else None,
        jit_hess=_std_normal_hess if dim == 1 else None,
    )


def make_gaussian_mixture(
    weight: float = 0.5,
    means: tuple[float, float] = (-2.0, 2.0),
    scales: tuple[float, float] = (1.0, 1.0),
) -> TargetModel:
    """Two-component 1-D Gaussian mixture (normalized)."""
    if not 0.0 < weight < 1.0:
        raise ValueError("weight must lie in (0, 1)")
    if min(scales) <= 0:
        raise ValueError("scales must be positive")
    w1, w2 = float(weight), 1.0 - float(weight)
    m1, m2 = map(float, means)
    s1, s2 = map(float, scales)
    lw1 = math.log(w1) - math.log(s1) - LOG_SQRT_2PI
    lw2 = math.log(w2) - math.log(s2) - LOG_SQRT_2PI

    def _parts(x):
        l1 = lw1 - 0.5 * ((x - m1) / s1) ** 2
        l2 = lw2 - 0.5 * ((x - m2) / s2) ** 2
        top = np.maximum(l1, l2)
        lse = top + np.log(np.exp(l1 - top) + np.exp(l2 - top))
        # same responsibility formula as the compiled kernels below
        with np.errstate(over="ignore"):
            r1 = 1.0 / (1.0 + np.exp(l2 - l1))
        return lse, r1, 1.0 - r1

    def log_density(theta):
        return _parts(np.asarray(theta, dtype=float)[..., 0])[0]

    def grad(theta):
        x = np.asarray(theta, dtype=float)
        _, r1, r2 = _parts(x)
        return -r1 * (x - m1) / s1**2 - r2 * (x - m2) / s2**2

    def hess(theta):
        x = np.asarray(theta, dtype=float)
        _, r1, r2 = _parts(x)
        d1 = -(x - m1) / s1**2
        d2 = -(x - m2) / s2**2
        mean_d = r1 * d1 + r2 * d2
        return r1 * (d1 * d1 - 1.0 / s1**2) + r2 * (d2 * d2 - 1.0 / s2**2) - mean_d * mean_d

    @nb.njit
    def jgrad(x):
        l1 = lw1 - 0.5 * ((x - m1) / s1) ** 2
        l2 = lw2 - 0.5 * ((x - m2) / s2) ** 2
        r1 = 1.0 / (1.0 + math.exp(l2 - l1))
        return -r1 * (x - m1) / s1**2 - (1.0 - r1) * (x - m2) / s2**2

    @nb.njit
    def jhess(x):
        l1 = lw1 - 0.5 * ((x - m1) / s1) ** 2
        l2 = lw2 - 0.5 * ((x - m2) / s2) ** 2
        r1 = 1.0 / (1.0 + math.exp(l2 - l1))
        r2 = 1.0 - r1
        d1 = -(x - m1) / s1**2
        d2 = -(x - m2) / s2**2
        mean_d = r1 * d1 + r2 * d2
        return r1 * (d1 * d1 - 1.0 / s1**2) + r2 * (d2 * d2 - 1.0 / s2**2) - mean_d * mean_d

    return TargetModel(
        name="gauss_mixture",
        dim=1,
        log_density=log_density,
        grad_log_density=grad,
        hess_log_density=hess,
        has_analytic_constant=True,
        jit_grad=jgrad,
        jit_hess=jhess,
    )


TARGETS: dict[str, Callable[[], TargetModel]] = {
    "std_normal": make_standard_normal,
    "gauss_mixture": make_gaussian_mixture,
}


def get_target(name: str) -> TargetModel:
    try:
        return TARGETS[name]()
    except KeyError:
        known = ", ".join(sorted(TARGETS))
        raise ValueError(f"unknown target {name!r} (known: {known})") from None


def eval_density(target: TargetModel, theta, log_normalizer: Optional[float] = None) -> float:
    """Normalized density ``exp(log_density(θ))`` at a single point.

    Targets without a known constant need ``log_normalizer``, which is added
    to the log density before exponentiating.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (target.dim,):
        raise ValueError(f"expected shape ({target.dim},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    if not target.has_analytic_constant and log_normalizer is None:
        raise ValueError(f"target {target.name!r} needs an explicit log_normalizer")
    logp = float(target.log_density(theta))
    if log_normalizer is not None:
        logp += log_normalizer
    return math.exp(logp)


def density_on_grid(target: TargetModel, x: np.ndarray) -> np.ndarray:
    """Vectorized normalized density of a 1-D target."""
    if target.dim != 1:
        raise ValueError("density_on_grid needs a 1-D target")
    if not target.has_analytic_constant:
        raise ValueError(f"target {target.name!r} has no analytic constant")
    return np.exp(target.u1(x))
