"""Metrics, EMA preconditioner state and the Γ correction drift.

Every adaptive metric here has the form ``G = F(V)`` where ``V`` is either the
instantaneous statistic ``h(θ)`` or its exponential moving average. In the
small-step limit ``V`` sits at the fixed point ``h(θ)``; the one-dimensional
helpers below evaluate ``G`` and ``Γ = dG/dθ`` there.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .targets import TargetModel

FD_STEP = 1e-5


class DegenerateMetricError(ValueError):
    """Raised when the λ = 0 metric is evaluated at ``V = 0``."""


class Metric(enum.Enum):
    RMSPROP = "rmsprop"
    MONGE = "monge"
    SHAMPOO_1D = "shampoo"
    IDENTITY = "identity"


@dataclass(frozen=True)
class MetricKind:
    tag: Metric
    lam: float = 0.0
    beta2: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.tag is Metric.RMSPROP and not self.lam > 0:
            raise ValueError("RMSPROP metric requires lambda > 0")
        if self.tag is Metric.SHAMPOO_1D and self.lam != 0:
            raise ValueError("SHAMPOO_1D is RMSprop with lambda = 0; do not set lambda")
        if self.tag is Metric.MONGE and not self.beta2 > 0:
            raise ValueError("MONGE metric requires beta2 > 0")

    @classmethod
    def rmsprop(cls, lam: float = 1e-8) -> "MetricKind":
        return cls(Metric.RMSPROP, lam=lam)

    @classmethod
    def shampoo(cls) -> "MetricKind":
        return cls(Metric.SHAMPOO_1D, lam=0.0)

    @classmethod
    def monge(cls, beta2: float = 1.0) -> "MetricKind":
        return cls(Metric.MONGE, beta2=beta2)

    @classmethod
    def identity(cls) -> "MetricKind":
        return cls(Metric.IDENTITY)

    @property
    def squared_statistic(self) -> bool:
        """True when the EMA tracks ``∇u ⊙ ∇u`` rather than ``∇u``."""
        return self.tag in (Metric.RMSPROP, Metric.SHAMPOO_1D, Metric.IDENTITY)

    def statistic(self, g):
        """The tracked statistic ``h`` given the gradient ``g``."""
        return g * g if self.squared_statistic else g

    def statistic_derivative(self, g, g2):
        """``dh/dθ`` elementwise, given gradient ``g`` and Hessian diagonal ``g2``."""
        if self.tag is Metric.IDENTITY:
            return np.zeros_like(g)
        return 2.0 * g * g2 if self.squared_statistic else g2


@dataclass
class PreconditionerState:
    V: np.ndarray
    m: np.ndarray
    alpha: float = 0.9
    beta: float = 0.0
    initialized: bool = False

    @classmethod
    def zeros(cls, dim: int, alpha: float = 0.9, beta: float = 0.0) -> "PreconditionerState":
        return cls(np.zeros(dim), np.zeros(dim), alpha, beta, False)


def ema(V, h, alpha: float):
    return alpha * V + (1.0 - alpha) * h


def ema_update(state: PreconditionerState, h, alpha: float | None = None) -> PreconditionerState:
    """Return a copy of ``state`` with ``V ← αV + (1−α)h``."""
    alpha = state.alpha if alpha is None else alpha
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ValueError("EMA input must be finite")
    return replace(state, V=ema(state.V, h, alpha), initialized=True)


def rmsprop_metric(V, lam: float):
    """Diagonal ``1/(λ + √V)``; shared by RMSPROP and SHAMPOO_1D."""
    return 1.0 / (lam + np.sqrt(V))


@dataclass(frozen=True)
class DiagonalMetric:
    diag: np.ndarray

    def matvec(self, v):
        return self.diag * v

    def sqrt_matvec(self, z):
        return np.sqrt(self.diag) * z

    def scalar(self) -> float:
        if self.diag.size != 1:
            raise ValueError("scalar() only defined in one dimension")
        return float(self.diag[0])

    def eigenvalues(self):
        return np.sort(self.diag)

    def dense(self):
        return np.diag(self.diag)


@dataclass(frozen=True)
class MongeMetric:
    """``I − c VVᵀ`` with ``c = β²/(1 + β²‖V‖²)``."""

    V: np.ndarray
    beta2: float
    norm2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "norm2", float(self.V @ self.V))

    @property
    def coef(self) -> float:
        return self.beta2 / (1.0 + self.beta2 * self.norm2)

    def matvec(self, v):
        return v - self.coef * self.V * (self.V @ v)

    def sqrt_matvec(self, z):
        if self.norm2 == 0.0:
            return z
        cs = 1.0 / np.sqrt(1.0 + self.beta2 * self.norm2) - 1.0
        return z + cs * self.V * (self.V @ z) / self.norm2

    def scalar(self) -> float:
        if self.V.size != 1:
            raise ValueError("scalar() only defined in one dimension")
        return float(self.matvec(np.ones(1))[0])

    def eigenvalues(self):
        d = self.V.size
        ev = np.ones(d)
        if self.norm2 > 0:
            ev[0] = 1.0 / (1.0 + self.beta2 * self.norm2)
        return np.sort(ev)

    def dense(self):
        return np.eye(self.V.size) - self.coef * np.outer(self.V, self.V)


def _check_nondegenerate(kind: MetricKind, V) -> None:
    if kind.tag is Metric.SHAMPOO_1D and np.any(np.asarray(V) == 0.0):
        raise DegenerateMetricError("degenerate metric: SHAMPOO_1D is singular at V = 0")


def metric_apply(kind: MetricKind, V):
    """Build the metric operator ``G`` from the preconditioner statistic ``V``."""
    V = np.atleast_1d(np.asarray(V, dtype=float))
    if kind.tag is Metric.IDENTITY:
        return DiagonalMetric(np.ones_like(V))
    if kind.tag is Metric.MONGE:
        return MongeMetric(V, kind.beta2)
    if np.any(V < 0):
        raise ValueError("RMSprop-type metrics need V >= 0")
    _check_nondegenerate(kind, V)
    return DiagonalMetric(rmsprop_metric(V, kind.lam))


def metric_sqrt_apply(kind: MetricKind, V, z):
    return metric_apply(kind, V).sqrt_matvec(np.atleast_1d(np.asarray(z, dtype=float)))


# --- one-dimensional scalar forms (vectorized over θ) ---------------------


def metric_value_1d(kind: MetricKind, V):
    """Scalar ``G(V)`` for 1-D problems, elementwise over an array of ``V``."""
    V = np.asarray(V, dtype=float)
    if kind.tag is Metric.IDENTITY:
        return np.ones_like(V)
    if kind.tag is Metric.MONGE:
        return 1.0 - kind.beta2 / (1.0 + kind.beta2 * V * V) * (V * V)
    with np.errstate(divide="ignore"):
        return rmsprop_metric(V, kind.lam)


def metric_dV_1d(kind: MetricKind, V):
    """``dG/dV`` in one dimension; 0 where ``V = 0`` for RMSprop-type metrics."""
    V = np.asarray(V, dtype=float)
    if kind.tag is Metric.IDENTITY:
        return np.zeros_like(V)
    if kind.tag is Metric.MONGE:
        q = 1.0 + kind.beta2 * V * V
        return -2.0 * kind.beta2 * V / (q * q)
    s = np.sqrt(V)
    d = kind.lam + s
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -0.5 / (s * (d * d))
    return np.where(s > 0, out, 0.0)


def metric_at_1d(kind: MetricKind, target: TargetModel, theta):
    """``G(θ) = F(h(θ))`` with the statistic at its fixed point."""
    return metric_value_1d(kind, kind.statistic(target.du1(theta)))


def _gamma_fd(kind: MetricKind, target: TargetModel, theta):
    theta = np.asarray(theta, dtype=float)
    up = metric_at_1d(kind, target, theta + FD_STEP)
    dn = metric_at_1d(kind, target, theta - FD_STEP)
    return (up - dn) / (2.0 * FD_STEP)


def gamma_from_derivatives(kind: MetricKind, g, g2):
    """Analytic ``Γ(θ)`` at the fixed point from ``u'`` and ``u''``.

    RMSprop-type: ``−sign(u')u''/(λ+|u'|)²`` (``sign(0) = 0``).
    Monge: ``−2β²u'u''/(1+β²u'²)²``.
    """
    g = np.asarray(g, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if kind.tag is Metric.IDENTITY:
        return np.zeros_like(g)
    if kind.tag is Metric.MONGE:
        q = 1.0 + kind.beta2 * (g * g)
        return -2.0 * kind.beta2 * g * g2 / (q * q)
    d = kind.lam + np.abs(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.sign(g) * g2 / (d * d)
    return np.where(g != 0.0, out, 0.0)


def gamma_exact_1d(kind: MetricKind, target: TargetModel, theta):
    """Correction drift ``Γ(θ) = d/dθ G(h(θ))`` for a 1-D target.

    Uses the analytic chain rule when the target provides a Hessian and
    central finite differences (step 1e-5) otherwise.
    """
    if target.dim != 1:
        raise ValueError("gamma_exact_1d needs a 1-D target")
    if target.hess_log_density is None:
        return _gamma_fd(kind, target, theta)
    return gamma_from_derivatives(kind, target.du1(theta), target.d2u1(theta))


def gamma_ema_state(kind: MetricKind, g, g2, V, alpha: float):
    """Γ^{α,t}: derivative of ``G(αV_prev + (1−α)h(θ))`` w.r.t. the current θ.

    Only the ``(1−α)h(θ)`` part of the EMA depends on θ, so the result is
    ``(1−α)·h'(θ)·G'(V)`` with ``V`` the post-update EMA value.
    """
    g = np.asarray(g, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    V = np.asarray(V, dtype=float)
    if kind.tag is Metric.IDENTITY:
        return np.zeros_like(g)
    if kind.tag is Metric.MONGE:
        q = 1.0 + kind.beta2 * (V * V)
        return (1.0 - alpha) * g2 * (-2.0 * kind.beta2 * V / (q * q))
    s = np.sqrt(V)
    d = kind.lam + s
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(1.0 - alpha) * (g * g2) / (s * (d * d))
    return np.where(s > 0, out, 0.0)


def gamma_ema_1d(kind: MetricKind, target: TargetModel, theta, alpha: float, V=None):
    """EMA-based correction Γ^{α,t} for a 1-D target.

    With ``V=None`` the EMA sits at its fixed point ``h(θ)`` and the value
    equals ``(1−α)·Γ(θ)``. Passing the live EMA value gives the term a
    sampler would actually see mid-trajectory.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    g = target.du1(theta)
    if target.hess_log_density is None:
        h = lambda x: kind.statistic(target.du1(x))  # noqa: E731
        theta = np.asarray(theta, dtype=float)
        dh = (h(theta + FD_STEP) - h(theta - FD_STEP)) / (2.0 * FD_STEP)
        Vv = kind.statistic(g) if V is None else np.asarray(V, dtype=float)
        return (1.0 - alpha) * dh * metric_dV_1d(kind, Vv)
    g2 = target.d2u1(theta)
    if V is None:
        return (1.0 - alpha) * gamma_from_derivatives(kind, g, g2)
    return gamma_ema_state(kind, g, g2, V, alpha)
