"""Langevin transition kernels and the chain runner.

The ``step_*`` functions are the reference implementations. They work for
any dimension (Γ-based drift is 1-D only) and draw their Gaussian noise from
the chain's Philox stream unless ``noise`` is given explicitly. For 1-D
targets with compiled derivatives, ``run_chain`` switches to a numba kernel
that reproduces the reference trajectories bit for bit as long as the
target's derivatives are plain arithmetic (the standard normal). Targets that
call ``exp`` agree to rounding only, since numpy and libm round differently.
"""

from __future__ import annotations

import enum
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .geometry import (
    DegenerateMetricError,
    Metric,
    MetricKind,
    PreconditionerState,
    ema,
    gamma_ema_1d,
    gamma_exact_1d,
    metric_apply,
)
from .targets import TargetModel

log = logging.getLogger(__name__)

PROGRESS_EVERY = 10**6
BLOCK_SIZE = 1 << 16
DEGENERATE_REASON = "degenerate metric: SHAMPOO_1D is singular at V = 0"


class Algorithm(enum.Enum):
    SGLD = "sgld"
    SGRLD_EXACT = "sgrld_exact"
    PSGLD = "psgld"
    MONGE = "monge"
    SHAMPOO_1D = "shampoo"
    ADAM_SGLD = "adam_sgld"
    LIMIT_DOWNSCALED_GAMMA = "limit_downscaled_gamma"
    LIMIT_ADAM = "limit_adam"


class GammaMode(enum.Enum):
    DROP = "drop"
    # (1−α)Γ(θ): the small-step value of the EMA-based correction.
    EMA = "ema"
    # Γ^{α,t} differentiated through the live EMA state.
    EMA_STATE = "ema_state"
    # Γ^{α,t} rescaled by 1/(1−α), i.e. the full Γ(θ).
    EXACT_RESCALED = "exact_rescaled"


class StiffnessWarning(RuntimeWarning):
    pass


class ChainDivergence(RuntimeError):
    """θ became non-finite (or the metric degenerated) at ``step``."""

    def __init__(self, step: int, reason: str = "non-finite theta", report=None):
        super().__init__(f"chain diverged at step {step}: {reason}")
        self.step = step
        self.reason = reason
        self.report = report


_METRIC_ALGS = (Algorithm.SGRLD_EXACT, Algorithm.LIMIT_DOWNSCALED_GAMMA)


@dataclass(frozen=True)
class SamplerConfig:
    algorithm: Algorithm = Algorithm.SGLD
    step_size: float = 1e-4
    alpha: float = 0.9
    beta: float = 0.5
    beta2: float = 1.0
    lam: float = 1e-8
    a: float = 1.0
    gamma_mode: GammaMode = GammaMode.DROP
    n_steps: int = 10**7
    burn_in: int = 10**5
    seed: int = 42
    # Metric used by SGRLD_EXACT and LIMIT_DOWNSCALED_GAMMA.
    metric: Metric = Metric.RMSPROP
    theta0: Optional[float] = None
    v_init: str = "fixed_point"
    precondition_before_update: bool = False

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.a < 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("burn-in must satisfy 0 <= B < N")
        if self.v_init not in ("fixed_point", "zero"):
            raise ValueError(f"v_init must be 'fixed_point' or 'zero', got {self.v_init!r}")
        self.metric_kind()  # validates lambda / beta2 for the chosen metric

    def metric_kind(self) -> MetricKind:
        alg = self.algorithm
        if alg is Algorithm.SGLD:
            return MetricKind.identity()
        if alg is Algorithm.SHAMPOO_1D:
            return MetricKind.shampoo()
        if alg is Algorithm.MONGE:
            return MetricKind.monge(self.beta2)
        if alg in (Algorithm.PSGLD, Algorithm.ADAM_SGLD, Algorithm.LIMIT_ADAM):
            return MetricKind.rmsprop(self.lam)
        return {
            Metric.RMSPROP: lambda: MetricKind.rmsprop(self.lam),
            Metric.SHAMPOO_1D: MetricKind.shampoo,
            Metric.MONGE: lambda: MetricKind.monge(self.beta2),
            Metric.IDENTITY: MetricKind.identity,
        }[self.metric]()

    def default_theta0(self) -> float:
        # Metrics 1/(λ+|u'|) blow up at a zero of the gradient; start off the mode.
        if self.theta0 is not None:
            return float(self.theta0)
        kind = self.metric_kind()
        noisy = self.algorithm in (Algorithm.PSGLD, Algorithm.SHAMPOO_1D) + _METRIC_ALGS
        if noisy and kind.tag in (Metric.RMSPROP, Metric.SHAMPOO_1D):
            return 1.0
        return 0.0


@dataclass
class ChainState:
    theta: np.ndarray
    precond: PreconditionerState
    step: int
    rng: np.random.Generator


@dataclass
class ChainReport:
    final_state: ChainState
    steps_completed: int
    diverged: bool
    divergence_step: Optional[int]
    wall_seconds: float
    stiff_steps: int = 0
    fast_path: bool = False


def make_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """Counter-based Philox stream; chain ``i`` is independent of the chain count."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chain_index,))))


def init_chain(cfg: SamplerConfig, target: TargetModel, chain_index: int = 0, theta0=None) -> ChainState:
    """Initial state: θ₀ and, by default, V and m at their fixed points."""
    if theta0 is None:
        theta = np.full(target.dim, cfg.default_theta0())
    else:
        theta = np.array(np.broadcast_to(np.asarray(theta0, dtype=float), (target.dim,)))
    kind = cfg.metric_kind()
    pre = PreconditionerState.zeros(target.dim, cfg.alpha, cfg.beta)
    if cfg.v_init == "fixed_point":
        g = target.grad_log_density(theta)
        pre = replace(pre, V=kind.statistic(g), m=g.copy(), initialized=True)
    return ChainState(theta, pre, 0, make_rng(cfg.seed, chain_index))


# --- reference kernels ----------------------------------------------------


def _noise(state: ChainState, noise) -> np.ndarray:
    if noise is None:
        return state.rng.standard_normal(state.theta.shape[0])
    return np.broadcast_to(np.asarray(noise, dtype=float), state.theta.shape)


def _finish(state: ChainState, theta, V=None, m=None) -> ChainState:
    step = state.step + 1
    if not np.all(np.isfinite(theta)):
        raise ChainDivergence(step)
    pre = state.precond
    if V is not None or m is not None:
        pre = replace(pre, V=pre.V if V is None else V, m=pre.m if m is None else m, initialized=True)
    return ChainState(theta, pre, step, state.rng)


def _warn_stiff(gam, eps):
    if np.any(np.abs(gam) * (0.5 * eps) > 1.0):
        warnings.warn("correction drift |Γ|ε/2 > 1: step size too large for this metric",
                      StiffnessWarning, stacklevel=3)


def _ema_gamma(cfg: SamplerConfig, kind: MetricKind, target: TargetModel, theta, V):
    mode = cfg.gamma_mode
    if mode is GammaMode.DROP:
        return 0.0
    if target.dim != 1:
        raise ValueError("Γ-based drift is only implemented for 1-D targets")
    if mode is GammaMode.EMA:
        return (1.0 - cfg.alpha) * gamma_exact_1d(kind, target, theta)
    if mode is GammaMode.EMA_STATE:
        return gamma_ema_1d(kind, target, theta, cfg.alpha, V=V)
    gam = gamma_exact_1d(kind, target, theta)
    _warn_stiff(gam, cfg.step_size)
    return gam


def step_sgld(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    """θ′ = θ + (ε/2)∇u(θ) + N(0, εI)."""
    z = _noise(state, noise)
    eps = cfg.step_size
    he, se = 0.5 * eps, math.sqrt(eps)
    g = target.grad_log_density(state.theta)
    return _finish(state, state.theta + he * g + se * z)


def step_psgld(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    """RMSprop-preconditioned step; also serves SHAMPOO_1D (λ = 0) and, via
    the metric kind, the Monge variant.

    The EMA is updated first and G is built from the new V unless
    ``cfg.precondition_before_update`` is set.
    """
    z = _noise(state, noise)
    eps = cfg.step_size
    he, se = 0.5 * eps, math.sqrt(eps)
    kind = cfg.metric_kind()
    g = target.grad_log_density(state.theta)
    V_prev = state.precond.V
    V = ema(V_prev, kind.statistic(g), cfg.alpha)
    try:
        G = metric_apply(kind, V_prev if cfg.precondition_before_update else V)
    except DegenerateMetricError as exc:
        raise ChainDivergence(state.step + 1, str(exc)) from exc
    gam = _ema_gamma(cfg, kind, target, state.theta, V)
    theta = state.theta + he * (G.matvec(g) + gam) + G.sqrt_matvec(se * z)
    return _finish(state, theta, V=V)


step_shampoo = step_psgld


def step_monge(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    """SGRLD in the Monge metric: EMA over the raw gradient, G = I − cVVᵀ."""
    if cfg.metric_kind().tag is not Metric.MONGE:
        raise ValueError("step_monge needs a MONGE configuration")
    return step_psgld(state, cfg, target, noise)


def step_adam_sgld(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    """θ′ = θ + (ε/2)(∇u + aGm) + N(0, εI); note the unpreconditioned noise."""
    z = _noise(state, noise)
    eps = cfg.step_size
    he, se = 0.5 * eps, math.sqrt(eps)
    kind = cfg.metric_kind()
    g = target.grad_log_density(state.theta)
    V_prev = state.precond.V
    V = ema(V_prev, g * g, cfg.alpha)
    m = ema(state.precond.m, g, cfg.beta)
    G = metric_apply(kind, V_prev if cfg.precondition_before_update else V)
    theta = state.theta + he * (g + cfg.a * G.matvec(m)) + se * z
    return _finish(state, theta, V=V, m=m)


def _riemannian_step(state, cfg, target, noise, gamma_scale: Optional[float]):
    # gamma_scale None → full Γ with stiffness check; 0 → dropped.
    z = _noise(state, noise)
    eps = cfg.step_size
    he, se = 0.5 * eps, math.sqrt(eps)
    kind = cfg.metric_kind()
    g = target.grad_log_density(state.theta)
    V = kind.statistic(g)
    try:
        G = metric_apply(kind, V)
    except DegenerateMetricError as exc:
        raise ChainDivergence(state.step + 1, str(exc)) from exc
    if gamma_scale is None:
        gam = gamma_exact_1d(kind, target, state.theta)
        _warn_stiff(gam, eps)
    elif gamma_scale == 0.0:
        gam = 0.0
    else:
        gam = gamma_scale * gamma_exact_1d(kind, target, state.theta)
    theta = state.theta + he * (G.matvec(g) + gam) + G.sqrt_matvec(se * z)
    return _finish(state, theta, V=V)


def step_sgrld_exact(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    """Riemannian Langevin step with the full Γ and V at its fixed point."""
    if target.dim != 1:
        raise ValueError("step_sgrld_exact is 1-D only")
    return _riemannian_step(state, cfg, target, noise, None)


def step_limit_sde(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    """Euler–Maruyama step of a limiting diffusion (no EMA lag).

    LIMIT_DOWNSCALED_GAMMA: dθ = ½G u′dt + ½·s·Γdt + G^{1/2}dB with
    ``s = 1−α`` (EMA modes), 0 (DROP) or 1 (EXACT_RESCALED).
    LIMIT_ADAM: dθ = ½(1 + aG)u′dt + dB.
    """
    if target.dim != 1:
        raise ValueError("step_limit_sde is 1-D only")
    if cfg.algorithm is Algorithm.LIMIT_ADAM:
        z = _noise(state, noise)
        eps = cfg.step_size
        he, se = 0.5 * eps, math.sqrt(eps)
        g = target.grad_log_density(state.theta)
        G = metric_apply(cfg.metric_kind(), g * g)
        theta = state.theta + he * (g + cfg.a * G.matvec(g)) + se * z
        return _finish(state, theta, V=g * g, m=g)
    mode = cfg.gamma_mode
    if mode is GammaMode.EXACT_RESCALED:
        return _riemannian_step(state, cfg, target, noise, None)
    return _riemannian_step(state, cfg, target, noise, 0.0 if mode is GammaMode.DROP else 1.0 - cfg.alpha)


KERNELS: dict[Algorithm, Callable] = {
    Algorithm.SGLD: step_sgld,
    Algorithm.SGRLD_EXACT: step_sgrld_exact,
    Algorithm.PSGLD: step_psgld,
    Algorithm.MONGE: step_monge,
    Algorithm.SHAMPOO_1D: step_shampoo,
    Algorithm.ADAM_SGLD: step_adam_sgld,
    Algorithm.LIMIT_DOWNSCALED_GAMMA: step_limit_sde,
    Algorithm.LIMIT_ADAM: step_limit_sde,
}


def step(state: ChainState, cfg: SamplerConfig, target: TargetModel, noise=None) -> ChainState:
    return KERNELS[cfg.algorithm](state, cfg, target, noise)


# --- chain runner ---------------------------------------------------------

_ALG_CODE = {
    Algorithm.SGLD: K.ALG_SGLD,
    Algorithm.SGRLD_EXACT: K.ALG_SGRLD_EXACT,
    Algorithm.PSGLD: K.ALG_PSGLD,
    Algorithm.SHAMPOO_1D: K.ALG_PSGLD,
    Algorithm.MONGE: K.ALG_MONGE,
    Algorithm.ADAM_SGLD: K.ALG_ADAM,
    Algorithm.LIMIT_DOWNSCALED_GAMMA: K.ALG_LIMIT_DG,
    Algorithm.LIMIT_ADAM: K.ALG_LIMIT_ADAM,
}
_METRIC_CODE = {
    Metric.RMSPROP: K.MET_RMSPROP,
    Metric.MONGE: K.MET_MONGE,
    Metric.SHAMPOO_1D: K.MET_SHAMPOO,
    Metric.IDENTITY: K.MET_IDENTITY,
}
_GAMMA_CODE = {
    GammaMode.DROP: K.GM_DROP,
    GammaMode.EMA: K.GM_EMA,
    GammaMode.EMA_STATE: K.GM_EMA_STATE,
    GammaMode.EXACT_RESCALED: K.GM_EXACT_RESCALED,
}


def _push(sink, first_step: int, thetas: np.ndarray) -> None:
    """Deliver states ``first_step, first_step+1, …`` to a sink."""
    if len(thetas) == 0:
        return
    block = getattr(sink, "push_block", None)
    if block is not None:
        block(first_step, thetas)
        return
    push = getattr(sink, "push", sink)
    for i, th in enumerate(thetas):
        push(first_step + i, th)


def _python_chain(cfg, target, state, sinks, progress):
    kernel = KERNELS[cfg.algorithm]
    error = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StiffnessWarning)
        for _ in range(cfg.n_steps):
            try:
                state = kernel(state, cfg, target)
            except ChainDivergence as exc:
                error = exc
                break
            if state.step > cfg.burn_in:
                for s in sinks:
                    _push(s, state.step, state.theta[None, :])
            if progress is not None and state.step % PROGRESS_EVERY == 0:
                progress(state.step)
    # counted outside the recording context so re-emitted warnings escape it
    return state, error, _count_stiff(caught)


def _count_stiff(caught) -> int:
    n = 0
    for w in caught:
        if issubclass(w.category, StiffnessWarning):
            n += 1
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return n


def _fast_chain(cfg, target, state, sinks, progress, block_size):
    kind = cfg.metric_kind()
    theta = float(state.theta[0])
    V = float(state.precond.V[0])
    m = float(state.precond.m[0])
    out = np.empty(block_size)
    stiff_total = 0
    done = 0
    args = (target.jit_grad, target.jit_hess, _ALG_CODE[cfg.algorithm], _METRIC_CODE[kind.tag],
            _GAMMA_CODE[cfg.gamma_mode], cfg.precondition_before_update, cfg.step_size, cfg.alpha,
            cfg.beta, kind.beta2, kind.lam, cfg.a)
    error = None
    while done < cfg.n_steps:
        n = min(block_size, cfg.n_steps - done)
        noise = state.rng.standard_normal(n)
        status, n_ok, theta, V, m, n_stiff = K.run_block(*args, theta, V, m, noise, out[:n])
        stiff_total += n_stiff
        first = done + 1
        lo = max(0, cfg.burn_in - done)
        if n_ok > lo:
            block = out[lo:n_ok, None]
            for s in sinks:
                _push(s, first + lo, block)
        if progress is not None and (done + n_ok) // PROGRESS_EVERY > done // PROGRESS_EVERY:
            progress(done + n_ok)
        done += n_ok
        if status != K.STATUS_OK:
            reason = DEGENERATE_REASON if status == K.STATUS_DEGENERATE else "non-finite theta"
            error = ChainDivergence(done + 1, reason)
            break
    final = ChainState(np.array([theta]), replace(state.precond, V=np.array([V]), m=np.array([m]),
                                                  initialized=True), done, state.rng)
    return final, error, stiff_total


def run_chain(
    cfg: SamplerConfig,
    target: TargetModel,
    sinks: Sequence = (),
    *,
    chain_index: int = 0,
    theta0=None,
    fast: Optional[bool] = None,
    progress: Optional[Callable[[int], None]] = None,
    block_size: int = BLOCK_SIZE,
) -> ChainReport:
    """Run ``cfg.n_steps`` transitions and stream post-burn-in states to sinks.

    Sinks receive ``(step, θ)`` for steps ``B+1 … N`` via ``push`` or, if they
    define it, in blocks via ``push_block(first_step, thetas)``.

    Raises:
        ChainDivergence: with ``.step`` and a partial ``.report`` attached.
    """
    state = init_chain(cfg, target, chain_index, theta0)
    if fast is None:
        fast = target.supports_fast_path
    elif fast and not target.supports_fast_path:
        raise ValueError(f"target {target.name!r} has no compiled derivatives")
    t0 = time.perf_counter()
    if fast:
        state, error, stiff = _fast_chain(cfg, target, state, sinks, progress, block_size)
    else:
        state, error, stiff = _python_chain(cfg, target, state, sinks, progress)
    if stiff:
        warnings.warn(f"{stiff} steps had |Γ|ε/2 > 1 (stiff correction drift)", StiffnessWarning,
                      stacklevel=2)
    report = ChainReport(
        final_state=state,
        steps_completed=state.step,
        diverged=error is not None,
        divergence_step=None if error is None else error.step,
        wall_seconds=time.perf_counter() - t0,
        stiff_steps=stiff,
        fast_path=fast,
    )
    if error is not None:
        error.report = report
        raise error
    return report


def run_chains(
    cfg: SamplerConfig,
    target: TargetModel,
    n_chains: int,
    sink_factory: Callable[[], Sequence],
    *,
    workers: Optional[int] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> list[tuple[ChainReport, Sequence]]:
    """Run independent chains (streams ``0 … n_chains−1``) in worker threads.

    Each chain owns fresh sinks from ``sink_factory``; results come back in
    chain order. The first divergence is re-raised after all chains finish.
    """
    if n_chains < 1:
        raise ValueError("need at least one chain")

    def one(i):
        sinks = sink_factory()
        cb = None if progress is None else (lambda s, i=i: progress(i, s))
        try:
            return run_chain(cfg, target, sinks, chain_index=i, progress=cb), sinks, None
        except ChainDivergence as exc:
            return exc.report, sinks, exc

    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_chains)))
    else:
        results = [one(i) for i in range(n_chains)]
    for _, _, exc in results:
        if exc is not None:
            exc.partial = [(r, s) for r, s, _ in results]
            raise exc
    return [(r, s) for r, s, _ in results]


class MomentAccumulator:
    """Sink accumulating the first two moments of a 1-D trajectory."""

    def __init__(self):
        self.n = 0
        self.sum1 = 0.0
        self.sum2 = 0.0

    def push(self, step, theta):
        x = float(np.asarray(theta).reshape(-1)[0])
        self.n += 1
        self.sum1 += x
        self.sum2 += x * x

    def push_block(self, first_step, thetas):
        x = np.asarray(thetas, dtype=float)[:, 0]
        self.n += x.size
        self.sum1 += float(np.sum(x))
        self.sum2 += float(np.sum(x * x))

    def mean(self) -> float:
        return self.sum1 / self.n

    def second_moment(self) -> float:
        return self.sum2 / self.n


class TraceRecorder:
    """Sink keeping every (step, θ) pair; meant for short test runs."""

    def __init__(self):
        self.steps: list[int] = []
        self.thetas: list[np.ndarray] = []

    def push(self, step, theta):
        self.steps.append(int(step))
        self.thetas.append(np.array(theta, dtype=float))

    def array(self) -> np.ndarray:
        return np.array(self.thetas)
