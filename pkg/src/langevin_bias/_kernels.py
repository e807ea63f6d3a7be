"""Compiled one-dimensional transition kernels.

Each expression mirrors the reference step functions in ``samplers`` term
for term so both paths produce bit-identical trajectories. Keep the operation
order in sync when editing either side.
"""

import math

import numba as nb
import numpy as np

ALG_SGLD = 0
ALG_SGRLD_EXACT = 1
ALG_PSGLD = 2
ALG_MONGE = 3
ALG_ADAM = 4
ALG_LIMIT_DG = 5
ALG_LIMIT_ADAM = 6

MET_RMSPROP = 0
MET_MONGE = 1
MET_SHAMPOO = 2
MET_IDENTITY = 3

GM_DROP = 0
GM_EMA = 1
GM_EMA_STATE = 2
GM_EXACT_RESCALED = 3

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_DEGENERATE = 2


@nb.njit(inline="always")
def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@nb.njit(inline="always")
def _gamma_exact(metric, g, g2, lam, beta2):
    if metric == MET_IDENTITY:
        return 0.0
    if metric == MET_MONGE:
        q = 1.0 + beta2 * (g * g)
        return -2.0 * beta2 * g * g2 / (q * q)
    if g == 0.0:
        return 0.0
    d = lam + abs(g)
    return -_sign(g) * g2 / (d * d)


@nb.njit(inline="always")
def _gamma_state(metric, g, g2, V, alpha, lam, beta2):
    if metric == MET_IDENTITY:
        return 0.0
    if metric == MET_MONGE:
        q = 1.0 + beta2 * (V * V)
        return (1.0 - alpha) * g2 * (-2.0 * beta2 * V / (q * q))
    s = math.sqrt(V)
    if s > 0.0:
        d = lam + s
        return -(1.0 - alpha) * (g * g2) / (s * (d * d))
    return 0.0


@nb.njit(inline="always")
def _statistic(metric, g):
    if metric == MET_MONGE:
        return g
    return g * g


@nb.njit(inline="always")
def _apply_metric(metric, V, g, zs, lam, beta2):
    """Return (G g, G^{1/2} zs, scalar G) for the 1-D metric at ``V``."""
    if metric == MET_IDENTITY:
        return 1.0 * g, math.sqrt(1.0) * zs, 1.0
    if metric == MET_MONGE:
        n2 = V * V
        c = beta2 / (1.0 + beta2 * n2)
        Gg = g - c * V * (V * g)
        if n2 == 0.0:
            noise = zs
        else:
            cs = 1.0 / math.sqrt(1.0 + beta2 * n2) - 1.0
            noise = zs + cs * V * (V * zs) / n2
        return Gg, noise, 1.0 - c * V * V
    G = 1.0 / (lam + math.sqrt(V))
    return G * g, math.sqrt(G) * zs, G


@nb.njit(nogil=True)
def run_block(
    grad, hess, alg, metric, gmode, pre_update,
    eps, alpha, beta, beta2, lam, a,
    theta, V, m, noise, out,
):
    """Advance one chain over ``len(noise)`` steps, writing θ into ``out``.

    Returns ``(status, n_done, theta, V, m, n_stiff)``; on a non-OK status
    ``n_done`` counts the steps completed before the failing one.
    """
    he = 0.5 * eps
    se = math.sqrt(eps)
    n_stiff = 0
    n = noise.shape[0]
    for i in range(n):
        g = grad(theta)
        zs = se * noise[i]
        if alg == ALG_SGLD:
            new = theta + he * g + se * noise[i]
        elif alg == ALG_PSGLD or alg == ALG_MONGE:
            V_prev = V
            V = alpha * V + (1.0 - alpha) * _statistic(metric, g)
            Vg = V_prev if pre_update else V
            if metric == MET_SHAMPOO and Vg == 0.0:
                return STATUS_DEGENERATE, i, theta, V_prev, m, n_stiff
            Gg, nz, G = _apply_metric(metric, Vg, g, zs, lam, beta2)
            gam = 0.0
            if gmode == GM_EMA:
                gam = (1.0 - alpha) * _gamma_exact(metric, g, hess(theta), lam, beta2)
            elif gmode == GM_EMA_STATE:
                gam = _gamma_state(metric, g, hess(theta), V, alpha, lam, beta2)
            elif gmode == GM_EXACT_RESCALED:
                gam = _gamma_exact(metric, g, hess(theta), lam, beta2)
                if abs(gam) * he > 1.0:
                    n_stiff += 1
            new = theta + he * (Gg + gam) + nz
        elif alg == ALG_ADAM:
            V_prev = V
            V = alpha * V + (1.0 - alpha) * (g * g)
            m = beta * m + (1.0 - beta) * g
            Vg = V_prev if pre_update else V
            G = 1.0 / (lam + math.sqrt(Vg))
            Gm = G * m
            new = theta + he * (g + a * Gm) + se * noise[i]
        elif alg == ALG_SGRLD_EXACT or alg == ALG_LIMIT_DG:
            V = _statistic(metric, g)
            if metric == MET_SHAMPOO and V == 0.0:
                return STATUS_DEGENERATE, i, theta, V, m, n_stiff
            Gg, nz, G = _apply_metric(metric, V, g, zs, lam, beta2)
            gam = 0.0
            if alg == ALG_SGRLD_EXACT or gmode == GM_EXACT_RESCALED:
                gam = _gamma_exact(metric, g, hess(theta), lam, beta2)
                if abs(gam) * he > 1.0:
                    n_stiff += 1
            elif gmode != GM_DROP:
                gam = (1.0 - alpha) * _gamma_exact(metric, g, hess(theta), lam, beta2)
            new = theta + he * (Gg + gam) + nz
        else:  # ALG_LIMIT_ADAM
            V = g * g
            m = g
            G = 1.0 / (lam + math.sqrt(V))
            Gm = G * m
            new = theta + he * (g + a * Gm) + se * noise[i]
        if not math.isfinite(new):
            return STATUS_DIVERGED, i, theta, V, m, n_stiff
        theta = new
        out[i] = theta
    return STATUS_OK, n, theta, V, m, n_stiff


def warmup():
    """Compile the kernel for the standard-normal target ahead of timing runs."""
    from .targets import _std_normal_grad, _std_normal_hess

    out = np.empty(2)
    run_block(_std_normal_grad, _std_normal_hess, 0, 0, 0, False,
              1e-4, 0.9, 0.5, 1.0, 1e-8, 1.0, 0.0, 0.0, 0.0, np.zeros(2), out)
