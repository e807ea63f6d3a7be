import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from langevin_bias.geometry import MetricKind
from langevin_bias.stationary import (
    DensitySource,
    adam_closed_form_std_normal,
    adam_limit_sde,
    cumulative_simpson,
    downscaled_gamma_sde,
    make_grid,
    normalize,
    stationary_adam,
    stationary_downscaled_gamma,
    stationary_generic_1d,
    target_density,
)

RMS = MetricKind.rmsprop(1e-8)
SHAMPOO = MetricKind.shampoo()
MONGE = MetricKind.monge(1.0)
WINDOW = (-5e-4, 5e-4)


def sup_on(d1, d2, lo=-4, hi=4, window=None):
    x = d1.grid
    np.testing.assert_array_equal(x, d2.grid)
    m = (x >= lo) & (x <= hi)
    if window is not None:
        m &= ~((x >= window[0]) & (x <= window[1]))
    return float(np.max(np.abs(d1.values - d2.values)[m]))


def phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


# --- generic engine ---------------------------------------------------------------


def test_generic_sgld_is_standard_normal():
    d = stationary_generic_1d(lambda x: -x / 2, lambda x: np.ones_like(x))
    assert d.source is DensitySource.GENERIC_BORODIN
    m = np.abs(d.grid) <= 4
    assert np.max(np.abs(d.values - phi(d.grid))[m]) < 1e-6


def test_generic_exact_sgrld_is_target(normal):
    d = stationary_generic_1d(*downscaled_gamma_sde(normal, MetricKind.rmsprop(1.0), 0.0))
    assert sup_on(d, target_density(normal)) < 1e-4


def test_generic_shampoo_matches_specialized(normal):
    g = stationary_generic_1d(*downscaled_gamma_sde(normal, SHAMPOO, 1.0), exclude=WINDOW)
    assert sup_on(g, stationary_downscaled_gamma(normal, SHAMPOO, 1.0), window=WINDOW) < 1e-4


def test_generic_rejects_bad_sigma():
    with pytest.raises(ValueError, match="sigma"):
        stationary_generic_1d(lambda x: -x, lambda x: x)
    with pytest.raises(ValueError, match="not finite"):
        stationary_generic_1d(lambda x: 1.0 / (x - x), lambda x: np.ones_like(x))


def test_cumulative_simpson_polynomial_and_jump():
    x = make_grid(-1, 2, 301)
    np.testing.assert_allclose(cumulative_simpson(lambda t: 3 * t * t, x), x**3 + 1, atol=1e-12)
    # a unit jump sitting on a node is integrated with its one-sided values
    A = cumulative_simpson(np.sign, x)
    np.testing.assert_allclose(A, np.abs(x) - 1, atol=1e-12)


# --- specialized forms --------------------------------------------------------------


@pytest.mark.parametrize("kind", [RMS, SHAMPOO, MONGE])
def test_zero_exponent_is_target(kind, normal):
    d = stationary_downscaled_gamma(normal, kind, 0.0)
    np.testing.assert_allclose(d.values, target_density(normal).values, rtol=1e-14)


def test_psgld_density(normal):
    d = stationary_downscaled_gamma(normal, RMS, 0.9)
    assert abs(d.Z - 1.258) <= 0.005
    x = d.grid
    formula = d.Z * phi(x) * (1e-8 + np.abs(x)) ** 0.9
    np.testing.assert_allclose(d.values, formula, rtol=1e-12, atol=1e-300)


def test_shampoo_and_monge_constants(normal):
    s = stationary_downscaled_gamma(normal, SHAMPOO, 1.0)
    assert abs(s.Z - 1.253) <= 0.005
    np.testing.assert_allclose(s.values, s.Z * phi(s.grid) * np.abs(s.grid), rtol=1e-12, atol=1e-300)
    m = stationary_downscaled_gamma(normal, MONGE, 1.0)
    assert abs(m.Z - 0.5) <= 0.005
    np.testing.assert_allclose(m.values, m.Z * phi(m.grid) * (1 + m.grid**2), rtol=1e-12)


def test_downscaled_rejects_alpha():
    with pytest.raises(ValueError):
        stationary_downscaled_gamma(None, RMS, 1.5)


def test_adam_forms(normal):
    assert stationary_adam(normal, RMS, 0.0).values == pytest.approx(target_density(normal).values, rel=1e-14)
    d = stationary_adam(normal, RMS, 1.0)
    assert abs(d.Z - 1.912) <= 0.005
    closed = adam_closed_form_std_normal(d.grid, 1.0, 1e-8)
    closed = closed / np.trapezoid(closed, d.grid)
    m = np.abs(d.grid) <= 4
    assert np.max(np.abs(d.values - closed)[m]) < 1e-4


# --- normalize ------------------------------------------------------------------------


def test_normalize_examples():
    x = make_grid(-8, 8, 16001)
    Z, d = normalize(x, np.exp(-x * x / 2))
    assert Z == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-9)
    Z, _ = normalize(x, phi(x) * np.abs(x))
    assert Z == pytest.approx(math.sqrt(2 * math.pi) / 2, abs=1e-6)
    Z, _ = normalize(x, phi(x) * np.exp(-np.abs(x)))
    # independent: 2 e^{1/2} (1 - Φ(1)) via scipy
    assert Z == pytest.approx(1 / (2 * math.exp(0.5) * stats.norm.sf(1.0)), abs=1e-6)
    assert d.mass() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("raw", [np.zeros(5), np.array([1, 2, np.nan, 1, 1.0]), np.array([1, -1, 1, 1, 1.0])])
def test_normalize_errors(raw):
    with pytest.raises(ValueError):
        normalize(np.linspace(0, 1, 5), raw)


def test_psgld_constant_matches_gamma_identity(normal):
    # ∫ φ|θ|^{0.9} = 2^{0.45} Γ(0.95)/√π, evaluated with scipy's gamma
    ref = math.sqrt(math.pi) / (2**0.45 * special.gamma(0.95))
    assert stationary_downscaled_gamma(normal, RMS, 0.9).Z == pytest.approx(ref, abs=1e-5)


# --- invariants -------------------------------------------------------------------------


def limiting_pairs(normal):
    """(name, generic density, specialized density, excluded window)."""
    out = []
    for name, kind, alpha, window in [
        ("psgld", RMS, 0.9, WINDOW),
        ("psgld-drop", RMS, 1.0, None),
        ("shampoo", SHAMPOO, 1.0, WINDOW),
        ("monge", MONGE, 1.0, None),
        ("monge-ema", MONGE, 0.9, None),
        ("rmsprop-lambda1", MetricKind.rmsprop(1.0), 0.9, None),
    ]:
        g = stationary_generic_1d(*downscaled_gamma_sde(normal, kind, alpha), exclude=window)
        out.append((name, g, stationary_downscaled_gamma(normal, kind, alpha), window))
    for name, kind, alpha in [("exact-rmsprop", MetricKind.rmsprop(1.0), 0.0), ("exact-monge", MONGE, 0.0)]:
        g = stationary_generic_1d(*downscaled_gamma_sde(normal, kind, alpha))
        out.append((name, g, target_density(normal), None))
    g = stationary_generic_1d(*adam_limit_sde(normal, RMS, 1.0))
    out.append(("adam", g, stationary_adam(normal, RMS, 1.0), None))
    return out


def test_engine_equivalence(normal):
    for name, g, spec, window in limiting_pairs(normal):
        assert sup_on(g, spec, window=window) < 1e-4, name


def test_engine_equivalence_on_mixture(mixture):
    for kind, alpha in [(MetricKind.rmsprop(0.5), 0.9), (MONGE, 1.0), (MONGE, 0.5)]:
        g = stationary_generic_1d(*downscaled_gamma_sde(mixture, kind, alpha))
        assert sup_on(g, stationary_downscaled_gamma(mixture, kind, alpha)) < 1e-4
    g = stationary_generic_1d(*adam_limit_sde(mixture, MetricKind.rmsprop(0.5), 1.0))
    assert sup_on(g, stationary_adam(mixture, MetricKind.rmsprop(0.5), 1.0)) < 1e-4


def all_specialized(normal):
    return [
        stationary_downscaled_gamma(normal, RMS, 0.9),
        stationary_downscaled_gamma(normal, SHAMPOO, 1.0),
        stationary_downscaled_gamma(normal, MONGE, 1.0),
        stationary_adam(normal, RMS, 1.0),
        target_density(normal),
    ]


def test_grid_refinement(normal):
    makers = [
        lambda n: stationary_downscaled_gamma(normal, RMS, 0.9, n_points=n),
        lambda n: stationary_downscaled_gamma(normal, SHAMPOO, 1.0, n_points=n),
        lambda n: stationary_downscaled_gamma(normal, MONGE, 1.0, n_points=n),
        lambda n: stationary_adam(normal, RMS, 1.0, n_points=n),
    ]
    for make in makers:
        assert abs(make(16001).Z - make(32001).Z) < 1e-6


def test_symmetry_and_mass(normal):
    for d in all_specialized(normal) + [stationary_generic_1d(lambda x: -x / 2, lambda x: np.ones_like(x))]:
        assert np.max(np.abs(d.values - d.values[::-1])) < 1e-12
        assert abs(d.mass() - 1) < 1e-6
        assert np.all(np.isfinite(d.values)) and np.all(d.values >= 0)


def test_tail_mass_beyond_grid():
    # mass of every benchmark density beyond ±8 is negligible
    for f in (lambda x: phi(x) * np.abs(x), lambda x: phi(x) * (1 + x * x), lambda x: phi(x) * np.exp(-np.abs(x))):
        tail, _ = integrate.quad(f, 8, np.inf)
        assert 2 * tail < 1e-12
