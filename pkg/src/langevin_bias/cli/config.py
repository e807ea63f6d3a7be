"""Experiment configuration: ``key = value`` files, presets and flag overrides.

Precedence is preset < file < flags. Conflict checks only look at keys the
user set explicitly, so a preset never trips them.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..geometry import Metric
from ..samplers import Algorithm, GammaMode, SamplerConfig
from ..targets import TARGETS
from .presets import PRESETS

OUTDIR_ENV = "LANGEVIN_BIAS_OUTDIR"
DEFAULT_OUTDIR = "langevin-out"
FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: Algorithm = Algorithm.SGLD
    target: str = "std_normal"
    steps: int = 10**7
    step_size: float = 1e-4
    burn_in: int = 10**5
    seed: int = 42
    chains: int = 1
    alpha: float = 0.9
    beta: float = 0.5
    beta2: float = 1.0
    lam: float = 1e-8
    a: float = 1.0
    # None picks the algorithm's usual mode, see ``resolved_gamma_mode``.
    gamma_mode: Optional[GammaMode] = None
    metric: Metric = Metric.RMSPROP
    theta0: Optional[float] = None
    v_init: str = "fixed_point"
    precondition_before_update: bool = False
    bin_width: float = 0.1
    range: tuple[float, float] = (-4.0, 4.0)
    out: Optional[str] = None
    formats: tuple[str, ...] = ("csv", "json")
    workers: Optional[int] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r} (known: {', '.join(sorted(TARGETS))})")
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        lo, hi = self.range
        if not hi > lo:
            raise ConfigError("range must satisfy lo < hi")
        if not self.bin_width > 0:
            raise ConfigError("bin width must be positive")
        n = round((hi - lo) / self.bin_width)
        if n < 1 or abs(n * self.bin_width - (hi - lo)) > 1e-9 * (hi - lo):
            raise ConfigError("range must hold a whole number of bins")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output format(s): {', '.join(sorted(bad))}")
        if self.steps % self.chains:
            raise ConfigError(f"steps ({self.steps}) must split evenly over {self.chains} chains")
        try:
            self.sampler_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def steps_per_chain(self) -> int:
        return self.steps // self.chains

    @property
    def stem(self) -> str:
        return self.name or self.algorithm.value

    def resolved_gamma_mode(self) -> GammaMode:
        if self.gamma_mode is not None:
            return self.gamma_mode
        if self.algorithm is Algorithm.PSGLD:
            return GammaMode.EMA_STATE
        if self.algorithm is Algorithm.LIMIT_DOWNSCALED_GAMMA:
            return GammaMode.EMA
        return GammaMode.DROP

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            algorithm=self.algorithm,
            step_size=self.step_size,
            alpha=self.alpha,
            beta=self.beta,
            beta2=self.beta2,
            lam=self.lam,
            a=self.a,
            gamma_mode=self.resolved_gamma_mode(),
            n_steps=self.steps_per_chain,
            burn_in=self.burn_in,
            seed=self.seed,
            metric=self.metric,
            theta0=self.theta0,
            v_init=self.v_init,
            precondition_before_update=self.precondition_before_update,
        )

    def out_dir(self) -> str:
        return self.out or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR


# --- parsing ---------------------------------------------------------------


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s: str) -> int:
    # Accept 1e7 style counts, but only when they are whole numbers.
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        v = float(s)
        if not v.is_integer():
            raise ValueError(f"not an integer: {s!r}") from None
        return int(v)


def _optional_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _range(s: str) -> tuple[float, float]:
    parts = [p for p in s.replace(":", ",").split(",") if p.strip()]
    if len(parts) != 2:
        raise ValueError(f"range needs two numbers 'lo,hi', got {s!r}")
    return float(parts[0]), float(parts[1])


def _formats(s: str) -> tuple[str, ...]:
    return tuple(p.strip().lower() for p in s.split(",") if p.strip())


def _enum(cls):
    def parse(s: str):
        key = s.strip().lower().replace("-", "_")
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"expected one of {', '.join(m.value for m in cls)}, got {s!r}")

    return parse


# key -> (dataclass field, parser)
KEYS = {
    "algorithm": ("algorithm", _enum(Algorithm)),
    "target": ("target", str.strip),
    "steps": ("steps", _int),
    "step_size": ("step_size", float),
    "burn_in": ("burn_in", _int),
    "seed": ("seed", _int),
    "chains": ("chains", _int),
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "beta2": ("beta2", float),
    "lambda": ("lam", float),
    "a": ("a", float),
    "gamma_mode": ("gamma_mode", _enum(GammaMode)),
    "metric": ("metric", _enum(Metric)),
    "theta0": ("theta0", _optional_float),
    "v_init": ("v_init", str.strip),
    "precondition_before_update": ("precondition_before_update", _bool),
    "bins": ("bin_width", float),
    "range": ("range", _range),
    "out": ("out", str.strip),
    "format": ("formats", _formats),
    "workers": ("workers", _int),
}

_RMSPROP_ALGS = {Algorithm.PSGLD, Algorithm.ADAM_SGLD, Algorithm.LIMIT_ADAM}
_METRIC_ALGS = {Algorithm.SGRLD_EXACT, Algorithm.LIMIT_DOWNSCALED_GAMMA}
_EMA_ALGS = {Algorithm.PSGLD, Algorithm.SHAMPOO_1D, Algorithm.MONGE, Algorithm.ADAM_SGLD,
              Algorithm.LIMIT_DOWNSCALED_GAMMA}
_ADAM_ALGS = {Algorithm.ADAM_SGLD, Algorithm.LIMIT_ADAM}
_GAMMA_ALGS = {Algorithm.PSGLD, Algorithm.SHAMPOO_1D, Algorithm.MONGE, Algorithm.LIMIT_DOWNSCALED_GAMMA}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def parse_text(text: str) -> dict[str, str]:
    """Raw ``key = value`` pairs; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = normalize_key(key)
        if key not in KEYS and key != "preset":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _typed(raw: Mapping[str, str]) -> dict:
    typed = {}
    for key, value in raw.items():
        key = normalize_key(key)
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        name, parse = KEYS[key]
        try:
            typed[name] = parse(value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return typed


def _check_conflicts(merged: dict, explicit: set[str]) -> None:
    alg = merged.get("algorithm", Algorithm.SGLD)
    metric = merged.get("metric", Metric.RMSPROP)
    uses_metric = alg in _METRIC_ALGS
    rules = {
        "beta2": alg is Algorithm.MONGE or (uses_metric and metric is Metric.MONGE),
        "lam": alg in _RMSPROP_ALGS or (uses_metric and metric is Metric.RMSPROP),
        "alpha": alg in _EMA_ALGS,
        "beta": alg in _ADAM_ALGS,
        "a": alg in _ADAM_ALGS,
        "gamma_mode": alg in _GAMMA_ALGS,
        "metric": uses_metric,
    }
    flag = {"lam": "lambda"}
    for name, ok in rules.items():
        if name in explicit and not ok:
            raise ConfigError(f"{flag.get(name, name)} has no effect for algorithm {alg.value!r}")


def build_config(*, preset: Optional[str] = None, file_values: Optional[Mapping[str, str]] = None,
                 overrides: Optional[Mapping] = None) -> ExperimentConfig:
    """Merge preset, file and flag layers into a validated config.

    ``file_values`` may carry a ``preset`` key; an explicit ``preset`` argument
    wins over it. ``overrides`` holds flag values keyed like the file keys.
    """
    file_values = dict(file_values or {})
    preset = preset or file_values.pop("preset", None)
    file_values.pop("preset", None)
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r} (see 'presets')")
        merged.update(_typed(PRESETS[preset]))
        merged["name"] = preset
    layer_file = _typed(file_values)
    layer_flags = _typed({k: v for k, v in (overrides or {}).items() if v is not None})
    merged.update(layer_file)
    merged.update(layer_flags)
    explicit = set(layer_file) | set(layer_flags)
    _check_conflicts(merged, explicit)
    try:
        return ExperimentConfig(**merged)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str = "", overrides: Optional[Mapping] = None, preset: Optional[str] = None) -> ExperimentConfig:
    """Config from ``key = value`` text plus flag overrides."""
    return build_config(preset=preset, file_values=parse_text(text), overrides=overrides)


def config_items(cfg: ExperimentConfig) -> dict:
    """Flat, JSON-friendly view of the config."""
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if hasattr(v, "value"):
            v = v.value
        elif isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    out["gamma_mode"] = cfg.resolved_gamma_mode().value
    return out
