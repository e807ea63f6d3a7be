"""Named experiment presets: one per panel of the benchmark figure plus controls.

Each preset runs 8 chains of 10⁷ steps (ε = 10⁻⁴, B = 10⁵ per chain) on the
standard normal. Values are stored as config-file strings so they go through
the same parser as user input.
"""

_COMMON = {
    "target": "std_normal",
    "steps": "8e7",
    "chains": "8",
    "step_size": "1e-4",
    "burn_in": "1e5",
    "seed": "42",
    "bins": "0.1",
    "range": "-4,4",
    "format": "csv,json,svg",
}

PRESETS: dict[str, dict[str, str]] = {
    "figure1-psgld": {**_COMMON, "algorithm": "psgld", "alpha": "0.9", "lambda": "1e-8",
                      "gamma_mode": "ema_state"},
    "figure1-shampoo": {**_COMMON, "algorithm": "shampoo", "alpha": "0.9", "gamma_mode": "drop"},
    "figure1-monge": {**_COMMON, "algorithm": "monge", "alpha": "0.9", "beta2": "1", "gamma_mode": "drop"},
    "figure1-adamsgld": {**_COMMON, "algorithm": "adam_sgld", "alpha": "0.9", "beta": "0.5", "a": "1",
                         "lambda": "1e-8"},
    "figure1-sgld-control": {**_COMMON, "algorithm": "sgld"},
    "figure1-corrected-psgld": {**_COMMON, "algorithm": "psgld", "alpha": "0.9", "lambda": "1",
                                "gamma_mode": "exact_rescaled"},
}

DESCRIPTIONS = {
    "figure1-psgld": "PSGLD, RMSprop metric, lambda=1e-8, EMA-state correction",
    "figure1-shampoo": "1-D Shampoo (RMSprop with lambda=0), correction dropped",
    "figure1-monge": "SGRLD in the Monge metric, beta2=1, correction dropped",
    "figure1-adamsgld": "Adam SGLD, a=1, beta=0.5",
    "figure1-sgld-control": "plain SGLD, unbiased control",
    "figure1-corrected-psgld": "PSGLD with lambda=1 and the correction rescaled by 1/(1-alpha)",
}
