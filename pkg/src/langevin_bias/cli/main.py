"""``langevin-bias`` command line entry point.

Exit codes: 0 success, 1 validation error, 2 chain divergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from .config import OUTDIR_ENV, ConfigError, build_config, parse_text
from .presets import DESCRIPTIONS, PRESETS

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("langevin_bias")

# flag dest -> config-file key
_FLAG_KEYS = {
    "algorithm": "algorithm",
    "target": "target",
    "steps": "steps",
    "step_size": "step_size",
    "burn_in": "burn_in",
    "seed": "seed",
    "chains": "chains",
    "alpha": "alpha",
    "beta": "beta",
    "beta2": "beta2",
    "lam": "lambda",
    "a": "a",
    "gamma_mode": "gamma_mode",
    "metric": "metric",
    "theta0": "theta0",
    "v_init": "v_init",
    "bins": "bins",
    "range": "range",
    "out": "out",
    "format": "format",
    "workers": "workers",
}


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    g = p.add_argument_group("sampler")
    g.add_argument("--algorithm", help="sgld, psgld, shampoo, monge, adam_sgld, sgrld_exact, limit_*")
    g.add_argument("--target", help="target density (std_normal, gauss_mixture)")
    g.add_argument("--steps", help="total steps N, split evenly over chains")
    g.add_argument("--step-size", dest="step_size", help="step size eps")
    g.add_argument("--burn-in", dest="burn_in", help="steps discarded per chain")
    g.add_argument("--seed")
    g.add_argument("--chains", help="number of independent chains")
    g.add_argument("--workers", help="worker threads (default: one per chain)")
    g.add_argument("--alpha", help="EMA decay of the preconditioner statistic")
    g.add_argument("--beta", help="momentum decay (Adam SGLD)")
    g.add_argument("--beta2", help="Monge metric scale")
    g.add_argument("--lambda", dest="lam", help="RMSprop stability constant")
    g.add_argument("--a", help="Adam drift weight")
    g.add_argument("--gamma-mode", dest="gamma_mode", help="drop, ema, ema_state or exact_rescaled")
    g.add_argument("--metric", help="metric for sgrld_exact / limit_downscaled_gamma")
    g.add_argument("--theta0", help="initial state (default depends on the metric)")
    g.add_argument("--v-init", dest="v_init", help="fixed_point or zero")
    o = p.add_argument_group("output")
    o.add_argument("--bins", help="histogram bin width")
    o.add_argument("--range", help="histogram range 'lo,hi'")
    o.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or ./langevin-out)")
    o.add_argument("--format", help="comma-separated subset of csv,json,svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langevin-bias",
                                     description="Adaptive Langevin samplers versus their stationary densities.")
    parser.add_argument("--quiet", "-q", action="store_true", help="only print warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run chains and write CSV/JSON/SVG")
    _add_experiment_flags(p)

    p = sub.add_parser("closed-form", help="stationary density only (no sampling)")
    _add_experiment_flags(p)
    p.add_argument("--verify", action="store_true",
                   help="cross-check the benchmark normalization constants against the oracles")

    p = sub.add_parser("compare", help="recompute a report from an existing density CSV")
    p.add_argument("csv", help="density CSV with an empirical column")
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("plot", help="render a density CSV to SVG")
    p.add_argument("csv")
    p.add_argument("--out", help="SVG path (default: next to the CSV)")
    p.add_argument("--title")

    sub.add_parser("presets", help="list named presets")
    for p in sub.choices.values():
        p.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS,
                       help="only print warnings and errors")
    return parser


def _config_from_args(args):
    file_values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_values = parse_text(fh.read())
    overrides = {key: getattr(args, dest) for dest, key in _FLAG_KEYS.items()}
    return build_config(preset=args.preset, file_values=file_values, overrides=overrides)


def cmd_simulate(args) -> int:
    from .runner import run_experiment

    cfg = _config_from_args(args)
    log.info("running %s: %d chain(s) x %d steps", cfg.stem, cfg.chains, cfg.steps_per_chain)
    result = run_experiment(cfg, progress=not args.quiet)
    r = result.report
    log.info("TV(emp, closed) = %.4f  TV(emp, target) = %.4f  Z = %.4f  (%.1f s)",
             r.tv_emp_vs_closed, r.tv_emp_vs_target, r.z_constant, r.wall_seconds)
    for kind, path in result.paths.items():
        print(f"{kind}: {path}")
    return EXIT_DIVERGED if result.diverged else EXIT_OK


_VERIFY_CASES = {
    "psgld": "figure1-psgld",
    "shampoo": "figure1-shampoo",
    "monge": "figure1-monge",
    "adam": "figure1-adamsgld",
}


def verify_constants(tol: float = 5e-3) -> tuple[bool, list[dict]]:
    """Normalization constants of the benchmark presets versus both oracles."""
    from ..oracles import analytic_constants, quadrature_constants
    from .runner import closed_form_density

    analytic = analytic_constants()
    romberg = quadrature_constants()
    rows, ok = [], True
    for key, preset in _VERIFY_CASES.items():
        z = closed_form_density(build_config(preset=preset)).Z
        a, q = analytic[key].value, romberg[key].value
        good = abs(z - a) <= tol and abs(z - q) <= tol
        ok &= good
        rows.append({"case": key, "stationary": z, "analytic": a, "romberg": q, "ok": good})
    return ok, rows


def cmd_closed_form(args) -> int:
    from .runner import write_closed_form

    if args.verify:
        ok, rows = verify_constants()
        print(f"{'case':<8} {'stationary':>11} {'analytic':>11} {'romberg':>11}")
        for r in rows:
            print(f"{r['case']:<8} {r['stationary']:>11.6f} {r['analytic']:>11.6f} {r['romberg']:>11.6f}"
                  f"  {'ok' if r['ok'] else 'MISMATCH'}")
        return EXIT_OK if ok else EXIT_INVALID
    cfg = _config_from_args(args)
    closed, path = write_closed_form(cfg)
    print(f"Z = {closed.Z:.6f}")
    print(f"csv: {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .runner import compare_csv

    meta = {}
    sibling = os.path.splitext(args.csv)[0] + ".json"
    if os.path.exists(sibling):
        with open(sibling, encoding="utf-8") as fh:
            prior = json.load(fh)
        meta = {k: prior[k] for k in ("algorithm", "seed", "steps") if k in prior}
        z = prior.get("z_constant")
        if isinstance(z, (int, float)):
            meta["z_constant"] = float(z)
    text = compare_csv(args.csv, **meta).to_json()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .svg import emit_plot

    print(emit_plot(args.csv, args.out, title=args.title))
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        print(f"{name:<26} {DESCRIPTIONS.get(name, '')}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "closed-form": cmd_closed_form,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "presets": cmd_presets,
}


def main(argv=None) -> int:
    from ..samplers import ChainDivergence
    from .runner import MalformedCSV

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MalformedCSV) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except ChainDivergence as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
