"""Command-line entry point.

Subcommands: estimate-aux, estimate-null, test-null, deconv, simulate,
sufficiency-test.  Reports are JSON (or CSV where tabular) and carry the
resolved configuration.  Exit codes: 0 success, 2 input error, 3
identification or rank failure, 4 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import deconv as deconv_mod
from .aux_linear import estimate_aux, estimate_aux_subset
from .bootstrap import PERCENTILES, bootstrap_ci
from .data import load_csv, load_schema
from .errors import ConvergenceError, IdentificationError, InputError
from .factor import fit_factor, sufficiency_test
from .null_treatments import estimate_null, test_sharp_null_linear
from .sim import run_experiment, tables_to_csv, tables_to_json

EXIT_INPUT = 2
EXIT_IDENTIFICATION = 3
EXIT_CONVERGENCE = 4


def _stars(lo95, hi95, lo90, hi90) -> str:
    """Significance flag: ** if the 95% interval excludes zero, * if only
    the 90% interval does."""
    if lo95 > 0 or hi95 < 0:
        return "**"
    if lo90 > 0 or hi90 < 0:
        return "*"
    return ""


def _load_dataset(args):
    schema = load_schema(args.schema)
    return load_csv(args.input, schema)


def _coefficient_report(names, point, boot):
    rows = []
    for j, name in enumerate(names):
        row = {"name": name, "estimate": float(point[j])}
        if boot is not None:
            pct = {f"{p}%": float(boot.percentiles[k][j])
                   for k, p in enumerate(PERCENTILES)}
            row["percentiles"] = pct
            row["significance"] = _stars(
                boot.percentiles[0][j], boot.percentiles[3][j],
                boot.percentiles[1][j], boot.percentiles[2][j],
            )
        rows.append(row)
    return rows


def _write_report(report, args):
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _treatment_names(d):
    names = d.names.get("treatments") if d.names else None
    return names or [f"x{j + 1}" for j in range(d.p)]


def cmd_estimate_aux(args) -> int:
    d = _load_dataset(args)
    config = {
        "command": "estimate-aux", "input": args.input, "schema": args.schema,
        "q": args.q, "iv_cols": args.iv_cols, "bootstrap": args.bootstrap,
        "seed": args.seed,
    }
    if args.iv_cols:
        iv = tuple(args.iv_cols)
        est_fn = lambda data: estimate_aux_subset(data, args.q, iv).beta
        fit = estimate_aux_subset(d, args.q, iv)
    else:
        est_fn = lambda data: estimate_aux(data, args.q).beta
        fit = estimate_aux(d, args.q)
    boot = bootstrap_ci(d, est_fn, args.bootstrap, args.seed) if args.bootstrap else None
    report = {
        "config": config,
        "coefficients": _coefficient_report(_treatment_names(d), fit.beta, boot),
        "delta": fit.delta.tolist(),
        "diagnostics": {
            "factor_converged": bool(fit.factor.converged),
            "heywood": bool(np.any(fit.factor.heywood)),
            "bootstrap_failures": None if boot is None else boot.failures,
        },
    }
    _write_report(report, args)
    return 0


def cmd_estimate_null(args) -> int:
    d = _load_dataset(args)
    config = {
        "command": "estimate-null", "input": args.input, "schema": args.schema,
        "q": args.q, "bootstrap": args.bootstrap, "seed": args.seed,
    }
    fit = estimate_null(d, args.q)
    est_fn = lambda data: estimate_null(data, args.q).beta
    boot = bootstrap_ci(d, est_fn, args.bootstrap, args.seed) if args.bootstrap else None
    report = {
        "config": config,
        "coefficients": _coefficient_report(_treatment_names(d), fit.beta, boot),
        "delta": fit.delta.tolist(),
        "confounded_set": sorted(int(i) + 1 for i in fit.confounded),
        "diagnostics": {
            "factor_converged": bool(fit.factor.converged),
            "heywood": bool(np.any(fit.factor.heywood)),
            "bootstrap_failures": None if boot is None else boot.failures,
        },
    }
    _write_report(report, args)
    return 0


def cmd_test_null(args) -> int:
    d = _load_dataset(args)
    result = test_sharp_null_linear(d, args.q, B=args.bootstrap or 200,
                                    seed=args.seed)
    report = {
        "config": {"command": "test-null", "input": args.input,
                   "schema": args.schema, "q": args.q,
                   "bootstrap": args.bootstrap or 200, "seed": args.seed},
        "statistic": float(result.statistic),
        "p_value": float(result.p_value),
    }
    _write_report(report, args)
    return 0


def cmd_sufficiency_test(args) -> int:
    d = _load_dataset(args)
    fit = fit_factor(d.x, args.q, controls=d.z)
    result = sufficiency_test(fit, d.n)
    report = {
        "config": {"command": "sufficiency-test", "input": args.input,
                   "schema": args.schema, "q": args.q},
        "statistic": result.statistic,
        "df": result.df,
        "p_value": result.p_value,
    }
    _write_report(report, args)
    return 0


def cmd_deconv(args) -> int:
    d = _load_dataset(args)
    evaluator = deconv_mod.fit_gaussian_evaluator(d)
    with open(args.config) as fh:
        raw = json.load(fh)
    cfg = deconv_mod.DeconvConfig(
        gamma_tilde=raw["gamma_tilde"], eta=raw["eta"],
        sigma_tilde=raw["sigma_tilde"], y_grid=raw["y_grid"],
        u_grid=raw["u_grid"], z_grid=raw["z_grid"],
        t_max=raw.get("t_max", 8.0), eps_reg=raw.get("eps_reg", 1e-6),
    )
    x = np.asarray(raw["x"], dtype=float)
    grid = deconv_mod.deconvolve_outcome(evaluator, x, cfg)
    po = deconv_mod.potential_outcome_density(grid, cfg)
    out = args.out or "potential_outcome.csv"
    po.to_csv(out)
    print(json.dumps({"config": {"command": "deconv", "input": args.input,
                                 "deconv_config": args.config, "out": out},
                      "imag_residue": grid.imag_residue,
                      "mass": po.mass()}))
    return 0


def cmd_simulate(args) -> int:
    with open(args.config) as fh:
        spec = json.load(fh)
    if args.seed is not None:
        spec["seed"] = args.seed
    tables = run_experiment(spec)
    out = args.out or "summary." + args.format
    if args.format == "csv":
        tables_to_csv(tables, out)
    else:
        tables_to_json(tables, out)
    print(json.dumps({"config": {"command": "simulate", "spec": spec},
                      "out": out, "tables": len(tables)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multitreat",
        description="Causal effect estimation for multiple treatments "
                    "under unmeasured confounding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_data=True, needs_q=True):
        if needs_data:
            p.add_argument("--input", required=True, help="CSV data file")
            p.add_argument("--schema", required=True, help="JSON column schema")
        if needs_q:
            p.add_argument("--q", type=int, required=True,
                           help="number of latent confounders")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--bootstrap", type=int, default=0, metavar="B")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("estimate-aux", help="auxiliary-variables estimator")
    common(p)
    p.add_argument("--iv-cols", type=int, nargs="*", default=None,
                   help="0-based instrument columns used for the correction")
    p.set_defaults(func=cmd_estimate_aux)

    p = sub.add_parser("estimate-null", help="null-treatments estimator")
    common(p)
    p.set_defaults(func=cmd_estimate_null)

    p = sub.add_parser("test-null", help="sharp-null projection test")
    common(p)
    p.set_defaults(func=cmd_test_null)

    p = sub.add_parser("sufficiency-test", help="factor count sufficiency test")
    common(p)
    p.set_defaults(func=cmd_sufficiency_test)

    p = sub.add_parser("deconv", help="deconvolution of the outcome density")
    common(p)
    p.add_argument("--config", required=True,
                   help="JSON deconvolution geometry (grids, gamma, eta, x)")
    p.set_defaults(func=cmd_deconv)

    p = sub.add_parser("simulate", help="run a replication experiment")
    common(p, needs_data=False, needs_q=False)
    p.add_argument("--config", required=True, help="JSON experiment spec")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(json.dumps({"error": "input", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INPUT
    except IdentificationError as exc:
        print(json.dumps({"error": "identification", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_IDENTIFICATION
    except ConvergenceError as exc:
        print(json.dumps({"error": "convergence", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(json.dumps({"error": "input", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
