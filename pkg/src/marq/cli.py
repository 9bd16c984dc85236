"""Command-line interface.

Subcommands: solve, transient, simulate, sweep, correlations, validate.
Results go to --out (or stdout); machine-readable diagnostics are emitted to
stderr as one JSON object per line.  Exit codes: 0 success, 2 configuration
or validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .engine import TruncationPolicy
from .errors import ConfigError, MarqError, SpecValidationError
from .metrics import autocorrelation_service, cross_correlation_detail
from .model import (
    CondIndep,
    ExponentialArrivals,
    FGM,
    load_spec,
    spec_from_json_dict,
    validate,
)
from .sweep import SweepSpec, format_value, rows_to_csv, run_sweep, solve_auto

TOLERANCE_ENV = "MARQ_TOLERANCE"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _diag(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}), file=sys.stderr)


def _write_output(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
        _diag("output_written", path=str(out_path))
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _default_tolerance() -> float:
    raw = os.environ.get(TOLERANCE_ENV)
    if raw:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{TOLERANCE_ENV} must be a float, got {raw!r}")
    return 1e-7


def _policy(args) -> TruncationPolicy:
    return TruncationPolicy(tolerance=args.tolerance)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")


def cmd_validate(args) -> int:
    spec = load_spec(args.config)
    report = validate(spec)
    payload = {"valid": not report, "violations": report}
    _write_output(json.dumps(payload, indent=2), args.out)
    if report:
        _diag("validation_failed", violations=report)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = load_spec(args.config)
    report = validate(spec)
    if report:
        _diag("validation_failed", violations=report)
        print("invalid spec: " + "; ".join(report), file=sys.stderr)
        return EXIT_CONFIG
    sol = solve_auto(spec, _policy(args))
    _diag(
        "solved",
        solver=sol.label,
        boundary_kind=sol.boundary.kind,
        condition_number=sol.boundary.condition_number,
        residual=sol.boundary.residual,
    )
    grid = None
    if args.grid:
        grid = [float(x) for x in args.grid.split(",")]
    payload = sol.to_json_dict(s_grid=grid)
    if args.format == "json":
        _write_output(json.dumps(payload, indent=2), args.out)
    else:
        rows = []
        for entry in payload["transform_table"]:
            row = {"s": entry["s"]}
            for i, (re, im) in enumerate(entry["Z"], start=1):
                row[f"Z{i}_re"] = re
                row[f"Z{i}_im"] = im
            row["series_terms"] = entry["terms_used"]["series"]
            row["tail_terms"] = entry["terms_used"]["tail"]
            rows.append(row)
        _write_output(rows_to_csv(rows), args.out)
    return EXIT_OK


def _parse_complex(cell, path):
    if isinstance(cell, (int, float)):
        return complex(cell)
    if isinstance(cell, list) and len(cell) == 2:
        return complex(cell[0], cell[1])
    raise ConfigError(f"{path}: expected number or [re, im]")


def cmd_transient(args) -> int:
    from .model import _parse_services
    from .transient import ModulatedArrivalSpec, TransientQuery, TransientSolver

    cfg = _load_json(args.config)
    for key in ("generator", "rates", "initial", "services", "a"):
        if key not in cfg:
            raise ConfigError(f"$.{key}: missing")
    spec = ModulatedArrivalSpec(
        generator=tuple(tuple(float(x) for x in row) for row in cfg["generator"]),
        rates=tuple(float(x) for x in cfg["rates"]),
        initial=tuple(float(x) for x in cfg["initial"]),
        w=float(cfg.get("w", 0.0)),
    )
    report = spec.violations()
    if report:
        _diag("validation_failed", violations=report)
        return EXIT_CONFIG
    services = _parse_services(cfg["services"], "$.services")
    solver = TransientSolver(spec, services, float(cfg["a"]), _policy(args))
    queries_raw = _load_json(args.queries)
    if not isinstance(queries_raw, list):
        raise ConfigError("queries file must hold a JSON array of (r, s, eta) triples")
    rows = []
    for k, triple in enumerate(queries_raw):
        if not isinstance(triple, list) or len(triple) != 3:
            raise ConfigError(f"queries[{k}]: expected [r, s, eta]")
        r = _parse_complex(triple[0], f"queries[{k}][0]")
        s = _parse_complex(triple[1], f"queries[{k}][1]")
        eta = _parse_complex(triple[2], f"queries[{k}][2]")
        res = solver.evaluate(TransientQuery(r, s, eta))
        for state, z in enumerate(res.value, start=1):
            rows.append(
                {
                    "r": r.real,
                    "s_re": s.real,
                    "s_im": s.imag,
                    "eta_re": eta.real,
                    "eta_im": eta.imag,
                    "state": state,
                    "Z_re": z.real,
                    "Z_im": z.imag,
                    "terms_used": res.terms_used["series"],
                }
            )
    _write_output(rows_to_csv(rows), args.out)
    _diag("transient_done", queries=len(queries_raw))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .model import ShotNoise as ShotNoiseKind, WaitDependent as WaitDepKind
    from .related import ShotNoiseSpec, WaitDepSpec
    from .sim import SimConfig, simulate_stationary

    spec = load_spec(args.config)
    report = validate(spec)
    if report:
        _diag("validation_failed", violations=report)
        return EXIT_CONFIG
    cfg = SimConfig(
        seed=args.seed,
        steps=args.steps,
        burn_in=args.burn_in,
        replications=args.replications,
    )
    sim_spec = spec
    if isinstance(spec.model_kind, ShotNoiseKind):
        sim_spec = ShotNoiseSpec.from_model_spec(spec)
    elif isinstance(spec.model_kind, WaitDepKind):
        sim_spec = WaitDepSpec.from_model_spec(spec)
    s_values = [float(x) for x in args.s_values.split(",")] if args.s_values else []
    result = simulate_stationary(sim_spec, cfg, s_values)
    _diag("simulated", seed=cfg.seed, steps=cfg.steps, replications=cfg.replications)
    _write_output(json.dumps(result.to_json_dict(), indent=2), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_json(args.config)
    base_raw = cfg.get("base")
    if isinstance(base_raw, str):
        base = load_spec(base_raw)
    elif isinstance(base_raw, dict):
        base = spec_from_json_dict(base_raw)
    else:
        raise ConfigError("$.base: expected a model object or a path string")
    if "parameter" not in cfg or "grid" not in cfg:
        raise ConfigError("$.parameter and $.grid are required")
    oracle_cfg = None
    if cfg.get("oracle"):
        from .sim import SimConfig

        oracle_cfg = SimConfig(
            seed=args.seed,
            steps=int(cfg.get("oracle_steps", 1_000_000)),
            burn_in=int(cfg.get("oracle_burn_in", 10_000)),
            replications=int(cfg.get("oracle_replications", 20)),
        )
    sweep = SweepSpec(
        base=base,
        parameter=str(cfg["parameter"]),
        grid=tuple(float(x) for x in cfg["grid"]),
        oracle=bool(cfg.get("oracle", False)),
        oracle_config=oracle_cfg,
        truncation_counts=bool(cfg.get("truncation_counts", False)),
    )
    rows, any_failed = run_sweep(sweep, _policy(args))
    _write_output(rows_to_csv(rows), args.out)
    for row in rows:
        if row.get("error"):
            _diag("sweep_row_failed", parameter=row["parameter"], error=row["error"])
    _diag("sweep_done", rows=len(rows), failed=any_failed)
    return EXIT_SOLVER if any_failed else EXIT_OK


def cmd_correlations(args) -> int:
    spec = load_spec(args.config)
    report = validate(spec)
    if report:
        _diag("validation_failed", violations=report)
        return EXIT_CONFIG
    if not (
        isinstance(spec.dependence, (CondIndep, FGM))
        and isinstance(spec.arrivals, ExponentialArrivals)
    ):
        print("correlations need exponential arrivals with independent or "
              "FGM dependence", file=sys.stderr)
        return EXIT_CONFIG
    lags = [int(x) for x in args.lags.split(",")] if args.lags else [1, 2, 3]
    detail = cross_correlation_detail(spec)
    payload = {
        "cross_correlation": detail.value,
        "cross_correlation_coupled_pair": detail.coupled_pair,
        "theta": detail.theta,
        "autocorrelation_service": {
            str(n): autocorrelation_service(spec, n) for n in lags
        },
    }
    _write_output(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marq",
        description="Workload transforms and correlations for Markov-modulated "
                    "reflected autoregressive queues",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, queries=False):
        p.add_argument("--config", required=True, help="model/sweep JSON path")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--tolerance", type=float, default=None,
                       help=f"series tolerance (default {TOLERANCE_ENV} or 1e-7)")
        p.add_argument("--seed", type=int, default=20240801)
        p.add_argument("--format", choices=("csv", "json"), default="json")
        if queries:
            p.add_argument("--queries", required=True,
                           help="JSON array of (r, s, eta) triples")

    p = sub.add_parser("solve", help="steady-state transform vector")
    common(p)
    p.add_argument("--grid", default=None, help="comma-separated s grid")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("transient", help="transient transform at query points")
    common(p, queries=True)
    p.set_defaults(fn=cmd_transient)

    p = sub.add_parser("simulate", help="Monte Carlo oracle estimates")
    common(p)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int, default=10_000, dest="burn_in")
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--s-values", default="", dest="s_values")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweep to CSV")
    common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("correlations", help="auto- and cross-correlations")
    common(p)
    p.add_argument("--lags", default="1,2,3")
    p.set_defaults(fn=cmd_correlations)

    p = sub.add_parser("validate", help="report violated model invariants")
    common(p)
    p.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.tolerance is None:
            args.tolerance = _default_tolerance()
        code = args.fn(args)
    except (ConfigError, SpecValidationError) as exc:
        _diag("config_error", error=str(exc))
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MarqError as exc:
        _diag("solver_error", kind=type(exc).__name__, error=str(exc))
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return code


if __name__ == "__main__":
    sys.exit(main())
