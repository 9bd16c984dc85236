"""Parameter sweeps, solver dispatch and CSV persistence."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import TruncationPolicy
from .errors import MarqError, SpecValidationError
from .metrics import autocorrelation_service, cross_correlation_detail, fgm_truncation_counts
from .model import (
    BME,
    CondIndep,
    ExponentialArrivals,
    FGM,
    MixedErlangArrivals,
    ModelSpec,
    Autoregressive,
    ShotNoise,
    WaitDependent,
)
from .related import ShotNoiseSpec, WaitDepSpec, solve_shotnoise, solve_waitdep
from .stationary import solve_bme, solve_exponential, solve_fgm, solve_mixed_erlang


def solve_auto(spec: ModelSpec, policy: TruncationPolicy = TruncationPolicy()):
    """Pick the solver matching the spec's model kind and dependence."""
    kind = spec.model_kind
    if isinstance(kind, ShotNoise):
        return solve_shotnoise(ShotNoiseSpec.from_model_spec(spec), policy)
    if isinstance(kind, WaitDependent):
        return solve_waitdep(WaitDepSpec.from_model_spec(spec), policy)
    if not isinstance(kind, Autoregressive):
        raise SpecValidationError([f"no solver for model kind {type(kind).__name__}"])
    dep = spec.dependence
    if isinstance(dep, FGM):
        return solve_fgm(spec, policy)
    if isinstance(dep, BME):
        return solve_bme(spec, policy)
    if isinstance(dep, CondIndep):
        if isinstance(spec.arrivals, MixedErlangArrivals):
            return solve_mixed_erlang(spec, policy)
        if isinstance(spec.arrivals, ExponentialArrivals):
            return solve_exponential(spec, policy)
    raise SpecValidationError(
        [f"no solver for dependence {type(dep).__name__} with "
         f"{type(spec.arrivals).__name__}"]
    )


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep over a base model.

    ``parameter`` is one of "u" (divide service rates), "theta" (FGM
    dependence) or "a" (autoregressive parameter).
    """

    base: ModelSpec
    parameter: str
    grid: tuple
    oracle: bool = False
    oracle_config: object = None  # sim.SimConfig when oracle is requested
    correlation_lag: int = 1
    truncation_counts: bool = field(default=False)

    def violations(self):
        out = []
        if self.parameter not in ("u", "theta", "a"):
            out.append(f"unknown sweep parameter {self.parameter!r}")
        if not self.grid:
            out.append("sweep grid must be nonempty")
        for g in self.grid:
            if self.parameter == "u" and g <= 0:
                out.append(f"u={g} must be positive")
            if self.parameter == "theta" and not -1 <= g <= 1:
                out.append(f"theta={g} outside [-1,1]")
            if self.parameter == "a" and not 0 < g < 1:
                out.append(f"a={g} outside (0,1)")
        return out

    def spec_at(self, value) -> ModelSpec:
        if self.parameter == "u":
            return self.base.with_service_divisor(float(value))
        if self.parameter == "theta":
            return self.base.with_theta(float(value))
        return self.base.with_a(float(value))


def _sweep_row(sweep: SweepSpec, value, policy: TruncationPolicy):
    spec = sweep.spec_at(value)
    row = {"parameter": float(value)}
    try:
        sol = solve_auto(spec, policy)
        mean = sol.mean_vector()
        for i, m in enumerate(mean, start=1):
            row[f"mean_state{i}"] = float(m)
        row["total_mean"] = float(mean.sum())
        if isinstance(spec.dependence, (CondIndep, FGM)) and isinstance(
            spec.arrivals, ExponentialArrivals
        ):
            detail = cross_correlation_detail(spec)
            row["cross_correlation"] = detail.value
            row["cross_correlation_coupled"] = detail.coupled_pair
            row["autocorrelation"] = autocorrelation_service(spec, sweep.correlation_lag)
        probe = sol.transform(1.0)
        row["series_terms"] = probe.terms_used["series"]
        row["tail_terms"] = probe.terms_used["tail"]
        if sweep.truncation_counts and isinstance(spec.dependence, (FGM, CondIndep)):
            kc, lc = fgm_truncation_counts(spec, tolerance=policy.tolerance)
            for (m, j, n), cnt in sorted(kc.items()):
                row[f"k_{m}_{j}_{n}"] = cnt
            for (j, n), cnt in sorted(lc.items()):
                row[f"l_{j}_{n}"] = cnt
        if sweep.oracle:
            from .sim import simulate_stationary

            sim_spec = spec
            if isinstance(spec.model_kind, ShotNoise):
                sim_spec = ShotNoiseSpec.from_model_spec(spec)
            elif isinstance(spec.model_kind, WaitDependent):
                sim_spec = WaitDepSpec.from_model_spec(spec)
            res = simulate_stationary(sim_spec, sweep.oracle_config)
            row["oracle_total_mean"] = res.total_mean.value
            row["oracle_total_mean_se"] = res.total_mean.se
        row["error"] = ""
    except MarqError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(sweep: SweepSpec, policy: TruncationPolicy = TruncationPolicy(),
              max_workers: int | None = None):
    """Run every grid point (rows in parallel, output in grid order).

    Returns (rows, any_failed); per-row solver errors land in the row's
    ``error`` column and do not stop the remaining rows.
    """
    report = sweep.violations()
    if report:
        raise SpecValidationError(report)
    with ThreadPoolExecutor(max_workers=max_workers or min(8, len(sweep.grid))) as pool:
        rows = list(pool.map(lambda v: _sweep_row(sweep, v, policy), sweep.grid))
    any_failed = any(r.get("error") for r in rows)
    return rows, any_failed


# --------------------------------------------------------------------------
# CSV persistence: 17 significant digits, '.' decimal point, comma delimiter
# --------------------------------------------------------------------------

def format_value(x) -> str:
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    header: list[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(row.get(k, "")) for k in header])
    return buf.getvalue()


def csv_round_trip(text: str) -> str:
    """Parse a numeric CSV and re-emit it; used to check losslessness."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    header, body = rows[0], rows[1:]
    out = []
    for raw in body:
        row = {}
        for key, cell in zip(header, raw):
            if cell == "":
                row[key] = ""
            else:
                try:
                    row[key] = int(cell)
                except ValueError:
                    try:
                        row[key] = float(cell)
                    except ValueError:
                        row[key] = cell
        out.append(row)
    return rows_to_csv(out)
