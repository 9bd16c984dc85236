"""Seeded Monte Carlo estimates for every recursion in scope.

The stationary simulators run on the compiled kernels (or their numpy
fallbacks, see backend.py); the transient simulators are light enough to stay
in vectorized numpy with masked per-replication streams.  Identical seed and
configuration give bit-identical estimates on either backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SpecValidationError, UnsupportedSampling
from ..model import (
    BME,
    CondIndep,
    ExponentialArrivals,
    ExponentialService,
    FGM,
    MixedErlangArrivals,
    ModelSpec,
    Autoregressive,
    require_valid,
)
from ..related import ShotNoiseSpec, WaitDepSpec
from .backend import active_backend
from .rng import Streams, stream_states


@dataclass(frozen=True)
class SimConfig:
    seed: int
    steps: int = 1_000_000
    burn_in: int = 10_000
    replications: int = 20

    def __post_init__(self):
        if self.burn_in >= self.steps:
            raise ValueError("burn_in must be below steps")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class SimEstimate:
    value: float
    se: float
    n_replications: int

    def covers(self, reference: float, n_se: float = 3.0) -> bool:
        return abs(self.value - reference) <= n_se * max(self.se, 1e-300)

    def to_json_dict(self):
        return {"estimate": self.value, "se": self.se, "n_replications": self.n_replications}


def _estimate(per_rep: np.ndarray) -> SimEstimate:
    per_rep = np.asarray(per_rep, dtype=float)
    r = per_rep.shape[0]
    value = float(per_rep.mean())
    se = float(per_rep.std(ddof=1) / np.sqrt(r)) if r > 1 else 0.0
    return SimEstimate(value, se, r)


@dataclass
class StationarySimResult:
    mean: list          # per state SimEstimate of E[W 1{Y=i}]
    total_mean: SimEstimate
    occupancy: list
    idle: list
    transform: dict     # s -> list of per-state SimEstimates of E[e^{-sW} 1{Y=i}]

    def to_json_dict(self):
        return {
            "mean": [e.to_json_dict() for e in self.mean],
            "total_mean": self.total_mean.to_json_dict(),
            "occupancy": [e.to_json_dict() for e in self.occupancy],
            "idle": [e.to_json_dict() for e in self.idle],
            "transform": {
                str(s): [e.to_json_dict() for e in ests]
                for s, ests in self.transform.items()
            },
        }


def _kernel_module():
    if active_backend() == "numba":
        from . import kernels as mod
    else:
        from . import kernels_numpy as mod
    return mod


def _row_cdf(p: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=1)
    cdf[:, -1] = 1.0
    return np.ascontiguousarray(cdf)


def _package(raw, cfg: SimConfig, s_values) -> StationarySimResult:
    w_sum, occ, idle, tr = raw
    n_samples = cfg.steps - cfg.burn_in
    mean_rep = w_sum / n_samples
    occ_rep = occ / n_samples
    idle_rep = idle / n_samples
    tr_rep = tr / n_samples
    n = w_sum.shape[1]
    return StationarySimResult(
        mean=[_estimate(mean_rep[:, i]) for i in range(n)],
        total_mean=_estimate(mean_rep.sum(axis=1)),
        occupancy=[_estimate(occ_rep[:, i]) for i in range(n)],
        idle=[_estimate(idle_rep[:, i]) for i in range(n)],
        transform={
            float(s): [_estimate(tr_rep[:, k, i]) for i in range(n)]
            for k, s in enumerate(s_values)
        },
    )


def simulate_stationary(spec, cfg: SimConfig, s_values=()) -> StationarySimResult:
    """Time-average estimates of means, transforms and idle probabilities."""
    s_arr = np.asarray(list(s_values), dtype=float)
    mod = _kernel_module()
    states = stream_states(cfg.seed, cfg.replications)

    if isinstance(spec, ShotNoiseSpec):
        return _simulate_shotnoise(spec, cfg, s_arr, mod, states)
    if isinstance(spec, WaitDepSpec):
        report = spec.violations()
        if report:
            raise SpecValidationError(report)
        p_cdf = _row_cdf(np.array(spec.chain, dtype=float))
        raw = mod.sim_waitdep(states, cfg.steps, cfg.burn_in, p_cdf,
                              np.array(spec.rates), spec.mu, spec.c, s_arr)
        return _package(raw, cfg, s_arr)

    if not isinstance(spec, ModelSpec):
        raise UnsupportedSampling(f"no sampler for {type(spec).__name__}")
    require_valid(spec)
    if not isinstance(spec.model_kind, Autoregressive):
        raise UnsupportedSampling("autoregressive sampling expects an autoregressive spec")
    p_cdf = _row_cdf(spec.transition_matrix())

    dep = spec.dependence
    if isinstance(dep, BME):
        sampler = dep.sampler or {}
        if sampler.get("kind") != "indep_exp":
            raise UnsupportedSampling(
                "BME joints are samplable only via an explicit indep_exp construction"
            )
        lam = np.asarray(sampler["lam"], dtype=float)
        mu = np.asarray(sampler["mu"], dtype=float)
        raw = mod.sim_ar_exp(states, cfg.steps, cfg.burn_in, p_cdf, lam, mu,
                             spec.a, s_arr)
        return _package(raw, cfg, s_arr)

    if not isinstance(spec.services, ExponentialService):
        raise UnsupportedSampling("stationary sampling supports exponential services")
    mu = np.array(spec.services.rates, dtype=float)

    if isinstance(dep, CondIndep) and isinstance(spec.arrivals, ExponentialArrivals):
        lam = np.array(spec.arrivals.rates, dtype=float)
        raw = mod.sim_ar_exp(states, cfg.steps, cfg.burn_in, p_cdf, lam, mu,
                             spec.a, s_arr)
    elif isinstance(dep, FGM) and isinstance(spec.arrivals, ExponentialArrivals):
        lam = np.array(spec.arrivals.rates, dtype=float)
        raw = mod.sim_ar_fgm(states, cfg.steps, cfg.burn_in, p_cdf, lam, mu,
                             spec.a, dep.theta, s_arr)
    elif isinstance(dep, CondIndep) and isinstance(spec.arrivals, MixedErlangArrivals):
        lam = np.array(spec.arrivals.rates, dtype=float)
        q_cdf = np.cumsum(np.array(spec.arrivals.weights, dtype=float))
        q_cdf[-1] = 1.0
        raw = mod.sim_ar_mixed_erlang(states, cfg.steps, cfg.burn_in, p_cdf, lam,
                                      mu, spec.a, q_cdf, s_arr)
    else:
        raise UnsupportedSampling(
            f"no sampler for dependence {type(dep).__name__} with "
            f"{type(spec.arrivals).__name__}"
        )
    return _package(raw, cfg, s_arr)


def _simulate_shotnoise(spec, cfg, s_arr, mod, states):
    report = spec.violations()
    if report:
        raise SpecValidationError(report)
    if not isinstance(spec.services, ExponentialService):
        raise UnsupportedSampling("shot-noise sampling supports exponential services")
    n = spec.n_states
    jump_kind = np.zeros(n, dtype=np.int64)
    jump_rate = np.ones(n)
    for j, lst in enumerate(spec.jump_lsts):
        num = np.trim_zeros(np.asarray(lst.num, dtype=complex), "b")
        den = np.trim_zeros(np.asarray(lst.den, dtype=complex), "b")
        if len(num) == 1 and len(den) == 1:
            jump_kind[j] = 0  # point mass at zero
        elif len(num) == 1 and len(den) == 2:
            jump_kind[j] = 1  # exponential jump, rate = den0/den1
            jump_rate[j] = float((den[0] / den[1]).real)
        else:
            raise UnsupportedSampling(
                "positive jumps are samplable when degenerate or exponential"
            )
    p_cdf = _row_cdf(np.array(spec.chain, dtype=float))
    raw = mod.sim_shotnoise(
        states, cfg.steps, cfg.burn_in, p_cdf,
        np.array(spec.services.rates), float(np.exp(-spec.r * spec.t)),
        spec.p, jump_kind, jump_rate, np.array(spec.neg_rates), s_arr,
    )
    return _package(raw, cfg, s_arr)


# --------------------------------------------------------------------------
# FGM pair sampling (single draws, used by the distributional tests)
# --------------------------------------------------------------------------

def fgm_conditional_inverse(u1: float, u: float, theta: float) -> float:
    """Solve u2 + theta u2 (1-u2)(1-2 u1) = u for the root in [0, 1]."""
    b = theta * (1.0 - 2.0 * u1)
    if abs(b) < 1e-12:
        return u
    disc = (1.0 + b) ** 2 - 4.0 * b * u
    return ((1.0 + b) - np.sqrt(disc)) / (2.0 * b)


def sample_fgm_pair(i, j, theta, lam_j, service_sampler, rng):
    """One draw of the coupled (service, next interarrival) pair.

    ``service_sampler(rng)`` must return (S, F_S(S)); the interarrival is then
    produced by conditional inversion of the copula and exponential inverse
    CDF.  Marginals are exact by construction.
    """
    s_val, u1 = service_sampler(rng)
    u = rng.random()
    u2 = fgm_conditional_inverse(u1, u, theta)
    u2 = min(u2, 1.0 - 1e-16)
    a_val = -np.log1p(-u2) / lam_j
    return s_val, a_val


def exp_service_sampler(mu: float):
    def sampler(rng):
        u = rng.random()
        return -np.log1p(-u) / mu, u

    return sampler


# --------------------------------------------------------------------------
# Transient simulation (fresh replications per path, no time averaging)
# --------------------------------------------------------------------------

@dataclass
class TransientSimResult:
    """Per-n estimates of E[e^{-s W_n} 1{Y_n=j}] with raw per-path data."""

    values: np.ndarray   # (n_max, N)
    ses: np.ndarray      # (n_max, N)
    per_path: np.ndarray  # (n_max, R, N)

    def r_weighted(self, r: float):
        """SimEstimates of the r-discounted sum over n, one per state."""
        weights = r ** np.arange(1, self.per_path.shape[0] + 1)
        sums = np.einsum("n,nrj->rj", weights, self.per_path)
        return [_estimate(sums[:, j]) for j in range(sums.shape[1])]


def simulate_transient(spec, services, a, n_max, s, cfg: SimConfig) -> TransientSimResult:
    """Estimates of E[e^{-s W_n} 1{Y_n=j}] for n = 1..n_max.

    The background chain runs in continuous time (exponential holding times,
    embedded jumps) and arrivals form a state-modulated Poisson process.
    """
    report = spec.violations()
    if report:
        raise SpecValidationError(report)
    if not isinstance(services, ExponentialService):
        raise UnsupportedSampling("transient sampling supports exponential services")
    n = spec.n_states
    lam = np.array(spec.rates, dtype=float)
    mu = np.array(services.rates, dtype=float)
    q = spec.q_matrix()
    q_exit = -np.diag(q)
    jump_cdf = np.zeros((n, n))
    for i in range(n):
        if q_exit[i] > 0:
            row = q[i].copy()
            row[i] = 0.0
            jump_cdf[i] = np.cumsum(row / q_exit[i])
            jump_cdf[i, -1] = 1.0
        else:
            jump_cdf[i] = 1.0

    r_total = cfg.replications
    streams = Streams(cfg.seed, r_total)
    p_cdf0 = np.cumsum(np.array(spec.initial, dtype=float))
    p_cdf0[-1] = 1.0

    u0 = streams.uniform()
    x = (u0[:, None] < p_cdf0[None, :]).argmax(axis=1)
    w = np.full(r_total, float(spec.w))
    est = np.zeros((n_max, r_total, n))
    rows = np.arange(r_total)

    for step in range(n_max):
        est[step, rows, x] = np.exp(-s * w)
        # service of the customer arriving now, then CTMC run to next arrival
        u_s = streams.uniform()
        s_n = -np.log1p(-u_s) / mu[x]
        arrived = np.zeros(r_total, dtype=bool)
        a_n = np.zeros(r_total)
        guard = 0
        while not arrived.all():
            active = ~arrived
            u_t = streams.uniform(active)
            rate = lam[x] + q_exit[x]
            a_n[active] += -np.log1p(-u_t[active]) / rate[active]
            u_e = streams.uniform(active)
            is_arrival = np.zeros(r_total, dtype=bool)
            is_arrival[active] = u_e[active] < (lam[x] / rate)[active]
            jumpers = active & ~is_arrival
            if jumpers.any():
                u_d = streams.uniform(jumpers)
                dest = (u_d[jumpers, None] < jump_cdf[x[jumpers]]).argmax(axis=1)
                x[jumpers] = dest
            arrived |= is_arrival
            guard += 1
            if guard > 10_000_000:
                raise RuntimeError("CTMC arrival loop failed to terminate")
        w = np.maximum(a * w + s_n - a_n, 0.0)

    values = est.mean(axis=1)
    ses = est.std(axis=1, ddof=1) / np.sqrt(r_total)
    return TransientSimResult(values, ses, est)


def simulate_transient_service_linked(initial, w0, services, p_matrix, lam,
                                      kappa, d_rates, a, n_max, s, cfg: SimConfig):
    """Oracle for the service-linked interarrival law.

    Realizes the conditional transform chi_{i,j}(s) e^{-psi_i(s) t} with
    chi_{i,j}(s) = p_{i,j} lam_j/(lam_j+s) and psi_i(s) = kappa_i s/(s+d_i):
    the interarrival is an exponential plus a compound-Poisson sum of
    Poisson(kappa_i S_n) many exp(d_i) jumps.  Moment identities of this
    construction are validated in the test suite.
    """
    if not isinstance(services, ExponentialService):
        raise UnsupportedSampling("service-linked sampling supports exponential services")
    n = len(initial)
    lam = np.asarray(lam, dtype=float)
    mu = np.array(services.rates, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    d_rates = np.asarray(d_rates, dtype=float)
    p_cdf = _row_cdf(np.asarray(p_matrix, dtype=float))

    r_total = cfg.replications
    streams = Streams(cfg.seed, r_total)
    p_cdf0 = np.cumsum(np.asarray(initial, dtype=float))
    p_cdf0[-1] = 1.0
    u0 = streams.uniform()
    y = (u0[:, None] < p_cdf0[None, :]).argmax(axis=1)
    w = np.full(r_total, float(w0))
    est = np.zeros((n_max, r_total, n))
    rows = np.arange(r_total)

    for step in range(n_max):
        est[step, rows, y] = np.exp(-s * w)
        u_s = streams.uniform()
        s_n = -np.log1p(-u_s) / mu[y]
        u_c = streams.uniform()
        j = (u_c[:, None] < p_cdf[y]).argmax(axis=1)
        u_a = streams.uniform()
        a_n = -np.log1p(-u_a) / lam[j]
        # Poisson(kappa_i S_n) many exp(d_i) increments, inversion by products
        mean = kappa[y] * s_n
        thresh = np.exp(-mean)
        prod = streams.uniform()
        alive = prod > thresh
        guard = 0
        while alive.any():
            u_j = streams.uniform(alive)
            a_n[alive] += -np.log1p(-u_j[alive]) / d_rates[y[alive]]
            u_p = streams.uniform(alive)
            prod[alive] *= u_p[alive]
            alive &= prod > thresh
            guard += 1
            if guard > 1_000_000:
                raise RuntimeError("compound-Poisson loop failed to terminate")
        w = np.maximum(a * w + s_n - a_n, 0.0)
        y = j
    values = est.mean(axis=1)
    ses = est.std(axis=1, ddof=1) / np.sqrt(r_total)
    return TransientSimResult(values, ses, est)
