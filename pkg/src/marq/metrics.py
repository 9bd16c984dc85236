"""Correlation formulas and truncation-count diagnostics.

The service autocorrelation follows the standard quadratic form in the chain
powers.  For the cross-correlation between an interarrival time and the
service time of the same customer, both quantities are read off the common
background state, and an FGM coupling adds theta times the product of the
marginal concentration integrals to the mixed moment; this same-customer
convention reproduces the reference values (0.1677 at theta=0, 0.3521 at
theta=0.9, ...).  The coupled-pair convention (service and the subsequent
interarrival, one chain step apart) is computed alongside for comparison and
never silently substituted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import chain_power
from .errors import DegenerateVariance, SpecValidationError
from .model import CondIndep, ExponentialArrivals, FGM, ModelSpec
from .stationary import fgm_system


def autocorrelation_service(spec: ModelSpec, n: int) -> float:
    """Autocorrelation of two service times n transitions apart."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mc = spec.markov_chain()
    pi = mc.stationary()
    pn = chain_power(mc, n)
    nstates = mc.n_states
    gamma = np.array([spec.services.mean(i) for i in range(nstates)])
    second = np.array([spec.services.second_moment(i) for i in range(nstates)])
    denom = float(pi @ second - (pi @ gamma) ** 2)
    if denom <= 1e-14:
        raise DegenerateVariance(f"service variance {denom} is not positive")
    numer = 0.0
    for i in range(nstates):
        for j in range(nstates):
            numer += pi[i] * (pn[i, j] - pi[j]) * gamma[i] * gamma[j]
    return float(numer / denom)


@dataclass(frozen=True)
class CrossCorrelation:
    """Same-customer correlation plus the coupled-pair alternative."""

    value: float          # corr(A_n, S_n), both read off the common state
    coupled_pair: float   # corr(S_n, A_{n+1}), the FGM-coupled pair
    theta: float

    def __float__(self):
        return self.value


def _marginal_moments(spec):
    mc = spec.markov_chain()
    pi = mc.stationary()
    n = mc.n_states
    lam = np.array(spec.arrivals.rates, dtype=float)
    gamma = np.array([spec.services.mean(i) for i in range(n)])
    second = np.array([spec.services.second_moment(i) for i in range(n)])
    e_s, e_s2 = float(pi @ gamma), float(pi @ second)
    e_a = float(pi @ (1.0 / lam))
    e_a2 = float(pi @ (2.0 / lam**2))
    var_s = e_s2 - e_s**2
    var_a = e_a2 - e_a**2
    if var_s <= 1e-14 or var_a <= 1e-14:
        raise DegenerateVariance(f"variances {var_s}, {var_a} must be positive")
    return mc, pi, lam, gamma, e_s, e_a, var_s, var_a


def cross_correlation_detail(spec: ModelSpec) -> CrossCorrelation:
    if not isinstance(spec.arrivals, ExponentialArrivals):
        raise SpecValidationError(["cross_correlation needs exponential arrivals"])
    if isinstance(spec.dependence, FGM):
        theta = float(spec.dependence.theta)
    elif isinstance(spec.dependence, CondIndep):
        theta = 0.0
    else:
        raise SpecValidationError(
            ["cross_correlation supports independent or FGM dependence"]
        )
    mc, pi, lam, gamma, e_s, e_a, var_s, var_a = _marginal_moments(spec)
    n = mc.n_states
    kappa_s = np.array([spec.services.curvature_integral(i) for i in range(n)])
    kappa_a = 1.0 / (2.0 * lam)

    # Same-customer pair: interarrival and service share the state index.
    e_as = float(pi @ (gamma / lam + theta * kappa_s * kappa_a))
    value = (e_as - e_a * e_s) / np.sqrt(var_a * var_s)

    # Coupled pair (S_n, A_{n+1}): service indexed by the source state,
    # interarrival by the destination state of one transition.
    p = mc.transition
    e_sa = 0.0
    for i in range(n):
        for j in range(n):
            e_sa += pi[i] * p[i, j] * (gamma[i] / lam[j] + theta * kappa_s[i] * kappa_a[j])
    coupled = (e_sa - e_s * e_a) / np.sqrt(var_a * var_s)
    return CrossCorrelation(float(value), float(coupled), theta)


def cross_correlation(spec: ModelSpec) -> float:
    """Stationary interarrival/service correlation (same-customer pairing)."""
    return cross_correlation_detail(spec).value


# --------------------------------------------------------------------------
# Truncation-count probes (the Tables 1-2 diagnostics)
# --------------------------------------------------------------------------

def fgm_truncation_counts(spec: ModelSpec, tolerance: float = 1e-7,
                          max_terms: int = 10_000):
    """Product-form term counts of the boundary series and tail products.

    For every boundary point n*lambda_j (n = 1, 2) the probe forms the
    partial products u_{m,j}(n,k) = prod_{d<k} U(a^{d+1} n lambda_j) (I -
    L_m(a^{k+1} n lambda_j)) and f_j(n,k) = prod_{d<=k} U(a^{d+1} n lambda_j)
    and reports the 1-based index of the first member that differs from its
    predecessor by less than the tolerance in max-abs norm (the number of
    product-form terms that carry information at that tolerance).  Keys are
    (m, j, n) and (j, n) with 1-based indices.
    """
    if not isinstance(spec.dependence, (FGM, CondIndep)):
        raise SpecValidationError(["truncation counts are defined for the FGM system"])
    probe_spec = spec if isinstance(spec.dependence, FGM) else spec.with_theta(0.0)
    from . import jets

    U, iml, lam, _, _, _, nstates = fgm_system(probe_spec)
    a = float(spec.a)
    k_counts = {}
    l_counts = {}
    for j in range(nstates):
        for mult in (1, 2):
            base = mult * lam[j]
            prefix = np.eye(nstates, dtype=complex)
            u_prev = {1: None, 2: None}
            f_prev = None
            found_k = {}
            found_l = None
            k = 0
            while len(found_k) < 2 or found_l is None:
                if k > max_terms:
                    raise RuntimeError("truncation probe exceeded max_terms")
                u_fact = jets.variable(a ** (k + 1) * base, 0)
                for m in (1, 2):
                    if m in found_k:
                        continue
                    trail = np.diag([jets.value(iml(m, t, u_fact)) for t in range(nstates)])
                    u_cur = prefix @ trail
                    if u_prev[m] is not None:
                        if np.max(np.abs(u_cur - u_prev[m])) <= tolerance:
                            found_k[m] = k + 1
                    u_prev[m] = u_cur
                u_mat = jets.value(U(u_fact))
                f_cur = prefix @ u_mat
                if found_l is None and f_prev is not None:
                    if np.max(np.abs(f_cur - f_prev)) <= tolerance:
                        found_l = k + 1
                f_prev = f_cur
                prefix = f_cur
                k += 1
            for m in (1, 2):
                k_counts[(m, j + 1, mult)] = found_k[m]
            l_counts[(j + 1, mult)] = found_l
    return k_counts, l_counts
