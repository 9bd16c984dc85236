"""Steady-state solvers for the modulated reflected autoregressive recursion.

Four dependence regimes share one template: build the coefficient matrix H(s)
and inhomogeneity V(s) of the fixed-point equation Z(s) = H(s) Z(a s) + V(s),
resolve the unknown constants inside V by a linear system obtained from the
truncated series itself, then expose transform and moment evaluation.
"""

from __future__ import annotations

from math import comb, factorial

import numpy as np

from . import jets
from .boundary import (
    BoundaryVector,
    boundary_policy,
    cluster_points,
    falling,
    leibniz_row,
    solve_boundary,
)
from .engine import Scale, TransformResult, TruncationPolicy, iterate_fixed_point
from .errors import AmbiguousRoot, InvalidBoundary, SpecValidationError
from .lst import poly_from_roots, polyroots
from .model import (
    BME,
    CondIndep,
    ExponentialArrivals,
    FGM,
    MixedErlangArrivals,
    ModelSpec,
    Autoregressive,
    require_valid,
)

AXIS_TOLERANCE = 1e-9


def _ratio(c: float, s: np.ndarray) -> np.ndarray:
    """Jet of c / (c - s)."""
    order = s.shape[0] - 1
    den = jets.const(c, order) - s
    return jets.div(jets.const(c, order), den)


def _one_minus_ratio(c: float, s: np.ndarray) -> np.ndarray:
    """Jet of 1 - c/(c - s) = -s/(c - s)."""
    order = s.shape[0] - 1
    den = jets.const(c, order) - s
    return jets.div(-s, den)


class StationarySolution:
    """Immutable evaluator for one solved stationary model.

    ``evaluate(s)`` returns the transform vector Z(s); ``transform(s)`` also
    carries truncation diagnostics; derivatives of any order ride through the
    same series in jet arithmetic.
    """

    def __init__(self, label, spec, pi, H, V, zeta, poles, policy, boundary,
                 mean_closed_form=None, min_terms_fn=None, tail=True):
        self.label = label
        self.spec = spec
        self.pi = pi
        self._H = H
        self._V = V
        self.zeta = zeta
        self.poles = tuple(poles)
        self.policy = policy
        self.boundary = boundary
        self._mean_closed_form = mean_closed_form
        self._min_terms_fn = min_terms_fn
        self._tail = tail

    @property
    def n_states(self):
        return len(self.pi)

    def transform(self, s, order: int = 0, policy=None) -> TransformResult:
        pol = policy or self.policy
        if self._min_terms_fn is not None:
            s0 = complex(s) if np.ndim(s) == 0 else complex(np.asarray(s)[0])
            pol = TruncationPolicy(
                pol.tolerance, pol.max_terms, max(pol.min_terms, self._min_terms_fn(s0))
            )
        return iterate_fixed_point(
            self._H, self._V, self.zeta, self.pi if self._tail else None, s,
            pol, self.poles, order,
        )

    def evaluate(self, s, order: int = 0):
        res = self.transform(s, order=order)
        return res.value if order == 0 else res.derivative(order)

    def mean_vector(self) -> np.ndarray:
        """E[W 1_{Y=i}] per state, from the closed form when one exists."""
        if self._mean_closed_form is not None:
            return self._mean_closed_form()
        deriv = self.transform(0.0, order=1).derivative(1)
        return -deriv.real

    def total_mean(self) -> float:
        return float(self.mean_vector().sum())

    def second_moment_vector(self) -> np.ndarray:
        return self.transform(0.0, order=2).derivative(2).real

    def default_grid(self, count: int = 8):
        grid = np.geomspace(0.1, 10.0, count)
        # nudge sample points off any registered pole
        for k, s in enumerate(grid):
            while any(abs(s - p) < 1e-4 for p in self.poles):
                s += 1e-3
            grid[k] = s
        return grid

    def to_json_dict(self, s_grid=None) -> dict:
        if s_grid is None:
            s_grid = self.default_grid()
        table = []
        for s in s_grid:
            res = self.transform(complex(s))
            table.append(
                {
                    "s": float(np.real(s)),
                    "Z": [[z.real, z.imag] for z in res.value],
                    "terms_used": res.terms_used,
                    "residual": res.residual,
                }
            )
        return {
            "solver": self.label,
            "pi": list(map(float, self.pi)),
            "boundary": self.boundary.to_json_dict(),
            "mean": list(map(float, self.mean_vector())),
            "transform_table": table,
        }


def mean_workload(solution: StationarySolution) -> np.ndarray:
    """Mean workload vector M_i = E[W 1_{Y=i}] of a solved model."""
    return solution.mean_vector()


def _check_probability_vector(values, kind):
    values = np.atleast_1d(values)
    if values.size and np.max(np.abs(values.imag)) > 1e-9:
        raise InvalidBoundary(f"{kind}: imaginary residue {np.max(np.abs(values.imag)):.2e}")
    real = values.real
    if values.size and (np.any(real <= 0) or np.any(real > 1 + 1e-12)):
        raise InvalidBoundary(f"{kind}: entries outside (0,1]: {real}")
    return real


# --------------------------------------------------------------------------
# Exponential interarrivals, conditionally independent services
# --------------------------------------------------------------------------

def solve_exponential(spec: ModelSpec, policy: TruncationPolicy = TruncationPolicy()):
    require_valid(spec)
    if not isinstance(spec.arrivals, ExponentialArrivals):
        raise SpecValidationError(["solve_exponential needs exponential arrivals"])
    if not isinstance(spec.dependence, CondIndep):
        raise SpecValidationError(["solve_exponential needs conditionally independent services"])
    if not isinstance(spec.model_kind, Autoregressive):
        raise SpecValidationError(["solve_exponential handles the autoregressive recursion"])

    mc = spec.markov_chain()
    pi = mc.stationary()
    pt = mc.transition.T
    lam = np.array(spec.arrivals.rates, dtype=float)
    services = spec.services
    a = float(spec.a)
    n = mc.n_states

    def H(s):
        order = s.shape[0] - 1
        L = jets.diag([_ratio(lam[j], s) for j in range(n)])
        B = jets.diag([services.lst(i, s) for i in range(n)])
        return jets.matmul(jets.matmul(L, jets.const(pt, order)), B)

    poles = lam.astype(complex)

    def V_batch(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n, n + 1), dtype=complex)
        for j in range(n):
            out[:, j, 1 + j] = _one_minus_ratio(lam[j], s)
        return out

    tail_batch = np.zeros((n, n + 1), dtype=complex)
    tail_batch[:, 0] = pi

    beta_at_lam = np.array(
        [[jets.value(services.lst(i, jets.variable(lam[j], 0))) for i in range(n)]
         for j in range(n)]
    )

    bpol = boundary_policy(policy)
    coeff = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for j in range(n):
        probe = iterate_fixed_point(
            H, V_batch, Scale(a), tail_batch, a * lam[j], bpol, poles
        )
        w = pt[j, :] * beta_at_lam[j, :]          # e_j P^T B*(lambda_j)
        proj = w @ probe.value                    # affine in v: [const, coeffs...]
        rhs[j] = proj[0]
        coeff[j, :] = proj[1:]

    bd = solve_boundary(np.eye(n) - coeff, rhs, "exp_v")
    v = bd.values
    _check_probability_vector(v, "exp_v")

    def V(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n), dtype=complex)
        for j in range(n):
            out[:, j] = _one_minus_ratio(lam[j], s) * v[j]
        return out

    def mean_closed_form():
        # Differentiate Z(s) = H(s) Z(a s) + V(s) at 0:
        # (I - a P^T) Z'(0) = Phi pi - Lambda^{-1} v, M = -Z'(0).
        beta_prime = np.array([-services.mean(i) for i in range(n)])
        phi = np.diag(1.0 / lam) @ pt + pt @ np.diag(beta_prime)
        m = np.linalg.solve(a * pt - np.eye(n), phi @ pi - v.real / lam)
        return m.real

    return StationarySolution(
        "exponential", spec, pi, H, V, Scale(a), poles, policy, bd,
        mean_closed_form=mean_closed_form,
    )


# --------------------------------------------------------------------------
# Mixed-Erlang interarrivals
# --------------------------------------------------------------------------

def solve_mixed_erlang(spec: ModelSpec, policy: TruncationPolicy = TruncationPolicy()):
    require_valid(spec)
    if not isinstance(spec.arrivals, MixedErlangArrivals):
        raise SpecValidationError(["solve_mixed_erlang needs mixed-Erlang arrivals"])
    if not isinstance(spec.dependence, CondIndep):
        raise SpecValidationError(["solve_mixed_erlang needs conditionally independent services"])
    if not isinstance(spec.model_kind, Autoregressive):
        raise SpecValidationError(["solve_mixed_erlang handles the autoregressive recursion"])

    mc = spec.markov_chain()
    pi = mc.stationary()
    pt = mc.transition.T
    lam = np.array(spec.arrivals.rates, dtype=float)
    q = np.array(spec.arrivals.weights, dtype=float)
    m_phases = len(q)
    services = spec.services
    a = float(spec.a)
    n = mc.n_states
    n_unknowns = n * n * m_phases

    def idx(i, j, m):
        return (i * n + j) * m_phases + m

    # beta*_i and its derivatives at every lambda_j
    beta_derivs = np.zeros((n, n, m_phases), dtype=complex)
    for i in range(n):
        for j in range(n):
            bj = services.lst(i, jets.variable(lam[j], m_phases - 1))
            for d in range(m_phases):
                beta_derivs[i, j, d] = jets.derivative(bj, d)

    # w[j][i][k][l]: weight of unknown Z_i^{(k)}(a lambda_j) in v_j(l)
    w = np.zeros((n, n, m_phases, m_phases), dtype=complex)
    for j in range(n):
        for i in range(n):
            for l in range(m_phases):
                base = (-lam[j]) ** l / factorial(l)
                for k in range(l + 1):
                    w[j, i, k, l] = (
                        base * comb(l, k) * a**k * beta_derivs[i, j, l - k] * pt[j, i]
                    )

    def H(s):
        order = s.shape[0] - 1
        lhat = []
        for j in range(n):
            rho = _ratio(lam[j], s)
            acc = jets.const(0.0, order)
            for m, qm in enumerate(q, start=1):
                acc = acc + qm * jets.powi(rho, m)
            lhat.append(acc)
        L = jets.diag(lhat)
        B = jets.diag([services.lst(i, s) for i in range(n)])
        return jets.matmul(jets.matmul(L, jets.const(pt, order)), B)

    def _dfactors(s):
        """D_{j,l}(s) = sum_{m>l} q_m (1 - rho_j(s)^{m-l})."""
        order = s.shape[0] - 1
        out = []
        for j in range(n):
            rho = _ratio(lam[j], s)
            pows = [jets.const(1.0, order)]
            for _ in range(m_phases):
                pows.append(jets.mul(pows[-1], rho))
            row = []
            for l in range(m_phases):
                acc = jets.const(0.0, order)
                for m in range(l + 1, m_phases + 1):
                    acc = acc + q[m - 1] * (jets.const(1.0, order) - pows[m - l])
                row.append(acc)
            out.append(row)
        return out

    def V_batch(s):
        order = s.shape[0] - 1
        d = _dfactors(s)
        out = np.zeros((order + 1, n, n_unknowns + 1), dtype=complex)
        for j in range(n):
            for i in range(n):
                for k in range(m_phases):
                    col = 1 + idx(i, j, k)
                    acc = jets.const(0.0, order)
                    for l in range(k, m_phases):
                        acc = acc + w[j, i, k, l] * d[j][l]
                    out[:, j, col] = acc
        return out

    poles = lam.astype(complex)
    tail_batch = np.zeros((n, n_unknowns + 1), dtype=complex)
    tail_batch[:, 0] = pi

    bpol = boundary_policy(policy)
    amat = np.zeros((n_unknowns, n_unknowns), dtype=complex)
    bvec = np.zeros(n_unknowns, dtype=complex)
    for jp in range(n):
        probe = iterate_fixed_point(
            H, V_batch, Scale(a), tail_batch, a * lam[jp], bpol, poles,
            order=m_phases - 1,
        )
        for m in range(m_phases):
            layer = probe.jet[m] * factorial(m)   # Z^{(m)}(a lambda_jp), affine columns
            for i in range(n):
                row = idx(i, jp, m)
                bvec[row] = layer[i, 0]
                amat[row, :] = layer[i, 1:]

    bd = solve_boundary(np.eye(n_unknowns) - amat, bvec, "erlang_derivatives")
    x = bd.values

    vjl = np.zeros((n, m_phases), dtype=complex)
    for j in range(n):
        for l in range(m_phases):
            vjl[j, l] = sum(
                w[j, i, k, l] * x[idx(i, j, k)] for i in range(n) for k in range(l + 1)
            )

    def V(s):
        order = s.shape[0] - 1
        d = _dfactors(s)
        out = np.zeros((order + 1, n), dtype=complex)
        for j in range(n):
            acc = jets.const(0.0, order)
            for l in range(m_phases):
                acc = acc + vjl[j, l] * d[j][l]
            out[:, j] = acc
        return out

    return StationarySolution(
        "mixed_erlang", spec, pi, H, V, Scale(a), poles, policy, bd,
    )


# --------------------------------------------------------------------------
# FGM-coupled service and interarrival times
# --------------------------------------------------------------------------

def fgm_system(spec: ModelSpec):
    """Coefficient matrix U(s; theta) and part factors of the FGM model.

    Returns (U, iml1, iml2, meta) where iml_k(s) gives the diagonal jets of
    I - L_k(s); the inhomogeneity is K(s) = (I - L_1(s)) v1 + (I - L_2(s)) v2
    with v2 carrying theta itself.
    """
    mc = spec.markov_chain()
    pt = mc.transition.T
    lam = np.array(spec.arrivals.rates, dtype=float)
    theta = float(spec.dependence.theta)
    services = spec.services
    n = mc.n_states

    def U(s):
        order = s.shape[0] - 1
        l1 = jets.diag([_ratio(lam[j], s) for j in range(n)])
        iml2 = jets.diag([_one_minus_ratio(2 * lam[j], s) for j in range(n)])
        B = jets.diag([services.lst(i, s) for i in range(n)])
        G = jets.diag([services.g_star(i, s) for i in range(n)])
        core = jets.matmul(jets.const(pt, order), B)
        if theta != 0.0:
            core = core + theta * jets.matmul(iml2, jets.matmul(jets.const(pt, order), G))
        return jets.matmul(l1, core)

    def iml(k_mult, j, s):
        return _one_minus_ratio(k_mult * lam[j], s)

    return U, iml, lam, pt, theta, services, n


def solve_fgm(spec: ModelSpec, policy: TruncationPolicy = TruncationPolicy()):
    require_valid(spec)
    if not isinstance(spec.arrivals, ExponentialArrivals):
        raise SpecValidationError(["solve_fgm needs exponential arrivals"])
    if not isinstance(spec.dependence, FGM):
        raise SpecValidationError(["solve_fgm needs FGM dependence"])
    if not isinstance(spec.model_kind, Autoregressive):
        raise SpecValidationError(["solve_fgm handles the autoregressive recursion"])

    mc = spec.markov_chain()
    pi = mc.stationary()
    U, iml, lam, pt, theta, services, n = fgm_system(spec)
    a = float(spec.a)

    poles = np.concatenate([lam, 2 * lam]).astype(complex)

    def V_batch(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n, 2 * n + 1), dtype=complex)
        for j in range(n):
            out[:, j, 1 + j] = iml(1, j, s)
            out[:, j, 1 + n + j] = iml(2, j, s)
        return out

    tail_batch = np.zeros((n, 2 * n + 1), dtype=complex)
    tail_batch[:, 0] = pi

    beta_at = np.zeros((n, n), dtype=complex)
    g_at_1 = np.zeros((n, n), dtype=complex)
    g_at_2 = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for i in range(n):
            beta_at[j, i] = jets.value(services.lst(i, jets.variable(lam[j], 0)))
            g_at_1[j, i] = jets.value(services.g_star(i, jets.variable(lam[j], 0)))
            g_at_2[j, i] = jets.value(services.g_star(i, jets.variable(2 * lam[j], 0)))

    bpol = boundary_policy(policy)
    coeff = np.zeros((2 * n, 2 * n), dtype=complex)
    rhs = np.zeros(2 * n, dtype=complex)
    for j in range(n):
        probe1 = iterate_fixed_point(U, V_batch, Scale(a), tail_batch, a * lam[j],
                                     bpol, poles)
        w1 = pt[j, :] * (beta_at[j, :] - theta * g_at_1[j, :])
        proj1 = w1 @ probe1.value
        rhs[j] = proj1[0]
        coeff[j, :] = proj1[1:]

        probe2 = iterate_fixed_point(U, V_batch, Scale(a), tail_batch, 2 * a * lam[j],
                                     bpol, poles)
        w2 = theta * pt[j, :] * g_at_2[j, :]
        proj2 = w2 @ probe2.value
        rhs[n + j] = proj2[0]
        coeff[n + j, :] = proj2[1:]

    bd = solve_boundary(np.eye(2 * n) - coeff, rhs, "fgm_v1_v2")
    v1 = bd.values[:n]
    v2 = bd.values[n:]
    _check_probability_vector(v1, "fgm_v1")

    def V(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n), dtype=complex)
        for j in range(n):
            out[:, j] = iml(1, j, s) * v1[j] + iml(2, j, s) * v2[j]
        return out

    return StationarySolution("fgm", spec, pi, U, V, Scale(a), poles, policy, bd)


# --------------------------------------------------------------------------
# Bilateral matrix-exponential dependence
# --------------------------------------------------------------------------

def solve_bme(spec: ModelSpec, policy: TruncationPolicy = TruncationPolicy()):
    require_valid(spec)
    if not isinstance(spec.dependence, BME):
        raise SpecValidationError(["solve_bme needs bilateral matrix-exponential dependence"])
    if not isinstance(spec.model_kind, Autoregressive):
        raise SpecValidationError(["solve_bme handles the autoregressive recursion"])

    mc = spec.markov_chain()
    pi = mc.stationary()
    pt = mc.transition.T
    pairs = spec.dependence.pairs
    a = float(spec.a)
    n = mc.n_states

    # Zero classification per transition pair.
    plus_roots = [[None] * n for _ in range(n)]
    minus_poly = [[None] * n for _ in range(n)]
    all_poles = []
    for i in range(n):
        for j in range(n):
            g = pairs[i][j].den
            roots = polyroots(g)
            for r in roots:
                if abs(r.real) < AXIS_TOLERANCE:
                    raise AmbiguousRoot(
                        f"zero {r} of g[{i}][{j}] lies within {AXIS_TOLERANCE} of the imaginary axis"
                    )
            plus = roots[roots.real > 0]
            minus = roots[roots.real < 0]
            lc = np.trim_zeros(np.asarray(g, dtype=complex), "b")[-1]
            plus_roots[i][j] = plus
            minus_poly[i][j] = poly_from_roots(minus, lc)
            all_poles.extend(roots.tolist())

    # Per target state j: denominator D_j = prod_i g+_{i,j}, numerator unknowns.
    deg = [sum(len(plus_roots[i][j]) for i in range(n)) for j in range(n)]
    offsets = np.concatenate([[0], np.cumsum(deg)]).astype(int)
    n_unknowns = int(offsets[-1])
    d_poly = [poly_from_roots(np.concatenate([plus_roots[i][j] for i in range(n)])
                              if deg[j] else [], 1.0) for j in range(n)]

    def H(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n, n), dtype=complex)
        for j in range(n):
            for i in range(n):
                out[:, j, i] = pt[j, i] * pairs[i][j](s)
        return out

    def V_batch(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n, n_unknowns + 1), dtype=complex)
        for j in range(n):
            if deg[j] == 0:
                continue
            dinv = jets.inv(jets.polyval(d_poly[j], s))
            spow = s.copy()
            for m in range(1, deg[j] + 1):
                out[:, j, 1 + offsets[j] + m - 1] = jets.mul(spow, dinv)
                spow = jets.mul(spow, s)
        return out

    tail_batch = np.zeros((n, n_unknowns + 1), dtype=complex)
    tail_batch[:, 0] = pi
    poles = np.array(all_poles, dtype=complex)

    # Coefficient functions R_{i,j}(s) = p_{i,j} f_{i,j} prod_{k!=i} g_{k,j} / prod_t g-_{t,j}
    num_r = [[None] * n for _ in range(n)]
    den_r = [None] * n
    for j in range(n):
        dpoly = np.array([1.0 + 0j])
        for t in range(n):
            dpoly = np.convolve(dpoly, minus_poly[t][j])
        den_r[j] = dpoly
        for i in range(n):
            npoly = pt[j, i] * np.asarray(pairs[i][j].num, dtype=complex)
            for k in range(n):
                if k != i:
                    npoly = np.convolve(npoly, np.asarray(pairs[k][j].den, dtype=complex))
            num_r[i][j] = npoly

    bpol = boundary_policy(policy)
    rows = []
    rhs = []
    for j in range(n):
        if deg[j] == 0:
            continue
        clusters = cluster_points(np.concatenate([plus_roots[i][j] for i in range(n)]))
        for center, nu in clusters:
            s_star = jets.variable(center, nu - 1)
            r_jets = [jets.div(jets.polyval(num_r[i][j], s_star),
                               jets.polyval(den_r[j], s_star)) for i in range(n)]
            probe = iterate_fixed_point(
                H, V_batch, Scale(a), tail_batch, a * center, bpol, poles,
                order=nu - 1,
            )
            for d in range(nu):
                row = np.zeros(n_unknowns, dtype=complex)
                const = 0.0 + 0j
                for i in range(n):
                    lrow = leibniz_row(d, r_jets[i], probe.jet[:, i, :], a)
                    const += lrow[0]
                    row += lrow[1:]
                for m in range(1, deg[j] + 1):
                    row[offsets[j] + m - 1] += falling(m, d) * center ** (m - d)
                rows.append(row)
                rhs.append(-const)

    bd = solve_boundary(np.array(rows).reshape(n_unknowns, n_unknowns),
                        np.array(rhs), "bme_coefficients")
    c = bd.values

    def V(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n), dtype=complex)
        for j in range(n):
            if deg[j] == 0:
                continue
            numer = np.concatenate([[0.0], c[offsets[j]:offsets[j + 1]]])
            out[:, j] = jets.div(jets.polyval(numer, s), jets.polyval(d_poly[j], s))
        return out

    return StationarySolution("bme", spec, pi, H, V, Scale(a), poles, policy, bd)
