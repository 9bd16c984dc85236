"""Steady-state solvers for the two related modulated recursions.

Shot-noise queue: deterministic interarrival t, workload-proportional server
speed r, two-sided noise jumps at arrival epochs; the shift map contracts by
e^{-rt}.  Wait-dependent queue: service requirement [S_n - c W_n]^+ with a
common exp(mu) service law; the shift map translates by mu c and the series
decays because the coefficient matrices shrink like 1/(mu + s + l mu c).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .boundary import boundary_policy, solve_boundary
from .chain import MarkovChain
from .engine import (
    ExpScale,
    TransformResult,
    Translate,
    TruncationPolicy,
    iterate_fixed_point,
)
from .errors import (
    DegenerateSpectrum,
    InvalidBoundary,
    NoConvergence,
    SpecValidationError,
)
from .stationary import StationarySolution, _one_minus_ratio, _ratio

SPECTRUM_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ShotNoiseSpec:
    chain: tuple
    services: object
    r: float
    t: float
    p: float
    jump_lsts: tuple
    neg_rates: tuple[float, ...]

    @property
    def n_states(self):
        return len(self.chain)

    def violations(self):
        out = []
        n = self.n_states
        try:
            MarkovChain(np.array(self.chain, dtype=float))
        except Exception as exc:
            out.append(f"chain: {exc}")
        out += self.services.violations(n)
        if not (self.r > 0 and self.t > 0):
            out.append("shot-noise decay r and interarrival t must be > 0")
        if not 0.0 <= self.p <= 1.0:
            out.append("jump probability p must lie in [0,1]")
        if len(self.neg_rates) != n or any(v <= 0 for v in self.neg_rates):
            out.append("negative-jump rates must be positive, one per state")
        if len(self.jump_lsts) != n:
            out.append("positive-jump LSTs must be given per state")
        else:
            for j, c in enumerate(self.jump_lsts):
                if abs(c.value(0.0) - 1.0) > 1e-9:
                    out.append(f"jump_lsts[{j}] must equal 1 at s=0")
        return out

    @classmethod
    def from_model_spec(cls, spec):
        from .model import DeterministicArrivals, ShotNoise

        kind = spec.model_kind
        if not isinstance(kind, ShotNoise):
            raise SpecValidationError(["model_kind must be shot_noise"])
        if isinstance(spec.arrivals, DeterministicArrivals):
            if abs(spec.arrivals.t - kind.t) > 1e-12:
                raise SpecValidationError(
                    ["deterministic interarrival t must match model_kind.t"]
                )
        return cls(
            chain=spec.chain,
            services=spec.services,
            r=kind.r,
            t=kind.t,
            p=kind.p,
            jump_lsts=kind.jump_lsts,
            neg_rates=kind.neg_rates,
        )


def solve_shotnoise(spec: ShotNoiseSpec, policy: TruncationPolicy = TruncationPolicy()):
    report = spec.violations()
    if report:
        raise SpecValidationError(report)
    mc = MarkovChain(np.array(spec.chain, dtype=float))
    pi = mc.stationary()
    pt = mc.transition.T
    n = mc.n_states
    nu = np.array(spec.neg_rates, dtype=float)
    p, q = spec.p, 1.0 - spec.p
    services = spec.services
    decay = float(np.exp(-spec.r * spec.t))
    zeta = ExpScale(spec.r, spec.t)

    def H(s):
        order = s.shape[0] - 1
        ctilde = []
        for j in range(n):
            jump = spec.jump_lsts[j](s)
            neg = _ratio(nu[j], s)
            ctilde.append(p * jump + q * neg)
        c_mat = jets.diag(ctilde)
        b_mat = jets.diag([services.lst(i, s * decay) for i in range(n)])
        return jets.matmul(jets.matmul(c_mat, jets.const(pt, order)), b_mat)

    poles = np.concatenate(
        [nu.astype(complex)]
        + [np.asarray(spec.jump_lsts[j].poles(), dtype=complex) for j in range(n)]
    )

    def V_batch(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n, n + 1), dtype=complex)
        for j in range(n):
            out[:, j, 1 + j] = q * _one_minus_ratio(nu[j], s)
        return out

    tail_batch = np.zeros((n, n + 1), dtype=complex)
    tail_batch[:, 0] = pi

    beta_at = np.array(
        [[jets.value(services.lst(i, jets.variable(nu[j] * decay, 0))) for i in range(n)]
         for j in range(n)]
    )

    bpol = boundary_policy(policy)
    coeff = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for j in range(n):
        probe = iterate_fixed_point(
            H, V_batch, zeta, tail_batch, nu[j] * decay, bpol, poles
        )
        w = pt[j, :] * beta_at[j, :]
        proj = w @ probe.value
        rhs[j] = proj[0]
        coeff[j, :] = proj[1:]

    bd = solve_boundary(np.eye(n) - coeff, rhs, "shotnoise_r")
    rvec = bd.values
    if np.max(np.abs(rvec.imag)) > 1e-9:
        raise InvalidBoundary(f"shotnoise_r: imaginary residue {np.max(np.abs(rvec.imag)):.2e}")

    def V(s):
        order = s.shape[0] - 1
        out = np.zeros((order + 1, n), dtype=complex)
        for j in range(n):
            out[:, j] = q * _one_minus_ratio(nu[j], s) * rvec[j]
        return out

    return StationarySolution("shot_noise", spec, pi, H, V, zeta, poles, policy, bd)


# --------------------------------------------------------------------------
# Wait-dependent service
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WaitDepSpec:
    chain: tuple
    rates: tuple[float, ...]  # arrival rates lambda_j
    mu: float                 # common exponential service rate
    c: float                  # waiting-time discount on the service requirement

    @property
    def n_states(self):
        return len(self.chain)

    def violations(self):
        out = []
        try:
            MarkovChain(np.array(self.chain, dtype=float))
        except Exception as exc:
            out.append(f"chain: {exc}")
        if len(self.rates) != self.n_states or any(l <= 0 for l in self.rates):
            out.append("arrival rates must be positive, one per state")
        if self.mu <= 0:
            out.append("service rate mu must be > 0")
        if self.c <= 0:
            out.append("discount c must be > 0")
        return out

    @classmethod
    def from_model_spec(cls, spec):
        from .model import ExponentialArrivals, WaitDependent

        kind = spec.model_kind
        if not isinstance(kind, WaitDependent):
            raise SpecValidationError(["model_kind must be wait_dependent"])
        if not isinstance(spec.arrivals, ExponentialArrivals):
            raise SpecValidationError(["wait-dependent model needs exponential arrivals"])
        return cls(chain=spec.chain, rates=spec.arrivals.rates, mu=kind.mu, c=kind.c)


def _synthetic_div(eta: np.ndarray, delta0: complex) -> np.ndarray:
    """Divide the jet eta by (u + delta0) given that eta vanishes at u = -delta0.

    Backward synthetic division; the remainder (analytically zero) is dropped,
    which is what makes removable spectral singularities evaluable exactly on
    the orbit.  Costs one jet order.
    """
    K = eta.shape[0] - 1
    q = np.zeros_like(eta)
    if K >= 1:
        q[K - 1] = eta[K]
        for k in range(K - 1, 0, -1):
            q[k - 1] = eta[k] - delta0 * q[k]
    return q


class _SpectralResolvent:
    """A(s) = s (sI - G)^{-1} through the spectral decomposition of G.

    G = Lambda (I - P^T) has the simple eigenvalue 0 (left vector along
    1/lambda, right vector along the stationary law), so s D(s)^{-1} has a
    removable singularity at 0; the spectral form evaluates it and its
    derivatives exactly there.
    """

    def __init__(self, g: np.ndarray):
        n = g.shape[0]
        gamma, right = np.linalg.eig(g)
        order = np.argsort(np.abs(gamma))
        gamma = gamma[order]
        right = right[:, order]
        # pair left eigenvectors (rows) with the same eigenvalues
        gl, lv = np.linalg.eig(g.T)
        left = np.zeros((n, n), dtype=complex)
        used = set()
        for k, gk in enumerate(gamma):
            cand = [m for m in range(n) if m not in used]
            m = min(cand, key=lambda m: abs(gl[m] - gk))
            if abs(gl[m] - gk) > 1e-6 * (1 + abs(gk)):
                raise DegenerateSpectrum("left/right eigenvalue pairing failed")
            left[k, :] = lv[:, m]
            used.add(m)
        if abs(gamma[0]) > 1e-10:
            raise DegenerateSpectrum(f"expected a zero eigenvalue, got {gamma[0]}")
        gamma[0] = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                if abs(gamma[i] - gamma[j]) < SPECTRUM_TOLERANCE:
                    raise DegenerateSpectrum(
                        f"eigenvalues {gamma[i]} and {gamma[j]} coincide"
                    )
        if np.any(gamma[1:].real <= 0):
            raise DegenerateSpectrum(f"expected Re(gamma) > 0 beyond the zero root: {gamma}")
        self.gamma = gamma
        self.norms = np.array([left[k] @ right[:, k] for k in range(n)])
        self.projectors = [
            np.outer(right[:, k], left[k]) / self.norms[k] for k in range(n)
        ]
        self.left = left
        self.right = right

    def a_jet(self, s_jet: np.ndarray) -> np.ndarray:
        """Jet of A(s) = sum_k s/(s - gamma_k) Proj_k; the k=0 term is I-like."""
        order = s_jet.shape[0] - 1
        out = jets.const(self.projectors[0], order)  # s/(s-0) == 1
        for k in range(1, len(self.gamma)):
            factor = jets.div(s_jet, s_jet - jets.const(self.gamma[k], order))
            out = out + jets.mul(factor, jets.const(self.projectors[k], order))
        return out


class _WaitDepEngine:
    """Series evaluator T(s) C = sum_k prod_{l<k} M(s+l d) A(s+k d) C.

    Orbit points can land exactly on an eigenvalue gamma_m of Lambda(I - P^T)
    (a removable singularity of the full transform, a genuine pole of every
    individual term).  When that happens the remaining tail is collapsed to
    A(z)[C + Lambda P^T T(z+d) C / (mu+z)] and the singular spectral term of
    A(z) is evaluated by synthetic division with the known root, enforcing
    the analyticity condition that fixes the boundary vector in the first
    place.  The collapse is linear in the columns of C, so the same code path
    serves both boundary probing and evaluation.
    """

    MERGE_EPS = 5e-2

    def __init__(self, res: _SpectralResolvent, lam_pt, mu, delta):
        self.res = res
        self.lam_pt = np.asarray(lam_pt, dtype=complex)
        self.mu = mu
        self.delta = delta
        self.gamma = res.gamma
        self.n = len(res.gamma)

    def _collision(self, z0: complex):
        for m in range(1, self.n):
            if abs(z0 - self.gamma[m]) < self.MERGE_EPS * (1.0 + abs(self.gamma[m])):
                return m
        return None

    def _count_collisions(self, s0: complex) -> int:
        re_max = max(g.real for g in self.gamma) + 1.0
        count, z = 0, complex(s0)
        while z.real <= re_max:
            if self._collision(z) is not None:
                count += 1
            z += self.delta
        return count

    def _a_apply(self, z_jet, cols, merge_m=None):
        """A(z) X for a jet matrix X, optionally merging one spectral term."""
        order = z_jet.shape[0] - 1
        res = self.res
        out = jets.matmul(jets.const(res.projectors[0], order), cols)
        for j in range(1, self.n):
            proj_cols = jets.matmul(jets.const(res.projectors[j], order), cols)
            if j == merge_m:
                # z/(z-gamma) P_m X = z x_m (y_m X)/(n_m (z-gamma)); divide
                # synthetically knowing y_m X vanishes at gamma.
                phi = np.einsum("i,kib->kb", res.left[j] / res.norms[j], cols)
                q = _synthetic_div(phi, complex(z_jet[0]) - res.gamma[j])
                term = np.einsum("i,kb->kib", res.right[:, j], jets.mul(z_jet, q))
            else:
                factor = jets.div(z_jet, z_jet - jets.const(res.gamma[j], order))
                term = jets.mul(factor[:, None, None], proj_cols)
            out = out + term
        return out

    def _m_apply_factor(self, z_jet):
        """Jet of M(z) = A(z) Lambda P^T / (mu + z) away from collisions."""
        order = z_jet.shape[0] - 1
        a_mat = self._a_apply(z_jet, jets.eye(self.n, order))
        inv = jets.inv(jets.const(self.mu, order) + z_jet)
        return jets.mul(inv[:, None, None], jets.matmul(a_mat, jets.const(self.lam_pt, order)))

    def min_terms(self, s0: complex) -> int:
        l = 0
        while l < 1000:
            z = complex(s0) + l * self.delta
            if self._collision(z) is None:
                m0 = self._m_apply_factor(jets.variable(z, 0))[0]
                if np.max(np.abs(m0)) < 0.5:
                    return l
            l += 1
        return 1000

    def series(self, s_jet, cols, policy, _depth=0):
        """Jets of T(s) C for constant columns C; returns (jets, diagnostics)."""
        order = s_jet.shape[0] - 1
        cols_jet = jets.const(cols, order)
        total = None
        prefix = jets.eye(self.n, order)
        point = s_jet
        prev_term = None
        increments = []
        l0 = self.min_terms(complex(s_jet[0]))
        k = 0
        merged = False
        while True:
            if k > policy.max_terms:
                raise NoConvergence(
                    f"wait-dependent series exceeded {policy.max_terms} terms"
                )
            m = self._collision(complex(point[0]))
            if m is not None:
                rec, recdiag = self.series(
                    Translate(self.delta).apply(point), cols, policy, _depth + 1
                )
                inv = jets.inv(jets.const(self.mu, order) + point)
                w = cols_jet + jets.mul(
                    inv[:, None, None], jets.matmul(jets.const(self.lam_pt, order), rec)
                )
                tail = self._a_apply(point, w, merge_m=m)
                term = jets.matmul(prefix, tail)
                total = term if total is None else total + term
                merged = True
                k += recdiag["series"]
                break
            term = jets.matmul(prefix, self._a_apply(point, cols_jet))
            total = term if total is None else total + term
            if prev_term is not None:
                diff = jets.maxabs(term - prev_term)
                increments.append(diff)
                if diff <= policy.tolerance and k >= max(l0, policy.min_terms):
                    break
            prev_term = term
            prefix = jets.matmul(prefix, self._m_apply_factor(point))
            point = Translate(self.delta).apply(point)
            k += 1
        diag = {
            "series": k,
            "residual": increments[-1] if increments else 0.0,
            "increments": tuple(increments),
            "merged": merged,
        }
        return total, diag

    def transform(self, s0: complex, cols, order, policy) -> TransformResult:
        bump = self._count_collisions(complex(s0))
        s_jet = jets.variable(complex(s0), order + bump)
        total, diag = self.series(s_jet, np.asarray(cols, dtype=complex), policy)
        total = total[: order + 1]
        return TransformResult(
            value=total[0],
            terms_used={"series": diag["series"], "tail": 0},
            residual=float(diag["residual"]),
            increments=diag["increments"],
            jet=total,
        )


class WaitDepSolution(StationarySolution):
    """Wait-dependent solution; evaluation goes through the merging engine."""

    def __init__(self, label, spec, pi, engine, v, policy, boundary):
        super().__init__(label, spec, pi, None, None, Translate(engine.delta),
                         engine.gamma[1:], policy, boundary)
        self._engine = engine
        self._v = v

    def transform(self, s, order: int = 0, policy=None) -> TransformResult:
        pol = policy or self.policy
        return self._engine.transform(complex(s), self._v[:, None], order, pol)

    def evaluate(self, s, order: int = 0):
        res = self.transform(s, order=order)
        val = res.value[:, 0] if order == 0 else res.derivative(order)[:, 0]
        return val

    def mean_vector(self) -> np.ndarray:
        return -self.transform(0.0, order=1).derivative(1)[:, 0].real

    def second_moment_vector(self) -> np.ndarray:
        return self.transform(0.0, order=2).derivative(2)[:, 0].real

    def idle_probabilities(self) -> np.ndarray:
        return self.boundary.values.real


def solve_waitdep(spec: WaitDepSpec, policy: TruncationPolicy = TruncationPolicy()):
    report = spec.violations()
    if report:
        raise SpecValidationError(report)
    mc = MarkovChain(np.array(spec.chain, dtype=float))
    pi = mc.stationary()
    pt = mc.transition.T
    n = mc.n_states
    lam = np.array(spec.rates, dtype=float)
    mu, c = spec.mu, spec.c
    g = np.diag(lam) @ (np.eye(n) - pt)
    res = _SpectralResolvent(g)
    gamma = res.gamma
    lam_pt = np.diag(lam) @ pt
    engine = _WaitDepEngine(res, lam_pt, mu, mu * c)

    # Left eigenvectors, sup-norm normalized; the zero-eigenvalue row is made
    # real with positive action on the stationary law.
    y_rows = res.left.copy()
    for i in range(n):
        y_rows[i] /= np.max(np.abs(y_rows[i]))
    y1 = y_rows[0]
    if np.max(np.abs(y1.imag)) > 1e-9:
        raise DegenerateSpectrum("zero-eigenvalue left vector is not real")
    y1 = y1.real
    if y1 @ pi < 0:
        y1 = -y1
    y_rows[0] = y1

    bpol = boundary_policy(policy)
    rows = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for i in range(n):
        t_mat = engine.transform(mu * c + gamma[i], np.eye(n), 0, bpol).value
        rows[i, :] = y_rows[i] + (y_rows[i] @ lam_pt @ t_mat) / (mu + gamma[i])
        rhs[i] = (y1 @ pi) if i == 0 else 0.0

    bd = solve_boundary(rows, rhs, "waitdep_v")
    v = bd.values
    if np.max(np.abs(v.imag)) > 1e-9:
        raise InvalidBoundary(f"waitdep_v: imaginary residue {np.max(np.abs(v.imag)):.2e}")
    if np.any(v.real <= 0) or v.real.sum() >= 1.0:
        raise InvalidBoundary(f"waitdep_v: idle probabilities outside (0,1): {v.real}")

    return WaitDepSolution("wait_dependent", spec, pi, engine, v, policy, bd)
