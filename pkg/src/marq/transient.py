"""Transient transform of the Markov-modulated autoregressive workload.

The r-discounted triple transform Z^w(r, s, eta) of the workload and arrival
epochs solves Z = K(r,s,eta) Z(r,as,eta) + L^w(r,s,eta) with

    K(r,s,eta)  = r Lambda (M^T(eta-s))^{-1} B*(s),   M(z) = z I + Lambda - Q,
    L^w(r,s,eta) = r e^{-sw} p + [sum_l s^l C_l(r,eta)] / prod_j (s - mu_j(eta)),

where mu_j(eta) = nu_j + eta shifts the eigenvalues nu_j of Lambda - Q^T.
The polynomial coefficient vectors C_l are fixed by evaluating the truncated
series at s = a mu_i(eta) and matching the removable-singularity condition at
each mu_i(eta).  A second solver covers the variant where the interarrival
law also depends on the preceding service duration through rational factors
chi_{i,j} and psi_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from . import jets
from .boundary import boundary_policy, cluster_points, falling, leibniz_row, solve_boundary
from .engine import Scale, TruncationPolicy, TransformResult, iterate_fixed_point
from .errors import DegenerateSpectrum, SpecValidationError
from .lst import RationalLST, poly_from_roots, polyroots

SPECTRUM_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ModulatedArrivalSpec:
    """Continuous-time modulation: generator Q, Poisson rates, start state law."""

    generator: tuple
    rates: tuple[float, ...]
    initial: tuple[float, ...]
    w: float = 0.0

    @property
    def n_states(self):
        return len(self.rates)

    def q_matrix(self) -> np.ndarray:
        return np.array(self.generator, dtype=float)

    def violations(self):
        out = []
        q = self.q_matrix()
        n = self.n_states
        if q.shape != (n, n):
            out.append("generator must be square and match the rate vector length")
            return out
        if np.any(np.abs(q.sum(axis=1)) > 1e-12):
            out.append("generator rows must sum to 0 within 1e-12")
        off = q - np.diag(np.diag(q))
        if np.any(off < -1e-15):
            out.append("generator off-diagonal entries must be nonnegative")
        if any(l <= 0 for l in self.rates):
            out.append("arrival rates must be strictly positive")
        p = np.array(self.initial, dtype=float)
        if p.shape != (n,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            out.append("initial distribution must be a probability vector")
        if self.w < 0:
            out.append("initial workload w must be nonnegative")
        return out


@dataclass(frozen=True)
class TransientQuery:
    r: complex
    s: complex
    eta: complex

    def violations(self):
        out = []
        if abs(self.r) >= 1.0:
            out.append("|r| must be strictly below 1")
        if self.s.real < -1e-12:
            out.append("Re(s) must be nonnegative")
        if self.eta.real < -1e-12:
            out.append("Re(eta) must be nonnegative")
        return out


@dataclass(frozen=True)
class EigenData:
    """Eigenvalues nu of Lambda - Q^T and the eta-shifted pole locations."""

    nu: np.ndarray
    right_vectors: np.ndarray
    eta: complex

    @property
    def mu(self) -> np.ndarray:
        return self.nu + self.eta


def _compose_eta_minus_s(coeffs, eta: complex) -> np.ndarray:
    """Coefficients in s of p(eta - s) for ascending coefficients p."""
    out = np.zeros(1, dtype=complex)
    base = np.array([eta, -1.0], dtype=complex)
    power = np.array([1.0 + 0j])
    for c in np.asarray(coeffs, dtype=complex):
        out = np.polynomial.polynomial.polyadd(out, c * power)
        power = np.convolve(power, base)
    return out


def adjugate(a: np.ndarray) -> np.ndarray:
    """Adjugate via Faddeev-LeVerrier; exact at singular arguments.

    Satisfies a @ adjugate(a) = det(a) I.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    m = np.eye(n, dtype=complex)
    for k in range(1, n):
        am = a @ m
        c = -np.trace(am) / k
        m = am + c * np.eye(n)
    return (-1) ** (n - 1) * m


def eigen_mu(spec: ModulatedArrivalSpec, eta: complex = 0.0) -> EigenData:
    """Spectrum of Lambda - Q^T; all eigenvalues must be distinct with Re > 0."""
    report = spec.violations()
    if report:
        raise SpecValidationError(report)
    mat = np.diag(spec.rates) - spec.q_matrix().T
    nu, vecs = np.linalg.eig(mat)
    order = np.argsort(nu.real)
    nu, vecs = nu[order], vecs[:, order]
    if np.any(nu.real <= 0):
        raise DegenerateSpectrum(f"expected Re(nu) > 0, got {nu}")
    for i in range(len(nu)):
        for j in range(i + 1, len(nu)):
            if abs(nu[i] - nu[j]) < SPECTRUM_TOLERANCE:
                raise DegenerateSpectrum(
                    f"eigenvalues {nu[i]} and {nu[j]} coincide within {SPECTRUM_TOLERANCE}"
                )
    return EigenData(nu=nu, right_vectors=vecs, eta=complex(eta))


class TransientSolver:
    """Reusable solver: eigen data cached per spec, boundary per (r, eta)."""

    def __init__(self, spec: ModulatedArrivalSpec, services, a: float,
                 policy: TruncationPolicy = TruncationPolicy()):
        report = spec.violations()
        if not (0.0 < a < 1.0):
            report = report + ["a must lie in (0,1)"]
        if report:
            raise SpecValidationError(report)
        self.spec = spec
        self.services = services
        self.a = float(a)
        self.policy = policy
        self.n = spec.n_states
        self.lam = np.array(spec.rates, dtype=float)
        self.qt = spec.q_matrix().T
        self.eigen = eigen_mu(spec)
        self._boundaries: dict = {}

    # -- building blocks ---------------------------------------------------

    def _mt(self, z_jet: np.ndarray) -> np.ndarray:
        """Jet of M^T(z) = z I + Lambda - Q^T at a scalar jet z."""
        order = z_jet.shape[0] - 1
        base = jets.const(np.diag(self.lam) - self.qt, order)
        for k in range(order + 1):
            base[k] += z_jet[k] * np.eye(self.n)
        return base

    def _bstar(self, s_jet: np.ndarray) -> np.ndarray:
        return jets.diag([self.services.lst(i, s_jet) for i in range(self.n)])

    def _K(self, r: complex, eta: complex):
        lam_mat = np.diag(self.lam).astype(complex)

        def K(s_jet):
            order = s_jet.shape[0] - 1
            mt = self._mt(jets.const(eta, order) - s_jet)
            inv_b = jets.matsolve(mt, self._bstar(s_jet))
            return r * jets.matmul(jets.const(lam_mat, order), inv_b)

        return K

    def _F_at(self, eta: complex, s: complex) -> np.ndarray:
        """F(eta, s) = Lambda Ladj(eta - s) B*(s) with M^T Ladj = prod(s - mu) I."""
        mt = (eta - s) * np.eye(self.n) + np.diag(self.lam) - self.qt
        ladj = (-1) ** self.n * adjugate(mt)
        bdiag = np.diag([jets.value(self.services.lst(i, jets.variable(s, 0)))
                         for i in range(self.n)])
        return np.diag(self.lam) @ ladj @ bdiag

    # -- boundary ----------------------------------------------------------

    def boundary(self, r: complex, eta: complex):
        key = (complex(r), complex(eta))
        if key in self._boundaries:
            return self._boundaries[key]
        n = self.n
        mu = self.eigen.nu + eta
        p_hat = np.array(self.spec.initial, dtype=complex)
        w = self.spec.w
        denom_poly = poly_from_roots(mu)
        n_unknowns = n * n  # C_{l,j}, l = 1..N

        def col(l, j):
            return (l - 1) * n + j

        def L_batch(s_jet):
            order = s_jet.shape[0] - 1
            out = np.zeros((order + 1, n, n_unknowns + 1), dtype=complex)
            expw = jets.exp(-s_jet * w) if w else jets.const(1.0, order)
            for j in range(n):
                out[:, j, 0] = r * p_hat[j] * expw
            dinv = jets.inv(jets.polyval(denom_poly, s_jet))
            spow = s_jet.copy()
            for l in range(1, n + 1):
                term = jets.mul(spow, dinv)
                for j in range(n):
                    out[:, j, 1 + col(l, j)] = term
                spow = jets.mul(spow, s_jet)
            return out

        K = self._K(r, eta)
        bpol = boundary_policy(self.policy)
        rows = np.zeros((n_unknowns, n_unknowns), dtype=complex)
        rhs = np.zeros(n_unknowns, dtype=complex)
        for i in range(n):
            probe = iterate_fixed_point(
                K, L_batch, Scale(self.a), None, self.a * mu[i], bpol, mu
            )
            f_mat = self._F_at(eta, mu[i])
            proj = -r * (f_mat @ probe.value)      # affine: (N, 1+n_unknowns)
            # -r F Z(a mu_i) = sum_l mu_i^l C_l componentwise
            for j in range(n):
                row_idx = i * n + j
                rhs[row_idx] = -proj[j, 0]
                rows[row_idx, :] = proj[j, 1:]
                for l in range(1, n + 1):
                    rows[row_idx, col(l, j)] -= mu[i] ** l
        bd = solve_boundary(rows, rhs, "transient_C")
        c_mat = bd.values.reshape(n, n)  # [l-1, j]
        self._boundaries[key] = (bd, c_mat, denom_poly)
        return self._boundaries[key]

    def _L_final(self, r, eta):
        bd, c_mat, denom_poly = self.boundary(r, eta)
        n = self.n
        p_hat = np.array(self.spec.initial, dtype=complex)
        w = self.spec.w

        def L(s_jet):
            order = s_jet.shape[0] - 1
            expw = jets.exp(-s_jet * w) if w else jets.const(1.0, order)
            out = np.zeros((order + 1, n), dtype=complex)
            dinv = jets.inv(jets.polyval(denom_poly, s_jet))
            spow = s_jet.copy()
            poly = np.zeros((order + 1, n), dtype=complex)
            for l in range(1, n + 1):
                term = jets.mul(spow, dinv)
                for j in range(n):
                    poly[:, j] += c_mat[l - 1, j] * term
                spow = jets.mul(spow, s_jet)
            for j in range(n):
                out[:, j] = r * p_hat[j] * expw + poly[:, j]
            return out

        return L

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, query: TransientQuery, order: int = 0) -> TransformResult:
        report = query.violations()
        if report:
            raise SpecValidationError(report)
        r, s, eta = complex(query.r), complex(query.s), complex(query.eta)
        K = self._K(r, eta)
        L = self._L_final(r, eta)
        mu = self.eigen.nu + eta
        return iterate_fixed_point(
            K, L, Scale(self.a), None, s, self.policy, mu, order
        )

    def constants(self, r, eta) -> np.ndarray:
        """Resolved polynomial coefficient matrix C[l-1, j]."""
        return self.boundary(r, eta)[1]


def solve_transient(spec: ModulatedArrivalSpec, services, a: float,
                    query: TransientQuery,
                    policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    """Transient transform vector Z^w(r, s, eta) at a single query point."""
    return TransientSolver(spec, services, a, policy).evaluate(query).value


# --------------------------------------------------------------------------
# Interarrival times linked to the preceding service duration
# --------------------------------------------------------------------------

class ServiceLinkedTransientSolver:
    """Variant with E[e^{-s A} 1_{Y'=j} | S=t, Y=i] = chi_{i,j}(s) e^{-psi_i(s) t}.

    Only the initial law and starting workload of ``spec`` matter here; the
    arrival structure comes entirely from the rational factors chi and psi.

    The boundary system clears two families of right-half-plane poles: the
    images eta - lambda^{(m)}_{i,j} of the chi denominators, and the zeros of
    the composed service denominators Q_i(s) = (mu_i + s) denpsi_i(eta-s) +
    numpsi_i(eta-s) with positive real part.  The second family is absent
    when psi vanishes, but for psi != 0 the factor beta*_i(s + psi_i(eta-s))
    always carries such a pole, and ignoring it leaves the cleared identity
    non-polynomial.  Nonzero psi therefore requires exponential services.
    """

    def __init__(self, spec: ModulatedArrivalSpec, services, chi, psi, a: float,
                 policy: TruncationPolicy = TruncationPolicy()):
        if not (0.0 < a < 1.0):
            raise SpecValidationError(["a must lie in (0,1)"])
        self.n = len(psi)
        n = self.n
        report = []
        psi_active = False
        for i in range(n):
            tot = sum(chi[i][j].value(0.0) for j in range(n))
            if abs(tot - 1.0) > 1e-9:
                report.append(f"chi row {i} must sum to 1 at s=0")
            if abs(psi[i].value(0.0)) > 1e-9:
                report.append(f"psi[{i}] must vanish at s=0")
            if np.any(np.abs(np.trim_zeros(np.asarray(psi[i].num), "b")) > 0):
                psi_active = True
            for root in polyroots(psi[i].den):
                if root.real >= 0:
                    report.append(f"psi[{i}] poles must lie in Re < 0")
            for j in range(n):
                for root in polyroots(chi[i][j].den):
                    if root.real >= 0:
                        report.append(f"chi[{i}][{j}] poles must lie in Re < 0")
        from .model import ExponentialService

        if psi_active and not isinstance(services, ExponentialService):
            report.append("nonzero psi requires exponential services")
        if report:
            raise SpecValidationError(report)
        self.spec = spec
        self.services = services
        self.chi = chi
        self.psi = psi
        self.psi_active = psi_active
        self.a = float(a)
        self.policy = policy
        self._boundaries: dict = {}

    def _K(self, r: complex, eta: complex):
        n = self.n

        def K(s_jet):
            order = s_jet.shape[0] - 1
            z = jets.const(eta, order) - s_jet
            out = np.zeros((order + 1, n, n), dtype=complex)
            for i in range(n):
                arg = s_jet + self.psi[i](z)
                beta = self.services.lst(i, arg)
                for j in range(n):
                    out[:, j, i] = r * jets.mul(self.chi[i][j](z), beta)
            return out

        return K

    def _service_factors(self, eta: complex):
        """Cleared form of beta*_i(s + psi_i(eta-s)) for exponential services.

        Returns per state (numer_poly(eta-s) scale mu_i, q_plus_roots,
        q_minus_poly) with Q_i(s) = (mu_i+s) denpsi_i(eta-s) + mu_i-free
        numerator part; for inactive psi the factor is mu_i/(mu_i+s).
        """
        n = self.n
        out = []
        for i in range(n):
            if not self.psi_active:
                # beta* may be any service LST here; no RHP zeros to clear.
                out.append(None)
                continue
            mu_i = self.services.rates[i]
            denpsi = np.asarray(self.psi[i].den, dtype=complex)
            numpsi = np.asarray(self.psi[i].num, dtype=complex)
            # polynomials in s after substituting z = eta - s
            denpsi_s = _compose_eta_minus_s(denpsi, eta)
            numpsi_s = _compose_eta_minus_s(numpsi, eta)
            q_poly = np.polynomial.polynomial.polyadd(
                np.convolve(np.array([mu_i, 1.0], dtype=complex), denpsi_s), numpsi_s
            )
            roots = polyroots(q_poly)
            plus = roots[roots.real > 1e-12]
            minus = roots[roots.real <= 1e-12]
            lc = np.trim_zeros(q_poly, "b")[-1]
            out.append(
                {
                    "numer_s": mu_i * denpsi_s,
                    "q_plus": plus,
                    "q_minus_poly": poly_from_roots(minus, lc),
                }
            )
        return out

    def _pole_layout(self, eta: complex):
        """Per target state j: chi-pole images eta - lambda^{(m)}_{i,j}."""
        n = self.n
        layout = []
        all_poles = []
        for j in range(n):
            per_i = []
            for i in range(n):
                den = np.asarray(self.chi[i][j].den, dtype=complex)
                lam_roots = polyroots(den)
                mu_hat = eta - lam_roots
                lc = np.trim_zeros(den, "b")[-1]
                per_i.append((mu_hat, lc, len(lam_roots)))
                all_poles.extend(mu_hat.tolist())
            layout.append(per_i)
        return layout, np.array(all_poles, dtype=complex)

    def boundary(self, r: complex, eta: complex):
        key = (complex(r), complex(eta))
        if key in self._boundaries:
            return self._boundaries[key]
        n = self.n
        layout, chi_poles = self._pole_layout(eta)
        factors = self._service_factors(eta)
        q_plus_all = (
            np.concatenate([factors[t]["q_plus"] for t in range(n)])
            if self.psi_active else np.zeros(0, dtype=complex)
        )
        q_plus_poly = poly_from_roots(q_plus_all)
        p_hat = np.array(self.spec.initial, dtype=complex)
        w = self.spec.w

        deg = [
            sum(len(layout[j][i][0]) for i in range(n)) + len(q_plus_all)
            for j in range(n)
        ]
        offsets = np.concatenate([[0], np.cumsum(deg)]).astype(int)
        n_unknowns = int(offsets[-1])
        d_poly = [
            np.convolve(
                poly_from_roots(np.concatenate([layout[j][i][0] for i in range(n)])),
                q_plus_poly,
            )
            for j in range(n)
        ]
        pole_arr = np.concatenate([chi_poles, q_plus_all])

        def L_batch(s_jet):
            order = s_jet.shape[0] - 1
            out = np.zeros((order + 1, n, n_unknowns + 1), dtype=complex)
            expw = jets.exp(-s_jet * w) if w else jets.const(1.0, order)
            for j in range(n):
                out[:, j, 0] = r * p_hat[j] * expw
                if deg[j] == 0:
                    continue
                dinv = jets.inv(jets.polyval(d_poly[j], s_jet))
                spow = s_jet.copy()
                for l in range(1, deg[j] + 1):
                    out[:, j, 1 + offsets[j] + l - 1] = jets.mul(spow, dinv)
                    spow = jets.mul(spow, s_jet)
            return out

        def beta_cleared(i, s_star, z_star):
            """Jet of beta*_i(s+psi_i(eta-s)) * prod_t Q_t+(s), pole-free."""
            if not self.psi_active:
                return self.services.lst(i, s_star + self.psi[i](z_star))
            others = np.concatenate(
                [factors[t]["q_plus"] for t in range(n) if t != i]
            ) if n > 1 else np.zeros(0, dtype=complex)
            numer = jets.polyval(factors[i]["numer_s"], s_star)
            denom = jets.polyval(factors[i]["q_minus_poly"], s_star)
            rest = jets.polyval(poly_from_roots(others), s_star)
            return jets.mul(jets.div(numer, denom), rest)

        K = self._K(r, eta)
        bpol = boundary_policy(self.policy)

        rows = []
        rhs = []
        for j in range(n):
            if deg[j] == 0:
                continue
            points = np.concatenate(
                [layout[j][i][0] for i in range(n)] + [q_plus_all]
            )
            for center, nu_mult in cluster_points(points):
                s_star = jets.variable(center, nu_mult - 1)
                z_star = jets.const(eta, nu_mult - 1) - s_star
                # R_{i,j}(s) = r chi_{i,j}(eta-s) beta*_i(s+psi_i(eta-s)) D_j(s)
                # with both pole families cancelled against their D_j factors.
                r_jets = []
                for i in range(n):
                    _, lc_i, l_ij = layout[j][i]
                    others = np.concatenate(
                        [layout[j][k][0] for k in range(n) if k != i]
                    ) if n > 1 else np.zeros(0, dtype=complex)
                    other_poly = poly_from_roots(others)
                    pref = (-1.0) ** l_ij / lc_i
                    num = jets.polyval(np.asarray(self.chi[i][j].num, dtype=complex), z_star)
                    beta = beta_cleared(i, s_star, z_star)
                    r_ij = r * pref * jets.mul(
                        jets.mul(num, jets.polyval(other_poly, s_star)), beta
                    )
                    r_jets.append(r_ij)
                probe = iterate_fixed_point(
                    K, L_batch, Scale(self.a), None, self.a * center, bpol,
                    pole_arr, order=nu_mult - 1,
                )
                for d in range(nu_mult):
                    row = np.zeros(n_unknowns, dtype=complex)
                    const = 0.0 + 0j
                    for i in range(n):
                        lrow = leibniz_row(d, r_jets[i], probe.jet[:, i, :], self.a)
                        const += lrow[0]
                        row += lrow[1:]
                    for l in range(1, deg[j] + 1):
                        row[offsets[j] + l - 1] += falling(l, d) * center ** (l - d)
                    # the r e^{-sw} p_j D_j(s) term has a zero of full multiplicity
                    rows.append(row)
                    rhs.append(-const)

        bd = solve_boundary(
            np.array(rows).reshape(n_unknowns, n_unknowns), np.array(rhs),
            "service_linked_C",
        )
        self._boundaries[key] = (bd, bd.values, d_poly, offsets, deg, pole_arr)
        return self._boundaries[key]

    def evaluate(self, query: TransientQuery, order: int = 0) -> TransformResult:
        report = query.violations()
        if report:
            raise SpecValidationError(report)
        r, s, eta = complex(query.r), complex(query.s), complex(query.eta)
        bd, c, d_poly, offsets, deg, pole_arr = self.boundary(r, eta)
        n = self.n
        p_hat = np.array(self.spec.initial, dtype=complex)
        w = self.spec.w

        def L(s_jet):
            jorder = s_jet.shape[0] - 1
            out = np.zeros((jorder + 1, n), dtype=complex)
            expw = jets.exp(-s_jet * w) if w else jets.const(1.0, jorder)
            for j in range(n):
                out[:, j] = r * p_hat[j] * expw
                if deg[j] == 0:
                    continue
                numer = np.concatenate([[0.0], c[offsets[j]:offsets[j + 1]]])
                out[:, j] += jets.div(
                    jets.polyval(numer, s_jet), jets.polyval(d_poly[j], s_jet)
                )
            return out

        return iterate_fixed_point(
            self._K(r, eta), L, Scale(self.a), None, s, self.policy, pole_arr, order
        )


def solve_transient_service_linked(spec, services, chi, psi, a, query,
                                   policy: TruncationPolicy = TruncationPolicy()):
    return ServiceLinkedTransientSolver(spec, services, chi, psi, a, policy).evaluate(query).value
