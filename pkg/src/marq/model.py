"""Model specification types shared by every solver, plus JSON ingestion.

A ModelSpec is a plain data holder; ``validate`` reports violated invariants
as strings (an empty report means the spec is well formed) and solvers refuse
to run on invalid specs.  All types are immutable after construction and all
operations on them are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import jets
from .chain import MarkovChain
from .errors import ConfigError, SpecValidationError
from .lst import RationalLST


# --------------------------------------------------------------------------
# Arrivals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialArrivals:
    """State-dependent exponential interarrival times, rate lambda_j > 0."""

    rates: tuple[float, ...]

    def violations(self, n):
        out = []
        if len(self.rates) != n:
            out.append(f"arrivals.rates must have length {n}")
        if any(r <= 0 for r in self.rates):
            out.append("arrival rates must be strictly positive")
        return out


@dataclass(frozen=True)
class MixedErlangArrivals:
    """Mixture over m = 1..M of Erlang(m, lambda_j) interarrival times."""

    rates: tuple[float, ...]
    weights: tuple[float, ...]

    @property
    def n_phases(self):
        return len(self.weights)

    def violations(self, n):
        out = []
        if len(self.rates) != n:
            out.append(f"arrivals.rates must have length {n}")
        if any(r <= 0 for r in self.rates):
            out.append("arrival rates must be strictly positive")
        if not self.weights:
            out.append("arrivals.weights must be nonempty")
        else:
            if any(q < 0 for q in self.weights):
                out.append("arrival mixture weights must be nonnegative")
            if abs(sum(self.weights) - 1.0) > 1e-12:
                out.append("arrival mixture weights must sum to 1")
        return out


@dataclass(frozen=True)
class DeterministicArrivals:
    """Constant interarrival time t > 0 (shot-noise model only)."""

    t: float

    def violations(self, n):
        return [] if self.t > 0 else ["deterministic interarrival t must be > 0"]


# --------------------------------------------------------------------------
# Services
# --------------------------------------------------------------------------

class ExponentialService:
    """Per-state exponential service, beta*_i(s) = mu_i / (mu_i + s)."""

    def __init__(self, rates):
        self.rates = tuple(float(r) for r in rates)

    def lst(self, i, s):
        mu = self.rates[i]
        return jets.div(jets.const(mu, s.shape[0] - 1), _shift(s, mu))

    def mean(self, i):
        return 1.0 / self.rates[i]

    def second_moment(self, i):
        return 2.0 / self.rates[i] ** 2

    def g_star(self, i, s):
        # Transform of f(x)(1 - 2F(x)); direct integration gives
        # 2 mu/(2 mu + s) - mu/(mu + s) for an exponential density.
        mu = self.rates[i]
        k = s.shape[0] - 1
        return jets.div(jets.const(2 * mu, k), _shift(s, 2 * mu)) - jets.div(
            jets.const(mu, k), _shift(s, mu)
        )

    def cdf(self, i, x):
        return 1.0 - np.exp(-self.rates[i] * np.asarray(x))

    def pdf(self, i, x):
        return self.rates[i] * np.exp(-self.rates[i] * np.asarray(x))

    def curvature_integral(self, i):
        """integral of F(1-F); closed form 1/(2 mu) for exponentials."""
        return 1.0 / (2 * self.rates[i])

    def violations(self, n):
        out = []
        if len(self.rates) != n:
            out.append(f"services.rates must have length {n}")
        if any(r <= 0 for r in self.rates):
            out.append("service rates must be strictly positive")
        return out

    def scaled(self, divisor):
        """Rates divided by ``divisor`` (the u-sweep convention)."""
        return ExponentialService([r / divisor for r in self.rates])


class MixedErlangService:
    """Per-state mixture of Erlang(m, mu_i) services with shared weights."""

    def __init__(self, rates, weights):
        self.rates = tuple(float(r) for r in rates)
        self.weights = tuple(float(q) for q in weights)

    def lst(self, i, s):
        mu = self.rates[i]
        k = s.shape[0] - 1
        base = jets.div(jets.const(mu, k), _shift(s, mu))
        out = jets.const(0.0, k)
        for m, q in enumerate(self.weights, start=1):
            out = out + q * jets.powi(base, m)
        return out

    def mean(self, i):
        return sum(q * m for m, q in enumerate(self.weights, 1)) / self.rates[i]

    def second_moment(self, i):
        return sum(q * m * (m + 1) for m, q in enumerate(self.weights, 1)) / self.rates[i] ** 2

    def cdf(self, i, x):
        x = np.asarray(x, dtype=float)
        mu = self.rates[i]
        out = np.zeros_like(x)
        for m, q in enumerate(self.weights, 1):
            tail = np.zeros_like(x)
            term = np.ones_like(x)
            for l in range(m):
                if l > 0:
                    term = term * (mu * x) / l
                tail += term
            out += q * (1.0 - np.exp(-mu * x) * tail)
        return out

    def pdf(self, i, x):
        x = np.asarray(x, dtype=float)
        mu = self.rates[i]
        out = np.zeros_like(x)
        for m, q in enumerate(self.weights, 1):
            out += q * mu**m * x ** (m - 1) * np.exp(-mu * x) / _factorial(m - 1)
        return out

    def g_star(self, i, s):
        return _g_star_quadrature(self, i, s)

    def curvature_integral(self, i):
        from scipy.integrate import quad

        f = lambda x: self.cdf(i, x) * (1.0 - self.cdf(i, x))
        val, _ = quad(f, 0, np.inf, epsrel=1e-10)
        return val

    def violations(self, n):
        out = []
        if len(self.rates) != n:
            out.append(f"services.rates must have length {n}")
        if any(r <= 0 for r in self.rates):
            out.append("service rates must be strictly positive")
        if abs(sum(self.weights) - 1.0) > 1e-12 or any(q < 0 for q in self.weights):
            out.append("service mixture weights must form a probability vector")
        return out

    def scaled(self, divisor):
        return MixedErlangService([r / divisor for r in self.rates], self.weights)


class RationalService:
    """Per-state service transforms given directly as rational LSTs."""

    def __init__(self, lsts):
        self.lsts = tuple(lsts)

    def lst(self, i, s):
        return self.lsts[i](s)

    def mean(self, i):
        j = self.lsts[i](jets.variable(0.0, 1))
        return float(-jets.derivative(j, 1).real)

    def second_moment(self, i):
        j = self.lsts[i](jets.variable(0.0, 2))
        return float(jets.derivative(j, 2).real)

    def g_star(self, i, s):
        raise SpecValidationError(
            ["FGM dependence needs a service density; rational services do not expose one"]
        )

    def violations(self, n):
        out = []
        if len(self.lsts) != n:
            out.append(f"services.lsts must have length {n}")
        for i, r in enumerate(self.lsts):
            if abs(r.value(0.0) - 1.0) > 1e-9:
                out.append(f"services.lsts[{i}] must equal 1 at s=0")
        return out

    def scaled(self, divisor):
        raise SpecValidationError(["u-sweeps require rate-parameterized services"])


def _factorial(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def _shift(s, c):
    out = np.array(s, dtype=complex)
    out[0] += c
    return out


def _g_star_quadrature(service, i, s):
    """Transform of f(x)(1-2F(x)) and its derivatives by adaptive quadrature."""
    from scipy.integrate import quad

    order = s.shape[0] - 1
    if order > 0 and abs(s[1] - 1.0) > 1e-14 or np.any(np.abs(s[2:]) > 1e-14):
        raise NotImplementedError("quadrature g* supports plain evaluation points only")
    s0 = complex(s[0])
    out = np.zeros(order + 1, dtype=complex)
    for k in range(order + 1):
        def integrand_re(x, k=k):
            g = service.pdf(i, x) * (1.0 - 2.0 * service.cdf(i, x))
            return ((-x) ** k * np.exp(-s0 * x) * g).real

        def integrand_im(x, k=k):
            g = service.pdf(i, x) * (1.0 - 2.0 * service.cdf(i, x))
            return ((-x) ** k * np.exp(-s0 * x) * g).imag

        re, _ = quad(integrand_re, 0, np.inf, epsrel=1e-9, limit=200)
        im, _ = quad(integrand_im, 0, np.inf, epsrel=1e-9, limit=200)
        out[k] = complex(re, im) / _factorial(k)
    return out


# --------------------------------------------------------------------------
# Dependence
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CondIndep:
    """Service and next interarrival conditionally independent given the chain."""

    def violations(self, n):
        return []


@dataclass(frozen=True)
class FGM:
    """Farlie-Gumbel-Morgenstern coupling of (S_n, A_{n+1}), theta in [-1, 1]."""

    theta: float

    def violations(self, n):
        if not -1.0 <= self.theta <= 1.0:
            return ["FGM parameter out of [-1,1]"]
        return []


@dataclass(frozen=True)
class BME:
    """Bilateral matrix-exponential law of X_n = S_n - A_{n+1} per state pair.

    ``pairs[i][j]`` is the rational transform f_{i,j}/g_{i,j} of X_n given a
    transition i -> j.  ``sampler`` optionally names a realizable sampling
    construction for the Monte Carlo oracle (only independent exp/exp joints
    are currently samplable).
    """

    pairs: tuple  # tuple of tuples of RationalLST
    sampler: Optional[dict] = None

    def violations(self, n):
        out = []
        if len(self.pairs) != n or any(len(row) != n for row in self.pairs):
            out.append(f"dependence.pairs must be an {n}x{n} grid of rational LSTs")
            return out
        for i, row in enumerate(self.pairs):
            for j, r in enumerate(row):
                num0 = np.polynomial.polynomial.polyval(0.0, r.num)
                den0 = np.polynomial.polynomial.polyval(0.0, r.den)
                if abs(num0 - den0) > 1e-9 * max(1.0, abs(den0)):
                    out.append(f"dependence.pairs[{i}][{j}]: f(0) must equal g(0)")
                dn, dd = r.degree()
                if dn >= dd:
                    out.append(
                        f"dependence.pairs[{i}][{j}]: numerator degree must be below denominator degree"
                    )
        return out


@dataclass(frozen=True)
class ServiceLinked:
    """Interarrival LST chi_{i,j}(s) e^(-psi_i(s) t) given previous service t."""

    chi: tuple  # N x N RationalLST
    psi: tuple  # N RationalLST

    def violations(self, n):
        out = []
        if len(self.chi) != n or any(len(row) != n for row in self.chi):
            out.append(f"dependence.chi must be an {n}x{n} grid")
            return out
        if len(self.psi) != n:
            out.append(f"dependence.psi must have length {n}")
            return out
        for i in range(n):
            tot = sum(self.chi[i][j].value(0.0) for j in range(n))
            if abs(tot - 1.0) > 1e-9:
                out.append(f"dependence.chi row {i} must sum to 1 at s=0")
            if abs(self.psi[i].value(0.0)) > 1e-9:
                out.append(f"dependence.psi[{i}] must vanish at s=0")
        return out


# --------------------------------------------------------------------------
# Model kind
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Autoregressive:
    """W_{n+1} = [a W_n + S_n - A_{n+1}]^+."""

    def violations(self, spec):
        if spec.a is None or not (0.0 < spec.a < 1.0):
            return ["a must lie in (0,1)"]
        return []


@dataclass(frozen=True)
class ShotNoise:
    """W_{n+1} = [e^{-r t}(W_n + S_n) + C_{n+1}]^+ with two-sided noise."""

    r: float
    t: float
    p: float
    jump_lsts: tuple  # per-state RationalLST of the positive jump C+
    neg_rates: tuple[float, ...]  # per-state rate of the exponential negative jump

    def violations(self, spec):
        out = []
        n = spec.n_states
        if not (self.r > 0 and self.t > 0):
            out.append("shot-noise decay r and interarrival t must be > 0")
        if not 0.0 <= self.p <= 1.0:
            out.append("shot-noise jump probability p must lie in [0,1]")
        if len(self.neg_rates) != n or any(v <= 0 for v in self.neg_rates):
            out.append("shot-noise negative-jump rates must be positive, one per state")
        if len(self.jump_lsts) != n:
            out.append("shot-noise positive-jump LSTs must be given per state")
        else:
            for j, c in enumerate(self.jump_lsts):
                if abs(c.value(0.0) - 1.0) > 1e-9:
                    out.append(f"model_kind.jumps[{j}] must equal 1 at s=0")
        return out


@dataclass(frozen=True)
class WaitDependent:
    """W_{n+1} = [W_n + [S_n - c W_n]^+ - A_{n+1}]^+, common exp(mu) services."""

    c: float
    mu: float

    def violations(self, spec):
        out = []
        if self.c <= 0:
            out.append("wait-dependent discount c must be > 0")
        if self.mu <= 0:
            out.append("wait-dependent service rate mu must be > 0")
        return out


# --------------------------------------------------------------------------
# The full spec
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    chain: tuple  # row tuples of the transition matrix
    arrivals: object
    services: object
    dependence: object
    a: Optional[float] = None
    model_kind: object = field(default_factory=Autoregressive)

    @property
    def n_states(self):
        return len(self.chain)

    def transition_matrix(self) -> np.ndarray:
        return np.array(self.chain, dtype=float)

    def markov_chain(self) -> MarkovChain:
        return MarkovChain(self.transition_matrix())

    def with_service_divisor(self, u: float) -> "ModelSpec":
        return replace(self, services=self.services.scaled(u))

    def with_theta(self, theta: float) -> "ModelSpec":
        return replace(self, dependence=FGM(theta))

    def with_a(self, a: float) -> "ModelSpec":
        return replace(self, a=a)


def validate(spec: ModelSpec) -> list[str]:
    """Return the list of violated invariants; empty means valid."""
    out = []
    n = spec.n_states
    try:
        spec.markov_chain()
    except Exception as exc:  # report chain problems instead of raising
        out.append(f"chain: {exc}")
    out += spec.arrivals.violations(n)
    out += spec.services.violations(n)
    out += spec.dependence.violations(n)
    out += spec.model_kind.violations(spec)
    return out


def require_valid(spec: ModelSpec) -> None:
    report = validate(spec)
    if report:
        raise SpecValidationError(report)


# --------------------------------------------------------------------------
# JSON ingestion (schema documented in the README)
# --------------------------------------------------------------------------

def _need(obj, key, path, kind=None):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: missing")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}: unexpected type {type(val).__name__}")
    return val


def _floats(obj, key, path):
    raw = _need(obj, key, path, list)
    out = []
    for k, v in enumerate(raw):
        if not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{key}[{k}]: expected a number")
        out.append(float(v))
    return tuple(out)


def _parse_arrivals(obj, path):
    kind = _need(obj, "type", path, str)
    if kind == "exponential":
        return ExponentialArrivals(_floats(obj, "rates", path))
    if kind == "mixed_erlang":
        return MixedErlangArrivals(_floats(obj, "rates", path), _floats(obj, "weights", path))
    if kind == "deterministic":
        return DeterministicArrivals(float(_need(obj, "t", path, (int, float))))
    raise ConfigError(f"{path}.type: unknown arrival type {kind!r}")


def _parse_services(obj, path):
    kind = _need(obj, "type", path, str)
    if kind == "exponential":
        return ExponentialService(_floats(obj, "rates", path))
    if kind == "mixed_erlang":
        return MixedErlangService(_floats(obj, "rates", path), _floats(obj, "weights", path))
    if kind == "rational":
        raw = _need(obj, "lsts", path, list)
        return RationalService(
            [RationalLST.from_json(r, f"{path}.lsts[{k}]") for k, r in enumerate(raw)]
        )
    raise ConfigError(f"{path}.type: unknown service type {kind!r}")


def _parse_dependence(obj, path):
    kind = _need(obj, "type", path, str)
    if kind == "independent":
        return CondIndep()
    if kind == "fgm":
        return FGM(float(_need(obj, "theta", path, (int, float))))
    if kind == "bme":
        raw = _need(obj, "pairs", path, list)
        pairs = tuple(
            tuple(
                RationalLST.from_json(cell, f"{path}.pairs[{i}][{j}]")
                for j, cell in enumerate(row)
            )
            for i, row in enumerate(raw)
        )
        return BME(pairs, obj.get("sampler"))
    if kind == "service_linked":
        chi_raw = _need(obj, "chi", path, list)
        psi_raw = _need(obj, "psi", path, list)
        chi = tuple(
            tuple(RationalLST.from_json(c, f"{path}.chi[{i}][{j}]") for j, c in enumerate(row))
            for i, row in enumerate(chi_raw)
        )
        psi = tuple(RationalLST.from_json(p, f"{path}.psi[{i}]") for i, p in enumerate(psi_raw))
        return ServiceLinked(chi, psi)
    raise ConfigError(f"{path}.type: unknown dependence type {kind!r}")


def _parse_jump(obj, path):
    kind = _need(obj, "type", path, str)
    if kind == "exponential":
        return RationalLST.exponential(float(_need(obj, "rate", path, (int, float))))
    if kind == "point_mass_zero":
        return RationalLST.constant(1.0)
    if kind == "rational":
        return RationalLST.from_json(obj, path)
    raise ConfigError(f"{path}.type: unknown jump type {kind!r}")


def _parse_model_kind(obj, path):
    kind = _need(obj, "type", path, str)
    if kind == "autoregressive":
        return Autoregressive()
    if kind == "shot_noise":
        jumps = _need(obj, "jumps", path, list)
        return ShotNoise(
            r=float(_need(obj, "r", path, (int, float))),
            t=float(_need(obj, "t", path, (int, float))),
            p=float(_need(obj, "p", path, (int, float))),
            jump_lsts=tuple(_parse_jump(j, f"{path}.jumps[{k}]") for k, j in enumerate(jumps)),
            neg_rates=_floats(obj, "neg_rates", path),
        )
    if kind == "wait_dependent":
        return WaitDependent(
            c=float(_need(obj, "c", path, (int, float))),
            mu=float(_need(obj, "mu", path, (int, float))),
        )
    raise ConfigError(f"{path}.type: unknown model kind {kind!r}")


def spec_from_json_dict(obj: dict) -> ModelSpec:
    """Build a ModelSpec from a parsed JSON object; errors carry JSON paths."""
    if not isinstance(obj, dict):
        raise ConfigError("$: top level must be an object")
    chain_raw = _need(obj, "chain", "$", list)
    try:
        chain = tuple(tuple(float(x) for x in row) for row in chain_raw)
    except (TypeError, ValueError):
        raise ConfigError("$.chain: expected a matrix of numbers")
    a = obj.get("a")
    if a is not None and not isinstance(a, (int, float)):
        raise ConfigError("$.a: expected a number")
    kind_obj = obj.get("model_kind", {"type": "autoregressive"})
    return ModelSpec(
        chain=chain,
        arrivals=_parse_arrivals(_need(obj, "arrivals", "$", dict), "$.arrivals"),
        services=_parse_services(_need(obj, "services", "$", dict), "$.services"),
        dependence=_parse_dependence(
            obj.get("dependence", {"type": "independent"}), "$.dependence"
        ),
        a=None if a is None else float(a),
        model_kind=_parse_model_kind(kind_obj, "$.model_kind"),
    )


def load_spec(path) -> ModelSpec:
    import json

    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"$: invalid JSON ({exc})")
    return spec_from_json_dict(obj)
