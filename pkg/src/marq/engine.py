"""Generic solver for vector fixed-point functional equations.

Every model in the package reduces to Z(s) = H(s) Z(zeta(s)) + V(s) with a
shift map zeta whose iterates either contract to 0 (scalings) or march off to
+infinity while the coefficient matrices decay (translations).  Iterating the
equation produces

    Z(s) = sum_n  [prod_{m<n} H(zeta^m(s))] V(zeta^n(s))
         + [prod_m H(zeta^m(s))] * tail_limit,

and this module evaluates both pieces by truncation: a term (respectively a
partial product applied to the tail vector) is accepted once the max-abs norm
of the difference of two consecutive terms falls below the tolerance.

Evaluations run in jet arithmetic (see marq.jets), so requesting derivative
order k > 0 threads exact Taylor coefficients through every factor.  V may
return a matrix of columns; each column then rides through the same prefix
products, which is how boundary systems are assembled as affine functions of
their unknowns in a single pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import NoConvergence, PoleOnOrbit

POLE_TOLERANCE = 1e-9


# --------------------------------------------------------------------------
# Shift maps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Scale:
    """s -> a s with a in (0,1); iterates contract to 0."""

    a: float

    def apply(self, jet: np.ndarray) -> np.ndarray:
        return jet * self.a


@dataclass(frozen=True)
class ExpScale:
    """s -> s e^{-r t}; the shot-noise contraction."""

    r: float
    t: float

    @property
    def factor(self) -> float:
        return float(np.exp(-self.r * self.t))

    def apply(self, jet: np.ndarray) -> np.ndarray:
        return jet * self.factor


@dataclass(frozen=True)
class Translate:
    """s -> s + delta; iterates diverge, decay must come from H itself."""

    delta: float

    def apply(self, jet: np.ndarray) -> np.ndarray:
        out = np.array(jet, dtype=complex)
        out[0] += self.delta
        return out


@dataclass(frozen=True)
class TruncationPolicy:
    tolerance: float = 1e-7
    max_terms: int = 10_000
    # Lower bound on accepted terms; used by the wait-dependent solver to
    # guarantee the product factors have entered their decaying regime.
    min_terms: int = 0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    def halved(self) -> "TruncationPolicy":
        return TruncationPolicy(self.tolerance / 2, self.max_terms, self.min_terms)


@dataclass
class TransformResult:
    """Evaluated transform (or batched columns) with truncation diagnostics."""

    value: np.ndarray
    terms_used: dict
    residual: float
    increments: tuple = ()
    tail_increments: tuple = ()
    jet: np.ndarray | None = None
    min_terms_binding: bool = False

    def derivative(self, k: int) -> np.ndarray:
        if self.jet is None or k >= self.jet.shape[0]:
            raise ValueError(f"derivative order {k} was not requested")
        return jets.derivative(self.jet, k)


def _check_pole(point0: complex, poles) -> None:
    for p in poles:
        if abs(point0 - p) < POLE_TOLERANCE:
            raise PoleOnOrbit(point0, p)


def iterate_fixed_point(
    H,
    V,
    zeta,
    tail,
    s,
    policy: TruncationPolicy = TruncationPolicy(),
    poles=(),
    order: int = 0,
) -> TransformResult:
    """Truncated evaluation of the iterated fixed-point series.

    Parameters
    ----------
    H : callable
        Scalar jet -> matrix jet (order+1, N, N).
    V : callable or None
        Scalar jet -> vector jet (order+1, N) or column batch (order+1, N, B).
        None skips the sum (pure tail product).
    zeta : Scale | ExpScale | Translate
    tail : array or None
        Tail limit vector (N,) or column batch (N, B); None or all-zero skips
        the infinite product term.
    s : complex or jet
        Evaluation point.
    """
    if np.ndim(s) == 0:
        s_jet = jets.variable(complex(s), order)
    else:
        s_jet = np.asarray(s, dtype=complex)
    poles = np.asarray(poles, dtype=complex) if len(poles) else ()

    _check_pole(complex(s_jet[0]), poles)

    sum_total = None
    prev_term = None
    sum_done = V is None
    series_count = 0
    increments = []
    tail_increments = []

    tail_arr = None if tail is None else np.asarray(tail, dtype=complex)
    tail_active = tail_arr is not None and bool(np.any(tail_arr))
    tail_done = not tail_active
    tail_jet = jets.const(tail_arr, order) if tail_active else None
    tail_prev = tail_jet
    tail_final = tail_jet
    tail_count = 0

    if V is None and not tail_active:
        raise ValueError("nothing to evaluate: V is None and tail vanishes")

    if not sum_done:
        sum_total = V(s_jet)
        prev_term = sum_total

    prefix = None
    point = s_jet
    n = 0
    binding = False
    while not (sum_done and tail_done):
        n += 1
        if n > policy.max_terms:
            last = increments[-1] if increments else (
                tail_increments[-1] if tail_increments else float("nan")
            )
            raise NoConvergence(
                f"series did not meet tolerance {policy.tolerance} within "
                f"{policy.max_terms} terms (last increment {last})"
            )
        h_n = H(point)
        if prefix is None:
            prefix = jets.eye(h_n.shape[1], order)
        prefix = jets.matmul(prefix, h_n)
        point = zeta.apply(point)
        _check_pole(complex(point[0]), poles)
        if not sum_done:
            term = jets.matmul(prefix, V(point))
            sum_total = sum_total + term
            diff = jets.maxabs(term - prev_term)
            increments.append(diff)
            prev_term = term
            if diff <= policy.tolerance:
                if n >= policy.min_terms:
                    sum_done = True
                    series_count = n
                else:
                    binding = True
        if not tail_done:
            tail_cur = jets.matmul(prefix, tail_jet)
            tdiff = jets.maxabs(tail_cur - tail_prev)
            tail_increments.append(tdiff)
            tail_prev = tail_cur
            tail_final = tail_cur
            if tdiff <= policy.tolerance:
                if n >= policy.min_terms:
                    tail_done = True
                    tail_count = n
                else:
                    binding = True

    if sum_total is None:
        total = tail_final
    elif not tail_active:
        total = sum_total
    else:
        total = sum_total + tail_final
    residual = max(
        increments[-1] if increments else 0.0,
        tail_increments[-1] if tail_increments else 0.0,
    )
    return TransformResult(
        value=total[0],
        terms_used={"series": series_count, "tail": tail_count},
        residual=float(residual),
        increments=tuple(increments),
        tail_increments=tuple(tail_increments),
        jet=total,
        min_terms_binding=binding,
    )


def product_tail(
    H,
    zeta,
    limit_vec,
    s,
    policy: TruncationPolicy = TruncationPolicy(),
    poles=(),
    order: int = 0,
) -> TransformResult:
    """lim_n prod_{m<=n} H(zeta^m(s)) applied to a fixed limit vector.

    Convergence is measured on the applied vector rather than on the raw
    matrix product: for periodic chains the matrices oscillate while their
    action on the stationary vector settles immediately.
    """
    return iterate_fixed_point(H, None, zeta, limit_vec, s, policy, poles, order)


def derivative_series(
    k: int,
    H,
    V,
    zeta,
    tail,
    s,
    policy: TruncationPolicy = TruncationPolicy(),
    poles=(),
) -> np.ndarray:
    """k-th s-derivative of the truncated series, by jet arithmetic."""
    res = iterate_fixed_point(H, V, zeta, tail, s, policy, poles, order=k)
    return res.derivative(k)
