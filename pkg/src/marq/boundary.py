"""Shared machinery for resolving boundary unknowns.

Each solver pins its unknown constants (the v-vectors, derivative stacks or
polynomial coefficients) by evaluating the truncated series at designated
points and solving a small linear system.  The helpers here cover the common
parts: batched affine probing, point clustering for repeated denominator
zeros, and the guarded linear solve with condition-number reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .errors import SingularSystem

CONDITION_LIMIT = 1e12
RESIDUAL_LIMIT = 1e-9


def boundary_policy(policy):
    """Tighter truncation for boundary-system assembly.

    Boundary constants feed every later evaluation, and near-pole factors
    amplify their error; assembling the defining series two decades below the
    evaluation tolerance keeps that amplification under the caller's budget.
    """
    return type(policy)(
        tolerance=max(policy.tolerance * 1e-4, 1e-13),
        max_terms=policy.max_terms,
        min_terms=policy.min_terms,
    )


@dataclass(frozen=True)
class BoundaryVector:
    """Resolved unknown constants of one boundary system."""

    kind: str
    values: np.ndarray
    condition_number: float
    residual: float

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "values": [[z.real, z.imag] for z in np.atleast_1d(self.values)],
            "condition_number": self.condition_number,
            "residual": self.residual,
        }


def solve_boundary(a: np.ndarray, b: np.ndarray, kind: str) -> BoundaryVector:
    """Solve A x = b, reporting conditioning; raises SingularSystem when unfit.

    Rows are equilibrated to unit max before the LU solve; the reported
    residual refers to the original system.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0:
        return BoundaryVector(kind, b[:0], 1.0, 0.0)
    scale = np.max(np.abs(a), axis=1)
    scale[scale == 0] = 1.0
    a_eq = a / scale[:, None]
    b_eq = b / scale
    cond = float(np.linalg.cond(a_eq))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularSystem(f"{kind}: condition number {cond:.3e}")
    try:
        x = np.linalg.solve(a_eq, b_eq)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"{kind}: {exc}")
    residual = float(np.max(np.abs(a @ x - b))) if b.size else 0.0
    if residual > RESIDUAL_LIMIT * max(1.0, float(np.max(np.abs(b)))):
        raise SingularSystem(f"{kind}: linear residual {residual:.3e}")
    return BoundaryVector(kind, x, cond, residual)


def cluster_points(points, tol: float = 1e-6):
    """Group numerically coincident points; returns (center, multiplicity) pairs.

    Repeated denominator zeros (e.g. a shared arrival rate across transitions)
    come back from separate root extractions with tiny discrepancies; the
    elimination must treat them as one zero of higher multiplicity.
    """
    clusters: list[list[complex]] = []
    for p in points:
        for members in clusters:
            center = sum(members) / len(members)
            if abs(p - center) <= tol * (1.0 + abs(center)):
                members.append(p)
                break
        else:
            clusters.append([p])
    return [(sum(m) / len(m), len(m)) for m in clusters]


def falling(m: int, d: int) -> float:
    """Falling factorial m (m-1) ... (m-d+1); zero when d > m."""
    if d > m:
        return 0.0
    out = 1.0
    for k in range(d):
        out *= m - k
    return out


def leibniz_row(d: int, r_jet: np.ndarray, z_jets: np.ndarray, a: float) -> np.ndarray:
    """d-th derivative of s -> R(s) Z(a s) at the jet expansion point.

    ``r_jet`` holds Taylor coefficients of R, ``z_jets`` those of Z at the
    scaled point (stacked trailing shape), both to order >= d.
    """
    acc = None
    for k in range(d + 1):
        r_deriv = r_jet[d - k] * factorial(d - k)
        z_deriv = z_jets[k] * factorial(k)
        contrib = comb(d, k) * r_deriv * (a**k) * z_deriv
        acc = contrib if acc is None else acc + contrib
    return acc
