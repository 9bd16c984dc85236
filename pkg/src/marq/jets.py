"""Truncated Taylor-coefficient (jet) arithmetic.

A jet of order K stores the first K+1 Taylor coefficients of an analytic
function around an expansion point: ``j[k] = f^(k)(s0) / k!``.  The order
axis is always the LEADING axis, so a scalar jet has shape ``(K+1,)``, a
vector jet ``(K+1, N)`` and a matrix jet ``(K+1, N, N)``.

Arithmetic on jets propagates derivatives exactly through every operation,
which is how the solvers differentiate their truncated series without
resorting to finite differences.  Order 0 degenerates to plain complex
arithmetic with a singleton leading axis.
"""

from __future__ import annotations

import numpy as np


def const(value, order: int) -> np.ndarray:
    """Jet of a constant (scalar, vector or matrix)."""
    value = np.asarray(value, dtype=complex)
    out = np.zeros((order + 1,) + value.shape, dtype=complex)
    out[0] = value
    return out


def variable(s0: complex, order: int) -> np.ndarray:
    """Jet of the identity map s -> s expanded at s0."""
    out = np.zeros(order + 1, dtype=complex)
    out[0] = s0
    if order >= 1:
        out[1] = 1.0
    return out


def eye(n: int, order: int) -> np.ndarray:
    out = np.zeros((order + 1, n, n), dtype=complex)
    out[0] = np.eye(n)
    return out


def value(jet: np.ndarray):
    """Order-0 coefficient, i.e. the plain function value."""
    return jet[0]


def derivative(jet: np.ndarray, k: int):
    """k-th derivative f^(k)(s0) recovered from the stored coefficient."""
    from math import factorial

    return jet[k] * factorial(k)


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise jet product (truncated Cauchy product on the order axis)."""
    order = a.shape[0] - 1
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = np.zeros((order + 1,) + shape, dtype=complex)
    for k in range(order + 1):
        for p in range(k + 1):
            out[k] = out[k] + a[p] * b[k - p]
    return out


def inv(a: np.ndarray) -> np.ndarray:
    """Elementwise jet reciprocal; order-0 part must be nonzero."""
    order = a.shape[0] - 1
    out = np.zeros_like(np.asarray(a, dtype=complex))
    out[0] = 1.0 / a[0]
    for k in range(1, order + 1):
        acc = np.zeros_like(out[0])
        for p in range(1, k + 1):
            acc = acc + a[p] * out[k - p]
        out[k] = -acc / a[0]
    return out


def div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return mul(a, inv(b))


def powi(a: np.ndarray, n: int) -> np.ndarray:
    """Integer power of a jet, n >= 0."""
    order = a.shape[0] - 1
    out = const(np.ones(a.shape[1:]) if a.ndim > 1 else 1.0, order)
    for _ in range(n):
        out = mul(out, a)
    return out


def exp(a: np.ndarray) -> np.ndarray:
    """Elementwise jet exponential via the standard recurrence."""
    order = a.shape[0] - 1
    out = np.zeros_like(np.asarray(a, dtype=complex))
    out[0] = np.exp(a[0])
    for k in range(1, order + 1):
        acc = np.zeros_like(out[0])
        for j in range(1, k + 1):
            acc = acc + j * a[j] * out[k - j]
        out[k] = acc / k
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Jet matrix product: per-order Cauchy product of matrix coefficients.

    ``a`` has shape (K+1, N, N); ``b`` may be a matrix jet (K+1, N, M) or a
    vector jet (K+1, N).
    """
    order = a.shape[0] - 1
    out_shape = (order + 1, a.shape[1]) + b.shape[2:]
    out = np.zeros(out_shape, dtype=complex)
    for k in range(order + 1):
        for p in range(k + 1):
            out[k] += a[p] @ b[k - p]
    return out


def matsolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A(s) X(s) = B(s) order by order; A's order-0 part must be regular."""
    import numpy.linalg as la

    order = a.shape[0] - 1
    out = np.zeros((order + 1, a.shape[1]) + b.shape[2:], dtype=complex)
    lu0 = a[0]
    out[0] = la.solve(lu0, b[0])
    for k in range(1, order + 1):
        rhs = b[k].astype(complex)
        for p in range(1, k + 1):
            rhs = rhs - a[p] @ out[k - p]
        out[k] = la.solve(lu0, rhs)
    return out


def polyval(coeffs, s: np.ndarray) -> np.ndarray:
    """Evaluate a polynomial with ascending coefficients at a scalar jet."""
    order = s.shape[0] - 1
    out = const(0.0, order)
    for c in reversed(list(coeffs)):
        out = mul(out, s)
        out[0] += c
    return out


def diag(entries: list[np.ndarray]) -> np.ndarray:
    """Stack N scalar jets into a diagonal matrix jet."""
    order = entries[0].shape[0] - 1
    n = len(entries)
    out = np.zeros((order + 1, n, n), dtype=complex)
    for i, e in enumerate(entries):
        out[:, i, i] = e
    return out


def maxabs(jet: np.ndarray) -> float:
    """Largest coefficient magnitude across all orders and entries."""
    return float(np.max(np.abs(jet)))
