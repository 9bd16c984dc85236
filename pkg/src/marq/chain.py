"""Background Markov chain: validation, stationary law, n-step powers."""

from __future__ import annotations

import numpy as np

from .errors import NonIrreducible, NonStochastic

_ROW_SUM_TOL = 1e-12


class MarkovChain:
    """Irreducible discrete-time chain on {1..N} given by its transition matrix.

    The matrix is validated on construction: rows must sum to one within
    1e-12, entries must lie in [0,1], and every state must reach every other
    state (boolean reachability closure on the support graph).
    """

    def __init__(self, transition):
        p = np.array(transition, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise NonStochastic("transition matrix must be square and nonempty")
        if np.any(p < -1e-15) or np.any(p > 1 + 1e-15):
            raise NonStochastic("transition probabilities must lie in [0, 1]")
        row_sums = p.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
            raise NonStochastic(
                f"rows must sum to 1 within {_ROW_SUM_TOL}; got sums {row_sums}"
            )
        if not _is_irreducible(p):
            raise NonIrreducible("chain is not irreducible")
        p.setflags(write=False)
        self.transition = p
        self.n_states = p.shape[0]
        self._stationary = None

    def stationary(self) -> np.ndarray:
        if self._stationary is None:
            self._stationary = stationary_distribution(self)
        return self._stationary

    def power(self, n: int) -> np.ndarray:
        return chain_power(self, n)

    def __repr__(self):
        return f"MarkovChain(n_states={self.n_states})"


def _is_irreducible(p: np.ndarray) -> bool:
    n = p.shape[0]
    reach = (p > 0) | np.eye(n, dtype=bool)
    # Repeated squaring closes reachability in ceil(log2(n)) rounds.
    for _ in range(max(1, int(np.ceil(np.log2(n))) + 1)):
        reach = reach | (reach @ reach)
    return bool(reach.all())


def stationary_distribution(chain: MarkovChain) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 by row replacement.

    The last equation of (P^T - I) pi = 0 is replaced with the
    normalization row; exact and tuning-free for the small N in scope.
    """
    p = chain.transition
    n = chain.n_states
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    if np.any(pi <= 0):
        raise NonIrreducible(f"stationary distribution not strictly positive: {pi}")
    return pi


def chain_power(chain: MarkovChain, n: int) -> np.ndarray:
    """n-step transition matrix P^n, n >= 0."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return np.linalg.matrix_power(chain.transition, n)
