"""Pure-numpy fallbacks for the recursion kernels.

Replications advance in lockstep as vector lanes; each lane owns the same
SplitMix64 stream as its numba counterpart and every draw/accumulate happens
at the same stream position, so the returned accumulators are bit-identical
to kernels.py.  Slower (one Python-level iteration per recursion step), but
dependency-free.
"""

import numpy as np

from .rng import GAMMA, _INV53, mix64


def _next_u(state):
    with np.errstate(over="ignore"):
        state = state + GAMMA
        z = mix64(state)
    return state, (z >> np.uint64(11)).astype(np.float64) * _INV53


class _Acc:
    def __init__(self, R, N, K):
        self.w_sum = np.zeros((R, N))
        self.w_c = np.zeros((R, N))
        self.occ = np.zeros((R, N))
        self.idle = np.zeros((R, N))
        self.tr = np.zeros((R, K, N))
        self.tr_c = np.zeros((R, K, N))
        self.rows = np.arange(R)

    def add(self, w, y, s_values):
        rows = self.rows
        self.occ[rows, y] += 1.0
        self.idle[rows, y] += w == 0.0
        yv = w - self.w_c[rows, y]
        t = self.w_sum[rows, y] + yv
        self.w_c[rows, y] = (t - self.w_sum[rows, y]) - yv
        self.w_sum[rows, y] = t
        for k in range(len(s_values)):
            val = np.exp(-s_values[k] * w)
            yv = val - self.tr_c[rows, k, y]
            t = self.tr[rows, k, y] + yv
            self.tr_c[rows, k, y] = (t - self.tr[rows, k, y]) - yv
            self.tr[rows, k, y] = t

    def out(self):
        return self.w_sum, self.occ, self.idle, self.tr


def _chain_step(u, p_cdf, y):
    return (u[:, None] < p_cdf[y]).argmax(axis=1)


def sim_ar_exp(states0, steps, burn_in, p_cdf, lam, mu, a, s_values):
    R, N, K = len(states0), len(lam), len(s_values)
    acc = _Acc(R, N, K)
    st = states0.copy()
    w = np.zeros(R)
    y = np.zeros(R, dtype=np.int64)
    for n in range(steps):
        st, u1 = _next_u(st)
        st, u2 = _next_u(st)
        st, u3 = _next_u(st)
        if n >= burn_in:
            acc.add(w, y, s_values)
        s_n = -np.log1p(-u2) / mu[y]
        j = _chain_step(u1, p_cdf, y)
        a_n = -np.log1p(-u3) / lam[j]
        w = np.maximum(a * w + s_n - a_n, 0.0)
        y = j
    return acc.out()


def sim_ar_fgm(states0, steps, burn_in, p_cdf, lam, mu, a, theta, s_values):
    R, N, K = len(states0), len(lam), len(s_values)
    acc = _Acc(R, N, K)
    st = states0.copy()
    w = np.zeros(R)
    y = np.zeros(R, dtype=np.int64)
    for n in range(steps):
        st, u1 = _next_u(st)
        st, u2 = _next_u(st)
        st, u3 = _next_u(st)
        if n >= burn_in:
            acc.add(w, y, s_values)
        s_n = -np.log1p(-u2) / mu[y]
        j = _chain_step(u1, p_cdf, y)
        b = theta * (1.0 - 2.0 * u2)
        small = np.abs(b) < 1e-12
        b_safe = np.where(small, 1.0, b)
        disc = (1.0 + b) ** 2 - 4.0 * b * u3
        u2c = np.where(small, u3, ((1.0 + b) - np.sqrt(disc)) / (2.0 * b_safe))
        u2c = np.minimum(u2c, 1.0 - 1e-16)
        u2c = np.maximum(u2c, 0.0)
        a_n = -np.log1p(-u2c) / lam[j]
        w = np.maximum(a * w + s_n - a_n, 0.0)
        y = j
    return acc.out()


def sim_ar_mixed_erlang(states0, steps, burn_in, p_cdf, lam, mu, a, q_cdf, s_values):
    R, N, K = len(states0), len(lam), len(s_values)
    M = len(q_cdf)
    acc = _Acc(R, N, K)
    st = states0.copy()
    w = np.zeros(R)
    y = np.zeros(R, dtype=np.int64)
    for n in range(steps):
        st, u1 = _next_u(st)
        st, u2 = _next_u(st)
        st, u3 = _next_u(st)
        if n >= burn_in:
            acc.add(w, y, s_values)
        s_n = -np.log1p(-u2) / mu[y]
        j = _chain_step(u1, p_cdf, y)
        m = (u3[:, None] < q_cdf[None, :]).argmax(axis=1)
        sumlog = np.zeros(R)
        for ph in range(M):
            st, ue = _next_u(st)
            sumlog = sumlog + np.where(ph <= m, np.log1p(-ue), 0.0)
        a_n = -sumlog / lam[j]
        w = np.maximum(a * w + s_n - a_n, 0.0)
        y = j
    return acc.out()


def sim_shotnoise(states0, steps, burn_in, p_cdf, mu, decay, p_pos, jump_kind,
                  jump_rate, nu, s_values):
    R, N, K = len(states0), len(mu), len(s_values)
    acc = _Acc(R, N, K)
    st = states0.copy()
    w = np.zeros(R)
    y = np.zeros(R, dtype=np.int64)
    for n in range(steps):
        st, u1 = _next_u(st)
        st, u2 = _next_u(st)
        st, u3 = _next_u(st)
        st, u4 = _next_u(st)
        if n >= burn_in:
            acc.add(w, y, s_values)
        s_n = -np.log1p(-u2) / mu[y]
        j = _chain_step(u1, p_cdf, y)
        pos = -np.log1p(-u4) / jump_rate[j] * (jump_kind[j] != 0)
        neg = np.log1p(-u4) / nu[j]
        c_n = np.where(u3 < p_pos, pos, neg)
        w = np.maximum(decay * (w + s_n) + c_n, 0.0)
        y = j
    return acc.out()


def sim_waitdep(states0, steps, burn_in, p_cdf, lam, mu_common, c, s_values):
    R, N, K = len(states0), len(lam), len(s_values)
    acc = _Acc(R, N, K)
    st = states0.copy()
    w = np.zeros(R)
    y = np.zeros(R, dtype=np.int64)
    for n in range(steps):
        st, u1 = _next_u(st)
        st, u2 = _next_u(st)
        st, u3 = _next_u(st)
        if n >= burn_in:
            acc.add(w, y, s_values)
        s_n = -np.log1p(-u2) / mu_common
        j = _chain_step(u1, p_cdf, y)
        eff = np.maximum(s_n - c * w, 0.0)
        a_n = -np.log1p(-u3) / lam[j]
        w = np.maximum(w + eff - a_n, 0.0)
        y = j
    return acc.out()
