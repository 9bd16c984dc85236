"""Numba-compiled recursion kernels (the hot loops of the Monte Carlo oracle).

Every kernel walks ``replications`` independent SplitMix64 streams through
``steps`` iterations of its workload recursion, accumulating per-replication
sums of W 1{Y=i}, state occupancies, idle indicators and e^{-s W} 1{Y=i} for
each requested s.  Draw order and accumulation order are part of the
contract: the numpy fallbacks in kernels_numpy.py replay exactly the same
stream positions, so both backends return bit-identical accumulators.

W-sums and transform sums are Kahan-compensated; occupancy and idle counters
are exact in double precision.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via MARQ_BACKEND=numpy
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _next_u(state):
    state = state + _GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return state, np.float64(z >> np.uint64(11)) * _INV53


@njit(cache=True)
def sim_ar_exp(states0, steps, burn_in, p_cdf, lam, mu, a, s_values):
    R = states0.shape[0]
    N = lam.shape[0]
    K = s_values.shape[0]
    w_sum = np.zeros((R, N))
    w_c = np.zeros((R, N))
    occ = np.zeros((R, N))
    idle = np.zeros((R, N))
    tr = np.zeros((R, K, N))
    tr_c = np.zeros((R, K, N))
    for rep in range(R):
        st = states0[rep]
        w = 0.0
        y = 0
        for n in range(steps):
            st, u1 = _next_u(st)
            st, u2 = _next_u(st)
            st, u3 = _next_u(st)
            if n >= burn_in:
                occ[rep, y] += 1.0
                if w == 0.0:
                    idle[rep, y] += 1.0
                yv = w - w_c[rep, y]
                t = w_sum[rep, y] + yv
                w_c[rep, y] = (t - w_sum[rep, y]) - yv
                w_sum[rep, y] = t
                for k in range(K):
                    val = np.exp(-s_values[k] * w)
                    yv = val - tr_c[rep, k, y]
                    t = tr[rep, k, y] + yv
                    tr_c[rep, k, y] = (t - tr[rep, k, y]) - yv
                    tr[rep, k, y] = t
            s_n = -np.log1p(-u2) / mu[y]
            j = 0
            while u1 >= p_cdf[y, j]:
                j += 1
            a_n = -np.log1p(-u3) / lam[j]
            w1 = a * w + s_n - a_n
            w = w1 if w1 > 0.0 else 0.0
            y = j
    return w_sum, occ, idle, tr


@njit(cache=True)
def sim_ar_fgm(states0, steps, burn_in, p_cdf, lam, mu, a, theta, s_values):
    R = states0.shape[0]
    N = lam.shape[0]
    K = s_values.shape[0]
    w_sum = np.zeros((R, N))
    w_c = np.zeros((R, N))
    occ = np.zeros((R, N))
    idle = np.zeros((R, N))
    tr = np.zeros((R, K, N))
    tr_c = np.zeros((R, K, N))
    for rep in range(R):
        st = states0[rep]
        w = 0.0
        y = 0
        for n in range(steps):
            st, u1 = _next_u(st)
            st, u2 = _next_u(st)
            st, u3 = _next_u(st)
            if n >= burn_in:
                occ[rep, y] += 1.0
                if w == 0.0:
                    idle[rep, y] += 1.0
                yv = w - w_c[rep, y]
                t = w_sum[rep, y] + yv
                w_c[rep, y] = (t - w_sum[rep, y]) - yv
                w_sum[rep, y] = t
                for k in range(K):
                    val = np.exp(-s_values[k] * w)
                    yv = val - tr_c[rep, k, y]
                    t = tr[rep, k, y] + yv
                    tr_c[rep, k, y] = (t - tr[rep, k, y]) - yv
                    tr[rep, k, y] = t
            s_n = -np.log1p(-u2) / mu[y]
            j = 0
            while u1 >= p_cdf[y, j]:
                j += 1
            b = theta * (1.0 - 2.0 * u2)
            if b < 1e-12 and b > -1e-12:
                u2c = u3
            else:
                disc = (1.0 + b) * (1.0 + b) - 4.0 * b * u3
                u2c = ((1.0 + b) - np.sqrt(disc)) / (2.0 * b)
            if u2c > 1.0 - 1e-16:
                u2c = 1.0 - 1e-16
            if u2c < 0.0:
                u2c = 0.0
            a_n = -np.log1p(-u2c) / lam[j]
            w1 = a * w + s_n - a_n
            w = w1 if w1 > 0.0 else 0.0
            y = j
    return w_sum, occ, idle, tr


@njit(cache=True)
def sim_ar_mixed_erlang(states0, steps, burn_in, p_cdf, lam, mu, a, q_cdf, s_values):
    R = states0.shape[0]
    N = lam.shape[0]
    K = s_values.shape[0]
    M = q_cdf.shape[0]
    w_sum = np.zeros((R, N))
    w_c = np.zeros((R, N))
    occ = np.zeros((R, N))
    idle = np.zeros((R, N))
    tr = np.zeros((R, K, N))
    tr_c = np.zeros((R, K, N))
    for rep in range(R):
        st = states0[rep]
        w = 0.0
        y = 0
        for n in range(steps):
            st, u1 = _next_u(st)
            st, u2 = _next_u(st)
            st, u3 = _next_u(st)
            if n >= burn_in:
                occ[rep, y] += 1.0
                if w == 0.0:
                    idle[rep, y] += 1.0
                yv = w - w_c[rep, y]
                t = w_sum[rep, y] + yv
                w_c[rep, y] = (t - w_sum[rep, y]) - yv
                w_sum[rep, y] = t
                for k in range(K):
                    val = np.exp(-s_values[k] * w)
                    yv = val - tr_c[rep, k, y]
                    t = tr[rep, k, y] + yv
                    tr_c[rep, k, y] = (t - tr[rep, k, y]) - yv
                    tr[rep, k, y] = t
            s_n = -np.log1p(-u2) / mu[y]
            j = 0
            while u1 >= p_cdf[y, j]:
                j += 1
            m = 0
            while u3 >= q_cdf[m]:
                m += 1
            sumlog = 0.0
            for ph in range(M):
                st, ue = _next_u(st)
                if ph <= m:
                    sumlog += np.log1p(-ue)
            a_n = -sumlog / lam[j]
            w1 = a * w + s_n - a_n
            w = w1 if w1 > 0.0 else 0.0
            y = j
    return w_sum, occ, idle, tr


@njit(cache=True)
def sim_shotnoise(states0, steps, burn_in, p_cdf, mu, decay, p_pos, jump_kind,
                  jump_rate, nu, s_values):
    R = states0.shape[0]
    N = mu.shape[0]
    K = s_values.shape[0]
    w_sum = np.zeros((R, N))
    w_c = np.zeros((R, N))
    occ = np.zeros((R, N))
    idle = np.zeros((R, N))
    tr = np.zeros((R, K, N))
    tr_c = np.zeros((R, K, N))
    for rep in range(R):
        st = states0[rep]
        w = 0.0
        y = 0
        for n in range(steps):
            st, u1 = _next_u(st)
            st, u2 = _next_u(st)
            st, u3 = _next_u(st)
            st, u4 = _next_u(st)
            if n >= burn_in:
                occ[rep, y] += 1.0
                if w == 0.0:
                    idle[rep, y] += 1.0
                yv = w - w_c[rep, y]
                t = w_sum[rep, y] + yv
                w_c[rep, y] = (t - w_sum[rep, y]) - yv
                w_sum[rep, y] = t
                for k in range(K):
                    val = np.exp(-s_values[k] * w)
                    yv = val - tr_c[rep, k, y]
                    t = tr[rep, k, y] + yv
                    tr_c[rep, k, y] = (t - tr[rep, k, y]) - yv
                    tr[rep, k, y] = t
            s_n = -np.log1p(-u2) / mu[y]
            j = 0
            while u1 >= p_cdf[y, j]:
                j += 1
            if u3 < p_pos:
                if jump_kind[j] == 0:
                    c_n = 0.0
                else:
                    c_n = -np.log1p(-u4) / jump_rate[j]
            else:
                c_n = np.log1p(-u4) / nu[j]
            w1 = decay * (w + s_n) + c_n
            w = w1 if w1 > 0.0 else 0.0
            y = j
    return w_sum, occ, idle, tr


@njit(cache=True)
def sim_waitdep(states0, steps, burn_in, p_cdf, lam, mu_common, c, s_values):
    R = states0.shape[0]
    N = lam.shape[0]
    K = s_values.shape[0]
    w_sum = np.zeros((R, N))
    w_c = np.zeros((R, N))
    occ = np.zeros((R, N))
    idle = np.zeros((R, N))
    tr = np.zeros((R, K, N))
    tr_c = np.zeros((R, K, N))
    for rep in range(R):
        st = states0[rep]
        w = 0.0
        y = 0
        for n in range(steps):
            st, u1 = _next_u(st)
            st, u2 = _next_u(st)
            st, u3 = _next_u(st)
            if n >= burn_in:
                occ[rep, y] += 1.0
                if w == 0.0:
                    idle[rep, y] += 1.0
                yv = w - w_c[rep, y]
                t = w_sum[rep, y] + yv
                w_c[rep, y] = (t - w_sum[rep, y]) - yv
                w_sum[rep, y] = t
                for k in range(K):
                    val = np.exp(-s_values[k] * w)
                    yv = val - tr_c[rep, k, y]
                    t = tr[rep, k, y] + yv
                    tr_c[rep, k, y] = (t - tr[rep, k, y]) - yv
                    tr[rep, k, y] = t
            s_n = -np.log1p(-u2) / mu_common
            j = 0
            while u1 >= p_cdf[y, j]:
                j += 1
            eff = s_n - c * w
            if eff < 0.0:
                eff = 0.0
            a_n = -np.log1p(-u3) / lam[j]
            w1 = w + eff - a_n
            w = w1 if w1 > 0.0 else 0.0
            y = j
    return w_sum, occ, idle, tr
