"""Compiled inner loops of the renewal recursion (log domain, max-shifted)."""

import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def forward_log(logp, pot, N, K):
    """logZ0[n] = pot[n] + log sum_{k=1}^{min(n,K)} p(k) Z0[n-k]."""
    out = np.empty(N + 1)
    out[0] = pot[0]
    for n in range(1, N + 1):
        kmax = min(n, K)
        m = -np.inf
        for k in range(1, kmax + 1):
            v = logp[k] + out[n - k]
            if v > m:
                m = v
        s = 0.0
        for k in range(1, kmax + 1):
            s += math.exp(logp[k] + out[n - k] - m)
        out[n] = pot[n] + m + math.log(s)
    return out


@numba.njit(cache=True, nogil=True)
def backward_log(logp, logtail, pot, N, K):
    """logB[n]: free partition of [n, N] given a zero at n, site n excluded.

    B[n] = tail(N - n) + sum_{k=1}^{min(N-n,K)} p(k) w[n+k] B[n+k].
    """
    out = np.empty(N + 1)
    out[N] = 0.0
    for n in range(N - 1, -1, -1):
        kmax = min(N - n, K)
        m = logtail[N - n]
        for k in range(1, kmax + 1):
            v = logp[k] + pot[n + k] + out[n + k]
            if v > m:
                m = v
        s = math.exp(logtail[N - n] - m)
        for k in range(1, kmax + 1):
            s += math.exp(logp[k] + pot[n + k] + out[n + k] - m)
        out[n] = m + math.log(s)
    return out


@numba.njit(cache=True, nogil=True)
def _pick(logw, u):
    m = -np.inf
    for j in range(logw.shape[0]):
        if logw[j] > m:
            m = logw[j]
    tot = 0.0
    for j in range(logw.shape[0]):
        tot += math.exp(logw[j] - m)
    target = u * tot
    acc = 0.0
    for j in range(logw.shape[0]):
        acc += math.exp(logw[j] - m)
        if acc >= target and logw[j] > -np.inf:
            return j
    for j in range(logw.shape[0] - 1, -1, -1):
        if logw[j] > -np.inf:
            return j
    return 0


@numba.njit(cache=True, nogil=True)
def sample_zeros(logp, logZ0, pot, logtail, N, K, constrained, uniforms):
    """Backward sampling of return times; returns them in increasing order.

    Z0[cur] / w[cur] normalizes the step law, so each step scans k upward only
    until the draw is reached and a whole path costs O(N).
    """
    zeros = np.empty(N + 1, dtype=np.int64)
    count = 0
    ui = 0
    if constrained:
        cur = N
    else:
        lw = np.empty(N + 1)
        for n in range(N + 1):
            lw[n] = logZ0[n] + logtail[N - n]
        cur = _pick(lw, uniforms[ui])
        ui += 1
    zeros[count] = cur
    count += 1
    while cur > 0:
        kmax = min(cur, K)
        lnorm = logZ0[cur] - pot[cur]
        target = uniforms[ui]
        ui += 1
        acc = 0.0
        k = 0
        last = 0
        for j in range(1, kmax + 1):
            v = logp[j] + logZ0[cur - j]
            if v > -np.inf:
                last = j
                acc += math.exp(v - lnorm)
                if acc >= target:
                    k = j
                    break
        if k == 0:
            # rounding left the cumulative sum just short of the draw
            k = last
        cur -= k
        zeros[count] = cur
        count += 1
    return zeros[:count][::-1].copy()
