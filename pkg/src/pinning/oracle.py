"""Brute-force enumeration over return sets at small N.

Every configuration is a subset of {1..N-1} of interior returns (plus the
endpoint rule), so the cost is 2^(N-1) rows times N columns; nothing here
shares code with the recursion it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import TooLarge
from .excursion import ExcursionLaw, renewal_hits, solve_tilt, tilt_truncate
from .quenched import ModelParams, site_potential

MAX_N = 20


@dataclass(frozen=True)
class EnumerationSpec:
    N: int
    constrain_endpoint: bool = True
    R: int | None = None  # forbid excursions longer than R

    def __post_init__(self):
        if self.N > MAX_N:
            raise TooLarge(f"enumeration limited to N <= {MAX_N}, got {self.N}")
        if self.N < 1:
            raise ValueError("N must be at least 1")


def _configurations(N: int, constrained: bool):
    """Boolean matrix (rows = configurations, columns = sites 0..N) of zeros."""
    interior = N - 1
    masks = np.arange(2**interior, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(interior)) & 1).astype(bool)
    ones = np.ones((len(masks), 1), dtype=bool)
    if constrained:
        return np.hstack([ones, bits, ones])
    return np.vstack([np.hstack([ones, bits, ones]), np.hstack([ones, bits, ~ones])])


def _log_weights(zeros: np.ndarray, logp: np.ndarray, log_tail: np.ndarray, pot: np.ndarray, max_gap: int) -> np.ndarray:
    rows, width = zeros.shape
    N = width - 1
    last = np.zeros(rows, dtype=np.int64)
    lw = np.full(rows, pot[0])
    for n in range(1, N + 1):
        z = zeros[:, n]
        gap = n - last[z]
        step = np.where(gap <= max_gap, logp[np.minimum(gap, len(logp) - 1)], -np.inf)
        lw[z] += step + pot[n]
        last[z] = n
    lw += log_tail[N - last]
    return lw


def enumerate_partition(law: ExcursionLaw, params: ModelParams, disorder, spec: EnumerationSpec) -> float:
    """Exact log Z (constrained or free) by summing every return configuration."""
    N = spec.N
    p = params if params.N == N else ModelParams(params.beta, params.delta, N, params.excursion_cap)
    pot = site_potential(p, disorder)
    law.require(N)
    max_gap = p.K
    if spec.R is not None:
        max_gap = min(max_gap, spec.R)
    zeros = _configurations(N, spec.constrain_endpoint)
    logp = law.log_pmf[: N + 1]
    log_tail = law.log_tail[: N + 1]
    return float(logsumexp(_log_weights(zeros, logp, log_tail, pot, max_gap)))


def verify_ldp_identity(law: ExcursionLaw, beta: float, chi: float, n: int, R: int, count_origin: bool = True) -> tuple[float, float]:
    """Both sides of E[e^{-beta chi L_n} | Y0_{n,R}] = e^{-alpha n} nu(x_n=0) / P(x_n=0 | Y_{n,R}).

    Conditioning on Y (no excursion longer than R) makes the excursions
    i.i.d. p(. | E <= R).  L_n counts returns in [0, n], matching the
    Hamiltonian's site 0; ``count_origin=False`` counts (0, n] instead,
    which divides both sides by e^{-beta chi}.
    """
    if n > 18:
        raise TooLarge("identity check limited to n <= 18")
    if not 1 <= R <= n:
        raise ValueError("need 1 <= R <= n")
    bchi = beta * chi
    zeros = _configurations(n, True)
    cond_logp = np.full(n + 1, -np.inf)
    cond_logp[1 : R + 1] = law.log_pmf[1 : R + 1] - logsumexp(law.log_pmf[1 : R + 1])
    no_tail = np.zeros(n + 1)  # endpoint is pinned, no tail factor
    lw = _log_weights(zeros, cond_logp, no_tail, np.zeros(n + 1), R)
    L = zeros[:, 1:].sum(axis=1) + (1 if count_origin else 0)
    lhs = math.exp(logsumexp(lw - bchi * L) - logsumexp(lw))

    alpha = solve_tilt(law, bchi, R)
    nu = tilt_truncate(law, alpha, R)
    u_nu = renewal_hits(nu.pmf, n)[n]
    u_cond = renewal_hits(np.exp(cond_logp[: R + 1]), n)[n]
    rhs = math.exp(-alpha * n) * u_nu / u_cond
    if count_origin:
        rhs *= math.exp(-bchi)
    return lhs, rhs


def expected_local_time(pmf: np.ndarray, interval: tuple[int, int]) -> float:
    """Sum of renewal hit probabilities over the integer points of [lo, hi]."""
    lo, hi = interval
    u = renewal_hits(pmf, hi)
    return float(np.sum(u[lo : hi + 1]))


def verify_ratio_bound(law: ExcursionLaw, alpha: float, config, i: int) -> float:
    """E_nu(L_{I_i}) / E(L_{I_i} | Y_{n_i^+, R}) with R = config.R.

    Both expectations are exact renewal convolutions; under Y the excursion
    law is p(. | E <= R).
    """
    lo, hi = config.interval_integers(i)
    R = config.R
    nu = tilt_truncate(law, alpha, R)
    cond = tilt_truncate(law, 0.0, R)
    return expected_local_time(nu.pmf, (lo, hi)) / expected_local_time(cond.pmf, (lo, hi))


def exact_first_excursion(law: ExcursionLaw, N: int) -> np.ndarray:
    """P(E_1 = k | renewal visits N), k = 0..N, for the zero-potential chain."""
    law.require(N)
    u = renewal_hits(law.pmf[: N + 1], N)
    k = np.arange(N + 1)
    out = law.pmf[: N + 1] * u[N - k] / u[N]
    out[0] = 0.0
    return out


def identity_suite(seed: int = 0, cases: int = 40) -> list[dict]:
    """Every exact check as a table row: name, error, tolerance, ok.

    Recursion against enumeration on random small cases (constrained and
    free), then the LDP identity on n in {8, 10, 12, 14}, R in {3, 5, 8},
    beta chi in {0.1, 0.5, 1.0}.
    """
    from .excursion import SlowVariation, build_law
    from .quenched import forward_recursion

    rng = np.random.default_rng(seed)
    laws = {c: build_law(c, SlowVariation(), 64) for c in (1.5, 1.8, 2.0, 2.5)}
    rows = []
    for j in range(cases):
        c = (1.5, 1.8, 2.0, 2.5)[j % 4]
        N = int(rng.integers(1, 17))
        beta = float(rng.uniform(0.1, 2.0))
        delta = float(rng.uniform(0.0, 1.0)) / beta
        params = ModelParams(beta, delta, N)
        V = rng.standard_normal(N + 1)
        tab = forward_recursion(laws[c], params, V)
        for constrained in (True, False):
            ref = enumerate_partition(laws[c], params, V, EnumerationSpec(N, constrained))
            got = float(tab.logZ0[N]) if constrained else tab.logZfree
            kind = "Z0" if constrained else "Zfree"
            rows.append({"name": f"recursion {kind} c={c} N={N}", "error": abs(got - ref), "tol": 1e-9})
    law = laws[1.8]
    for n in (8, 10, 12, 14):
        for R in (3, 5, 8):
            for bchi in (0.1, 0.5, 1.0):
                lhs, rhs = verify_ldp_identity(law, 1.0, bchi, n, R)
                rows.append({"name": f"ldp n={n} R={R} bchi={bchi}", "error": abs(lhs - rhs), "tol": 1e-10})
    for r in rows:
        r["ok"] = bool(r["error"] <= r["tol"])
    return rows
