"""Quenched partition functions under Gaussian disorder.

The Hamiltonian counts sites 0..N, so site 0 always carries its weight.
The free chain lumps the final incomplete excursion into a tail factor:
Z_N = sum_n Z0[n] P(E > N - n).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import CapBias
from .excursion import ExcursionLaw


@dataclass(frozen=True, eq=False)
class DisorderSequence:
    values: np.ndarray  # V_0..V_N
    seed: int
    stream_id: int

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ModelParams:
    beta: float
    delta: float
    N: int
    excursion_cap: int | None = None  # None: exact recursion

    def __post_init__(self):
        if not (math.isfinite(self.beta) and math.isfinite(self.delta)):
            raise ValueError("beta and delta must be finite")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.excursion_cap is not None and self.excursion_cap < 1:
            raise ValueError("excursion cap must be positive")

    @property
    def u(self) -> float:
        return -self.beta / 2 + self.delta

    @property
    def K(self) -> int:
        return self.N if self.excursion_cap is None else min(self.excursion_cap, self.N)

    def mode(self) -> str:
        return "exact" if self.excursion_cap is None else f"capped:{self.excursion_cap}"


@dataclass(frozen=True, eq=False)
class PartitionTables:
    logZ0: np.ndarray
    logB: np.ndarray
    logZfree: float
    cap_bias: float = 0.0  # tail(K) dropped by a capped recursion
    pot: np.ndarray | None = None  # site log-weights the tables were built from

    @property
    def N(self) -> int:
        return len(self.logZ0) - 1


def sample_disorder(seed: int, stream_id: int, N: int) -> DisorderSequence:
    """V_0..V_N i.i.d. N(0,1).

    The stream is PCG64 seeded by SeedSequence(seed, spawn_key=(stream_id,)),
    so distinct stream ids give statistically independent sequences and the
    result does not depend on platform or call order.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    rng = np.random.Generator(np.random.PCG64(ss))
    return DisorderSequence(rng.standard_normal(N + 1), int(seed), int(stream_id))


def site_potential(params: ModelParams, disorder) -> np.ndarray:
    """beta (u + V_n) for n = 0..N."""
    v = np.asarray(getattr(disorder, "values", disorder), dtype=float)
    if len(v) < params.N + 1:
        raise ValueError(f"disorder has {len(v)} sites, need {params.N + 1}")
    return params.beta * (params.u + v[: params.N + 1])


def forward_recursion(law: ExcursionLaw, params: ModelParams, disorder) -> PartitionTables:
    return tables_from_potential(law, site_potential(params, disorder), params.K)


def tables_from_potential(law: ExcursionLaw, pot: np.ndarray, K: int | None = None) -> PartitionTables:
    N = len(pot) - 1
    law.require(N)
    K = N if K is None else min(K, N)
    law.require(K)
    logp = np.ascontiguousarray(law.log_pmf[: N + 1])
    logtail = np.ascontiguousarray(law.log_tail[: N + 1])
    pot = np.ascontiguousarray(pot, dtype=float)
    logZ0 = _kernels.forward_log(logp, pot, N, K)
    logB = _kernels.backward_log(logp, logtail, pot, N, K)
    logZfree = float(logsumexp(logZ0 + logtail[N::-1]))
    bias = float(law.tail[K]) if K < N else 0.0
    if bias > law.tail_tol:
        warnings.warn(f"capped recursion drops excursion mass {bias:.3e} beyond K = {K}", CapBias, stacklevel=2)
    return PartitionTables(logZ0, logB, logZfree, bias, pot)


def quenched_free_energy(tables: PartitionTables, params: ModelParams) -> float:
    """Constrained estimator log Z0_N / (beta N)."""
    return float(tables.logZ0[-1]) / (params.beta * params.N)


def contact_profile(tables: PartitionTables, law=None, params=None, disorder=None) -> np.ndarray:
    """P(x_n = 0) under the free quenched measure, n = 0..N."""
    return np.exp(tables.logZ0 + tables.logB - tables.logZfree)


def annealed_reference(law: ExcursionLaw, params: ModelParams) -> float:
    """log E^X exp(beta Delta L_N): the exact finite-N annealed partition function."""
    pot = np.full(params.N + 1, params.beta * params.delta)
    return tables_from_potential(law, pot, params.K).logZfree


def run_replica(law: ExcursionLaw, params: ModelParams, seed: int, stream_id: int) -> dict:
    """One disorder draw: the per-replica record written by scans."""
    dis = sample_disorder(seed, stream_id, params.N)
    tab = forward_recursion(law, params, dis)
    prof = contact_profile(tab)
    return {
        "seed": seed,
        "stream_id": stream_id,
        "beta": params.beta,
        "delta": params.delta,
        "N": params.N,
        "log_Z0_N": float(tab.logZ0[-1]),
        "f_q_hat": quenched_free_energy(tab, params),
        "contact_mean": float(np.mean(prof)),
    }


def standard_error(x) -> float:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return math.nan
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))
