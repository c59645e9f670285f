"""Annealed free energy, contact fraction and crossover scale."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

from scipy import optimize

from .errors import BracketFailure, NoRoot, OutOfRange
from .excursion import ExcursionLaw, laplace_complement, log_mgf_slope

ALPHA_MAX = 50.0


@dataclass(frozen=True)
class AnnealedSolution:
    beta: float
    delta: float
    alpha0: float
    f_a: float
    delta_star: float
    corr_len_M: float
    eps2: float
    delta2: float
    scale_R: float

    def to_record(self) -> dict:
        d = asdict(self)
        return {
            "beta": d["beta"],
            "delta": d["delta"],
            "alpha0": d["alpha0"],
            "f_a": d["f_a"],
            "delta_star": d["delta_star"],
            "M": d["corr_len_M"],
            "R": d["scale_R"],
            "eps2": d["eps2"],
        }


@dataclass(frozen=True)
class CrossoverScale:
    beta: float
    delta0: float
    g_value_at_root: float


def solve_alpha0(law: ExcursionLaw, beta_delta: float) -> float:
    """alpha0 >= 0 with E[exp(-alpha0 E)] = exp(-beta_delta).

    Solved as 1 - E[e^{-aE}] = -expm1(-beta_delta) in log(a), which keeps
    full relative precision when alpha0 is tiny.
    """
    if beta_delta < 0:
        raise ValueError("beta_delta must be nonnegative")
    if beta_delta == 0:
        return 0.0
    target = -math.expm1(-beta_delta)
    f = lambda s: laplace_complement(law, math.exp(s)) - target
    hi = math.log(ALPHA_MAX)
    if f(hi) < 0:
        raise BracketFailure(f"no root up to alpha = {ALPHA_MAX} for beta_delta = {beta_delta}")
    lo = math.log(min(beta_delta, 1.0))
    while f(lo) > 0:
        lo -= math.log(1e3)
        if lo < -690:
            raise BracketFailure(f"no lower bracket for beta_delta = {beta_delta}")
    return math.exp(optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500))


def contact_fraction(law: ExcursionLaw, alpha0: float) -> float:
    """delta* = 1 / (log M)'(-alpha0); 1/mean at alpha0 = 0 (0 if the mean is infinite)."""
    return 1.0 / log_mgf_slope(law, alpha0)


def annealed_solution(law: ExcursionLaw, beta: float, delta: float, eps2: float = 0.1) -> AnnealedSolution:
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not 0 < eps2 < 0.5:
        raise ValueError("eps2 must lie in (0, 1/2)")
    if delta < 0:
        return AnnealedSolution(beta, delta, 0.0, 0.0, 0.0, math.inf, eps2, 0.0, math.inf)
    alpha0 = solve_alpha0(law, beta * delta)
    dstar = contact_fraction(law, alpha0)
    bd = beta * delta
    M = 1.0 / (bd * dstar) if bd * dstar > 0 else math.inf
    delta2 = eps2 * dstar
    R = 1.0 / (bd * delta2) if bd * delta2 > 0 else math.inf
    return AnnealedSolution(beta, delta, alpha0, alpha0 / beta, dstar, M, eps2, delta2, R)


def rate_function(law: ExcursionLaw, m: float) -> float:
    """I(m) = sup_{t >= 0} (-t m - log E[e^{-tE}]).

    The sup is located by Brent maximization of the concave objective in
    log t; it is zero for m at or above the mean.
    """
    if m < 1:
        return math.inf
    if m >= law.mean:
        return 0.0
    if m == 1:
        return -float(law.log_pmf[1])

    def neg(s):
        t = math.exp(s)
        return t * m + math.log1p(-laplace_complement(law, t))

    # bracket the maximizer: slope(t) = m lies where the objective turns over
    hi = math.log(ALPHA_MAX)
    while log_mgf_slope(law, math.exp(hi)) > m and hi < 700:
        hi += 2.0
    lo = hi - 2.0
    while log_mgf_slope(law, math.exp(lo)) < m:
        lo -= 2.0
        if lo < -690:
            return 0.0
    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12, "maxiter": 500})
    return max(0.0, -float(res.fun))


def variational_free_energy(law: ExcursionLaw, beta: float, delta: float) -> tuple[float, float]:
    """(beta f_a, argmax) from sup_{0 < d <= 1} (beta delta d - d I(1/d)).

    Independent of solve_alpha0: the outer sup is a bounded Brent search in
    log d, the inner rate function its own maximization.
    """
    bd = beta * delta
    if bd <= 0:
        return 0.0, 0.0

    def neg(s):
        d = math.exp(s)
        return -(bd * d - d * rate_function(law, 1.0 / d))

    # concave in d and vanishing as d -> 0: walk down in half-decades past the peak
    ss, vs = [0.0], [neg(0.0)]
    while ss[-1] > -90.0:
        ss.append(ss[-1] - 0.5)
        vs.append(neg(ss[-1]))
        if vs[-1] > vs[-2]:
            break
    j = min(range(len(vs)), key=vs.__getitem__)
    lo, hi = ss[min(j + 1, len(ss) - 1)], ss[max(j - 1, 0)]
    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-11, "maxiter": 500})
    return -float(res.fun), math.exp(float(res.x))


def crossover_delta0(law: ExcursionLaw, beta: float) -> CrossoverScale:
    """Delta0(beta): root of G(D) = beta delta*(D) / (2 D) = 1."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if law.finite_mean:
        raise NoRoot("finite-mean law: first-order regime, crossover root not used")

    def log_g(s):
        d = math.exp(s)
        return math.log(beta * contact_fraction(law, solve_alpha0(law, beta * d)) / (2 * d))

    hi = math.log(beta)  # delta* <= 1 puts G < 1 here
    while log_g(hi) > 0:
        hi += math.log(2.0)
    lo = hi
    while log_g(lo) < 0:
        lo -= math.log(2.0)
        if beta * math.exp(lo) < 1e-14:
            raise NoRoot(f"G stays below 1 down to beta*Delta = 1e-14 (beta = {beta})")
    s = optimize.brentq(log_g, lo, lo + math.log(2.0) if lo < hi else hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    d0 = math.exp(s)
    return CrossoverScale(beta, d0, math.exp(log_g(s)))


def conjugate_slow_var(phibar: Callable[[float], float], y: float, grid: tuple[float, float] = (1.0, 1e300)) -> float:
    """phibar*(y) = 1/phibar(x) where x phibar(x) = y, x on the grid range.

    Assumes x -> x phibar(x) is increasing on the grid.
    """
    x_lo, x_hi = grid
    f = lambda s: math.log(math.exp(s) * phibar(math.exp(s))) - math.log(y)
    a, b = math.log(x_lo), math.log(x_hi)
    fa, fb = f(a), f(b)
    if fa > 0 or fb < 0:
        raise OutOfRange(f"y = {y} outside [{x_lo * phibar(x_lo)}, {x_hi * phibar(x_hi)}]")
    if fa == 0:
        s = a
    elif fb == 0:
        s = b
    else:
        s = optimize.bisect(f, a, b, xtol=1e-14, rtol=1e-15, maxiter=2000)
    return 1.0 / phibar(math.exp(s))
