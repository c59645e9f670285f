"""Excursion-length laws p(n) = phi(n) / (Z n^c) and their transforms.

Tables are exact up to ``cap``; every functional that needs mass beyond the
cap sums it with a midpoint Euler-Maclaurin rule over a log-space quadrature,
so heavy tails (c close to 1) are handled without truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .errors import CapTooSmall, NonSummable

VARIANTS = ("constant", "log_power", "inverse_log")


@dataclass(frozen=True)
class SlowVariation:
    """Slowly varying correction phi(n).

    ``constant``: a.  ``log_power``: a * ln(e + n)**gamma.
    ``inverse_log``: a / ln(e + n).
    """

    variant: str = "constant"
    a: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown slow variation {self.variant!r}")
        if not self.a > 0:
            raise ValueError("phi amplitude must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == "constant":
            return np.full_like(x, self.a)
        ell = np.log(math.e + x)
        if self.variant == "log_power":
            return self.a * ell**self.gamma
        return self.a / ell

    def log(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == "constant":
            return np.full_like(x, math.log(self.a))
        ell = np.log(np.log(math.e + x))
        if self.variant == "log_power":
            return math.log(self.a) + self.gamma * ell
        return math.log(self.a) - ell

    def log_scalar(self, x: float) -> float:
        """log phi(x) for one float, without numpy overhead (quadrature inner loops)."""
        if self.variant == "constant":
            return math.log(self.a)
        ell = math.log(math.log(math.e + x))
        if self.variant == "log_power":
            return math.log(self.a) + self.gamma * ell
        return math.log(self.a) - ell

    @property
    def log_exponent(self) -> float:
        """Exponent g in phi ~ (ln n)^g."""
        return {"constant": 0.0, "log_power": self.gamma, "inverse_log": -1.0}[self.variant]

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "a": self.a}
        if self.variant == "log_power":
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SlowVariation":
        return cls(d.get("variant", "constant"), float(d.get("a", 1.0)), float(d.get("gamma", 0.0)))


@dataclass(frozen=True, eq=False)
class ExcursionLaw:
    c: float
    phi: SlowVariation
    cap: int
    norm: float
    log_pmf: np.ndarray  # index k = 0..cap, log_pmf[0] = -inf
    tail: np.ndarray  # P(E > n), n = 0..cap
    mbar: np.ndarray  # E[E; E <= n], n = 0..cap
    tail_tol: float
    cutoff: int  # direct summation extends to here, quadrature beyond
    mean: float = field(default=math.inf)

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)

    @property
    def log_tail(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.tail)

    @property
    def finite_mean(self) -> bool:
        return math.isfinite(self.mean)

    def weight(self, x):
        """Unnormalized weight phi(x) x^-c on real x."""
        return np.exp(self.log_weight(x))

    def log_weight(self, x):
        if isinstance(x, float):
            return self.phi.log_scalar(x) - self.c * math.log(x)
        x = np.asarray(x, dtype=float)
        return self.phi.log(x) - self.c * np.log(x)

    def require(self, n: int) -> None:
        if n > self.cap:
            raise CapTooSmall(f"length {n} exceeds tabulated cap {self.cap}")

    def config(self) -> dict:
        return {"c": self.c, "phi": self.phi.to_dict(), "cap": self.cap, "tail_tol": self.tail_tol}

    def beyond_cap(self, g: Callable, scale: float = 0.0, power: float | None = None) -> float:
        """Sum of g(k) p(k) over k > cap.

        ``scale`` is the decay rate of g (if any); it places a quadrature
        breakpoint at 1/scale.  ``power`` is q when g(x) ~ x^q at infinity
        and g does not decay exponentially.
        """
        total = 0.0
        if self.cutoff > self.cap:
            k = np.arange(self.cap + 1, self.cutoff + 1, dtype=float)
            total += float(np.sum((g(k) * self.weight(k))[::-1]))
        far = None
        if power is not None:
            far = lambda y: _log_power_remainder(self.c, self.phi, power, y)
        total += _em_tail(g, self.log_weight, self.cutoff + 0.5, scale, far)
        return total / self.norm

    def truncated_mean(self, x: float) -> float:
        """m-bar extended to real x by linear interpolation and, past the cap,
        by the same tail quadrature used for normalization."""
        if x <= self.cap:
            return float(np.interp(x, np.arange(self.cap + 1), self.mbar))
        extra = _quad_log_space(lambda s: s, self.log_weight, self.cap + 0.5, x + 0.5, 0.0)
        return float(self.mbar[-1] + extra / self.norm)

    @classmethod
    def from_config(cls, d: dict) -> "ExcursionLaw":
        return build_law(
            float(d["c"]),
            SlowVariation.from_dict(d.get("phi", {})),
            int(d.get("cap", 4096)),
            float(d.get("tail_tol", 1e-10)),
        )


@dataclass(frozen=True, eq=False)
class TiltedLaw:
    base: ExcursionLaw
    alpha: float
    R: int
    log_pmf: np.ndarray  # index 0..R, log_pmf[0] = -inf
    log_norm: float  # log E[e^{alpha E} | E <= R]

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)

    def mean(self) -> float:
        k = np.arange(self.R + 1)
        return float(np.sum(k * self.pmf))


# quadrature stops at x = e^690; the remainder is closed form in ln x
_Y_MAX = 690.0


def _log_power_remainder(law_c: float, phi: SlowVariation, power: float, y: float) -> float:
    """Integral over x > e^y of phi(x) x^(power - c), with ln(e + x) = ln x there."""
    a = law_c - 1.0 - power
    if a <= 0:
        return math.inf
    g = phi.log_exponent
    z = a * y
    if g == 0.0:
        val = math.exp(-z) / a
    else:
        val = float(mpmath.gammainc(g + 1.0, z)) * a ** (-g - 1.0)
    return phi.a * val


def _quad_log_space(f, logw, x0: float, x1: float, scale: float) -> float:
    """Integral of f(x) e^{logw(x)} over [x0, x1] in the variable y = ln x.

    The weight is folded into the exponent with the Jacobian so it cannot
    underflow while f x w(x) is still representable.  An infinite x1 stops
    at e^690.
    """
    g = lambda y: float(f(math.exp(y)) * math.exp(float(logw(math.exp(y))) + y))
    y0 = math.log(x0)
    y_end = math.log(x1) if math.isfinite(x1) else _Y_MAX
    cuts = [y0]
    if scale > 0:
        yb = -math.log(scale)
        for y in (yb, yb + 7.0):
            if cuts[-1] < y < y_end:
                cuts.append(y)
    cuts.append(y_end)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(g, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
        total += val
    return total


def _em_tail(f, logw, x0: float, scale: float = 0.0, far=None) -> float:
    """Sum of h(k) = f(k) e^{logw(k)} over integers k > x0 - 1/2 via the
    midpoint rule plus the first Euler-Maclaurin correction h'(x0)/24.

    ``far(y)`` integrates h over x > e^y when that piece is not negligible.
    """
    if scale > 0 and scale * x0 > 745.0:
        return 0.0
    integral = _quad_log_space(f, logw, x0, math.inf, scale)
    h = lambda x: f(x) * math.exp(float(logw(x)))
    if far is not None and x0 < math.exp(_Y_MAX):
        integral += far(_Y_MAX)
    step = 1e-4 * x0
    dh = (float(h(x0 + step)) - float(h(x0 - step))) / (2 * step)
    return integral + dh / 24.0


def _mean_is_finite(c: float, phi: SlowVariation) -> bool:
    if c > 2:
        return True
    if c < 2:
        return False
    return phi.log_exponent < -1.0


def build_law(c: float, phi: SlowVariation | None = None, cap: int = 4096, tail_tol: float = 1e-10) -> ExcursionLaw:
    """Tabulate the normalized law p(k) = phi(k) / (Z k^c) for k <= cap."""
    phi = phi or SlowVariation()
    if not c > 1:
        raise NonSummable(f"c = {c} gives a non-summable excursion law")
    if cap < 64:
        raise ValueError("cap must be at least 64")
    if not 0 < tail_tol <= 1e-6:
        raise ValueError("tail_tol must lie in (0, 1e-6]")

    k = np.arange(1, cap + 1, dtype=float)
    log_w = phi.log(k) - c * np.log(k)
    w = np.exp(log_w)
    head = float(np.sum(w[::-1]))

    logw = lambda x: phi.log(x) - c * np.log(np.asarray(x, dtype=float))
    weight = lambda x: np.exp(logw(x))
    one = lambda x: 1.0
    # grow the directly summed block until the next Euler-Maclaurin term is negligible
    cutoff = cap
    while True:
        x0 = cutoff + 0.5
        rest = 7.0 / 5760.0 * (c + 2.0) ** 3 * float(weight(x0)) / x0**3
        if rest <= tail_tol * head or cutoff >= 2**26:
            break
        cutoff *= 2
    extra = 0.0
    if cutoff > cap:
        kk = np.arange(cap + 1, cutoff + 1, dtype=float)
        extra = float(np.sum(weight(kk)[::-1]))
    beyond = extra + _em_tail(one, logw, cutoff + 0.5, far=lambda y: _log_power_remainder(c, phi, 0.0, y))
    norm = head + beyond

    log_pmf = np.empty(cap + 1)
    log_pmf[0] = -np.inf
    log_pmf[1:] = log_w - math.log(norm)
    pmf = np.exp(log_pmf[1:])

    # suffix accumulation: tail(n) = tail(cap) + sum_{n<k<=cap} p(k)
    tail = np.empty(cap + 1)
    tail[cap] = beyond / norm
    tail[:cap] = tail[cap] + np.cumsum(pmf[::-1])[::-1]
    tail[0] = 1.0

    mbar = np.zeros(cap + 1)
    mbar[1:] = np.cumsum(k * pmf)

    mean = math.inf
    if _mean_is_finite(c, phi):
        mean = float(mbar[-1])
        if cutoff > cap:
            kk = np.arange(cap + 1, cutoff + 1, dtype=float)
            mean += float(np.sum((kk * weight(kk))[::-1])) / norm
        far = lambda y: _log_power_remainder(c, phi, 1.0, y)
        mean += _em_tail(lambda x: x, logw, cutoff + 0.5, far=far) / norm

    return ExcursionLaw(c, phi, cap, norm, log_pmf, tail, mbar, tail_tol, cutoff, mean)


def two_point_law(a: float, cap: int = 64) -> ExcursionLaw:
    """Law with p(1) = a, p(2) = 1 - a; handy for hand-checkable cases."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    log_pmf = np.full(cap + 1, -np.inf)
    log_pmf[1], log_pmf[2] = math.log(a), math.log1p(-a)
    tail = np.zeros(cap + 1)
    tail[0], tail[1] = 1.0, 1.0 - a
    mbar = np.full(cap + 1, a + 2 * (1 - a))
    mbar[0], mbar[1] = 0.0, a
    # c = inf marks a finitely supported law; nothing lives beyond the cap
    return ExcursionLaw(math.inf, SlowVariation(), cap, 1.0, log_pmf, tail, mbar, 1e-12, cap, 2.0 - a)


def _has_tail(law: ExcursionLaw) -> bool:
    return math.isfinite(law.c)


def laplace(law: ExcursionLaw, t: float) -> float:
    """E[exp(-t E)]."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0
    return 1.0 - laplace_complement(law, t)


def laplace_complement(law: ExcursionLaw, t: float) -> float:
    """1 - E[exp(-t E)], computed without cancellation for small t."""
    if t <= 0:
        return 0.0
    k = np.arange(1, law.cap + 1, dtype=float)
    head = float(np.sum((-np.expm1(-t * k) * np.exp(law.log_pmf[1:]))[::-1]))
    if not _has_tail(law):
        return head
    return head + law.beyond_cap(lambda x: -np.expm1(-t * x))


def log_mgf_slope(law: ExcursionLaw, t: float) -> float:
    """E[E e^{-tE}] / E[e^{-tE}]; at t = 0 the mean, inf when it diverges."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return law.mean
    k = np.arange(1, law.cap + 1, dtype=float)
    damp = np.exp(-t * k + law.log_pmf[1:])
    num = float(np.sum((k * damp)[::-1]))
    den = float(np.sum(damp[::-1]))
    if _has_tail(law):
        num += law.beyond_cap(lambda x: x * np.exp(-t * x), scale=t)
        den += law.beyond_cap(lambda x: np.exp(-t * x), scale=t)
    return num / den


def tilt_truncate(law: ExcursionLaw, alpha: float, R: int) -> TiltedLaw:
    """The law nu(k) proportional to e^{alpha k} p(k) on 1 <= k <= R."""
    if not 1 <= R <= law.cap:
        raise CapTooSmall(f"truncation R = {R} must lie in [1, cap = {law.cap}]")
    k = np.arange(R + 1, dtype=float)
    lw = law.log_pmf[: R + 1] + alpha * k
    lse = float(logsumexp(lw[1:]))
    log_mass = float(logsumexp(law.log_pmf[1 : R + 1]))
    log_pmf = lw - lse
    log_pmf[0] = -np.inf
    return TiltedLaw(law, float(alpha), int(R), log_pmf, lse - log_mass)


def solve_chi(law: ExcursionLaw, alpha: float, R: int, beta: float) -> float:
    """chi with e^{beta chi} = E[e^{alpha E} | E <= R]."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    return tilt_truncate(law, alpha, R).log_norm / beta


def solve_tilt(law: ExcursionLaw, beta_chi: float, R: int) -> float:
    """Inverse of solve_chi: alpha > 0 with log E[e^{alpha E} | E <= R] = beta_chi.

    Since 1 <= E <= R under the truncated law, the root lies in
    [beta_chi / R, beta_chi].
    """
    if beta_chi <= 0:
        return 0.0
    if R == 1:
        return beta_chi
    f = lambda a: tilt_truncate(law, a, R).log_norm - beta_chi
    lo, hi = beta_chi / R, beta_chi
    if f(lo) >= 0:
        return lo
    if f(hi) <= 0:
        return hi
    return optimize.brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)


def renewal_hits(pmf: np.ndarray, n: int) -> np.ndarray:
    """u[t] = P(renewal with increments ~ pmf visits t), t = 0..n.

    ``pmf`` is indexed from 0 with pmf[0] = 0.
    """
    K = len(pmf) - 1
    u = np.zeros(n + 1)
    u[0] = 1.0
    rev = pmf[1:][::-1]  # rev[j] = pmf[K - j]
    for t in range(1, n + 1):
        m = min(t, K)
        u[t] = float(np.dot(rev[K - m :], u[t - m : t]))
    return u
