"""Path sampling and skeleton decompositions.

A skeleton is stored by its gaps: open intervals (a, b) of [0, N] left by
excursions strictly longer than R.  Occupied segments are the closed
intervals between gaps, [b_{i-1}, a_i] with b_0 = 0 and a_{m+1} = N.
Segment length is a_i - b_{i-1}; its site count is one more.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BlockMisaligned
from .quenched import site_potential


@dataclass(frozen=True)
class ReturnPath:
    zeros: tuple[int, ...]
    N: int
    endpoint_constrained: bool = True

    def __post_init__(self):
        z = self.zeros
        if not z or z[0] != 0:
            raise ValueError("path must start at a return to 0")
        if any(b <= a for a, b in zip(z, z[1:])) or z[-1] > self.N:
            raise ValueError("return times must be strictly increasing within [0, N]")
        if self.endpoint_constrained and z[-1] != self.N:
            raise ValueError("constrained path must return at N")

    @property
    def local_time(self) -> int:
        return len(self.zeros)

    def excursions(self) -> list[tuple[int, int]]:
        """(start, end) of each excursion; a free path's unfinished last one ends at N."""
        z = list(self.zeros)
        out = list(zip(z, z[1:]))
        if z[-1] < self.N:
            out.append((z[-1], self.N))
        return out

    def to_json(self) -> dict:
        return {"N": self.N, "zeros": list(self.zeros)}

    @classmethod
    def from_json(cls, d: dict) -> "ReturnPath":
        zeros = tuple(int(z) for z in d["zeros"])
        return cls(zeros, int(d["N"]), zeros[-1] == int(d["N"]))


@dataclass(frozen=True)
class Skeleton:
    N: int
    R: float
    gaps: tuple[tuple[int, int], ...]
    clamped: bool = False  # semi-CG extension hit a gap end

    @property
    def m(self) -> int:
        return len(self.gaps)

    @property
    def segments(self) -> list[tuple[int, int]]:
        starts = [0] + [b for _, b in self.gaps]
        ends = [a for a, _ in self.gaps] + [self.N]
        return list(zip(starts, ends))

    @property
    def size(self) -> int:
        """|J|: number of sites."""
        return sum(e - s + 1 for s, e in self.segments)

    def contains(self, n: int) -> bool:
        return not any(a < n < b for a, b in self.gaps)

    def local_time(self, path: ReturnPath) -> int:
        return sum(1 for z in path.zeros if self.contains(z))

    def contact_fraction(self, path: ReturnPath) -> float:
        return self.local_time(path) / self.size

    def covers(self, other: "Skeleton") -> bool:
        """Every site of ``other`` lies in self."""
        for s, e in other.segments:
            for a, b in self.gaps:
                if max(s, a + 1) <= min(e, b - 1):
                    return False
        return True

    def to_json(self) -> dict:
        return {"N": self.N, "R": self.R, "gaps": [list(g) for g in self.gaps]}

    @classmethod
    def from_json(cls, d: dict) -> "Skeleton":
        return cls(int(d["N"]), d["R"], tuple((int(a), int(b)) for a, b in d["gaps"]))


@dataclass(frozen=True)
class SkeletonConfig:
    """Scales for skeleton coarse graining.

    eps3 and eps4 are snapped so that eps3 * R is an integer block and
    (1 + eps4)^l1 = R for an integer l1; the requested values are kept.
    """

    R: int
    eps2: float
    eps3: float
    eps4: float
    l1: int
    l0: int
    delta2: float | None = None
    eps3_requested: float = math.nan
    eps4_requested: float = math.nan
    upper_levels: tuple[float, ...] = field(default=(), repr=False)

    @property
    def M(self) -> float:
        return self.eps2 * self.R

    @property
    def block(self) -> int:
        return int(round(self.eps3 * self.R))

    @property
    def h1(self) -> float:
        return 4 * self.eps3 / self.eps2

    def level(self, k: int) -> float:
        """Right end of I_k (I_{l0} is [0, level(l0)])."""
        if k <= self.l1:
            return self.R ** (k / self.l1)
        return self.R + (k - self.l1) * self.eps4 * self.R

    def interval(self, k: int) -> tuple[float, float, bool]:
        """(left, right, left_closed) of I_k."""
        if k < self.l0:
            raise ValueError(f"intervals start at l0 = {self.l0}")
        if k == self.l0:
            return 0.0, self.level(k), True
        return self.level(k - 1), self.level(k), False

    def interval_integers(self, k: int) -> tuple[int, int]:
        """(n_k^-, n_k^+); empty intervals give n^- > n^+."""
        left, right, closed = self.interval(k)
        lo = math.ceil(left) if closed else math.floor(left) + 1
        return lo, math.floor(right + 1e-9 * max(1.0, right))

    def snap_points(self, limit: int) -> list[int]:
        """Sorted distinct n_k^+ (k >= l0) up to the first one >= limit."""
        out = []
        k = self.l0
        while True:
            lo, hi = self.interval_integers(k)
            if lo <= hi and (not out or hi > out[-1]):
                out.append(hi)
                if hi >= limit:
                    return out
            k += 1


def make_config(R: int, eps2: float = 0.1, eps3: float = 0.02, eps4: float = 0.05, delta2: float | None = None) -> SkeletonConfig:
    if R < 2:
        raise ValueError("R must be at least 2")
    if not 0 < eps2 < 0.5:
        raise ValueError("eps2 must lie in (0, 1/2)")
    block = max(1, int(round(eps3 * R)))
    e3 = block / R
    if 4 * e3 / eps2 >= 0.5:
        raise ValueError(f"h1 = 4 eps3 / eps2 = {4 * e3 / eps2:.3f} must be < 1/2")
    l1 = max(1, int(round(math.log(R) / math.log1p(eps4))))
    e4 = R ** (1.0 / l1) - 1.0
    M = eps2 * R
    # l0 = max{k : (1 + eps4)^k < M / 4}
    l0 = math.ceil(math.log(M / 4) / math.log1p(e4)) - 1
    while (1 + e4) ** (l0 + 1) < M / 4:
        l0 += 1
    while (1 + e4) ** l0 >= M / 4:
        l0 -= 1
    return SkeletonConfig(R, eps2, e3, e4, l1, l0, delta2, eps3, eps4)


def config_from_annealed(sol, eps3: float = 0.02, eps4: float = 0.05) -> SkeletonConfig:
    """Config at the annealed scale R(Delta), with delta2 = eps2 delta*."""
    return make_config(int(round(sol.scale_R)), sol.eps2, eps3, eps4, sol.delta2)


def sample_path(tables, law, params, disorder=None, rng=None, constrained: bool = True) -> ReturnPath:
    """Exact draw from the quenched polymer measure by backward sampling."""
    rng = np.random.default_rng() if rng is None else rng
    N = params.N
    logp = np.ascontiguousarray(law.log_pmf[: N + 1])
    logtail = np.ascontiguousarray(law.log_tail[: N + 1])
    if disorder is not None:
        pot = site_potential(params, disorder)
    elif tables.pot is not None:
        pot = tables.pot
    else:
        raise ValueError("need disorder or tables built with their potential")
    u = rng.random(N + 2)
    z = _kernels.sample_zeros(logp, tables.logZ0, np.ascontiguousarray(pot, dtype=float), logtail, N, params.K, constrained, u)
    return ReturnPath(tuple(int(x) for x in z), N, constrained)


def skeleton(path: ReturnPath, R: float) -> Skeleton:
    """Gaps are the excursions strictly longer than R."""
    if R < 1:
        raise ValueError("R must be at least 1")
    gaps = tuple((a, b) for a, b in path.excursions() if b - a > R)
    return Skeleton(path.N, R, gaps)


def lift(skel: Skeleton, M: float) -> Skeleton:
    """Delete central segments of length <= M by merging them into the neighbouring gaps."""
    if skel.m < 2:
        return skel
    gaps = list(skel.gaps)
    out = [gaps[0]]
    for nxt in gaps[1:]:
        a_prev, b_prev = out[-1]
        seg_len = nxt[0] - b_prev
        if seg_len <= M:
            out[-1] = (a_prev, nxt[1])
        else:
            out.append(nxt)
    return Skeleton(skel.N, skel.R, tuple(out), skel.clamped)


def cg_skeleton(skel: Skeleton, block: int) -> Skeleton:
    """Shrink every gap to block-aligned end points (union of blocks meeting J)."""
    if block < 1:
        raise ValueError("block must be positive")
    if skel.N % block:
        raise BlockMisaligned(f"N = {skel.N} is not a multiple of the block size {block}")
    gaps = []
    for a, b in skel.gaps:
        a2 = -(-a // block) * block
        b2 = (b // block) * block
        if a2 < b2:
            gaps.append((a2, b2))
    return Skeleton(skel.N, skel.R, tuple(gaps), skel.clamped)


def semi_cg_skeleton(skel: Skeleton, config: SkeletonConfig) -> Skeleton:
    """Extend each segment before a gap to the smallest admissible length n_k^+.

    An extension that would swallow its gap is clamped to leave one open
    site, and the result is flagged.
    """
    points = config.snap_points(skel.N)
    gaps = []
    clamped = skel.clamped
    start = 0
    for a, b in skel.gaps:
        j = bisect.bisect_left(points, a - start)
        a_s = start + points[j]
        if a_s >= b:
            a_s, clamped = b - 1, True
        gaps.append((a_s, b))
        start = b
    return Skeleton(skel.N, skel.R, tuple(gaps), clamped)


def lifted_skeleton(path: ReturnPath, config: SkeletonConfig) -> Skeleton:
    return lift(skeleton(path, config.R), config.M)


def classify(path: ReturnPath, config: SkeletonConfig) -> tuple[str, float]:
    """("dense" | "sparse", D) with D the contact fraction in the lifted skeleton."""
    if config.delta2 is None:
        raise ValueError("config.delta2 is required for classification")
    lifted = lifted_skeleton(path, config)
    D = lifted.contact_fraction(path)
    return ("sparse" if D <= config.delta2 else "dense"), D


def skeleton_stats(paths, config: SkeletonConfig) -> dict:
    """Segment-length histogram and lifted contact fractions over a batch of paths."""
    seg_lengths, fractions, labels = [], [], []
    for p in paths:
        lifted = lifted_skeleton(p, config)
        seg_lengths.extend(e - s for s, e in lifted.segments)
        fractions.append(lifted.contact_fraction(p))
        if config.delta2 is not None:
            labels.append(fractions[-1] > config.delta2)
    edges = np.unique(np.concatenate([[0], np.geomspace(1, max(2, max(seg_lengths, default=1) + 1), 20).astype(int)]))
    hist, _ = np.histogram(seg_lengths, bins=edges)
    out = {
        "paths": len(fractions),
        "segment_length_edges": edges.tolist(),
        "segment_length_counts": hist.tolist(),
        "D_mean": float(np.mean(fractions)) if fractions else math.nan,
        "D_quantiles": np.quantile(fractions, [0.1, 0.5, 0.9]).tolist() if fractions else [],
    }
    if labels:
        out["dense_fraction"] = float(np.mean(labels))
    return out


def tiles(skel: Skeleton) -> bool:
    """Segments and gaps interleave and cover [0, N] with no overlap."""
    pieces = []
    for (s, e), g in zip(skel.segments, list(skel.gaps) + [None]):
        pieces.append((s, e))
        if g is not None:
            pieces.append(g)
    if pieces[0][0] != 0 or pieces[-1][1] != skel.N:
        return False
    return all(lo <= hi for lo, hi in pieces) and all(p[1] == q[0] for p, q in zip(pieces, pieces[1:]))


def skeleton_violations(path: ReturnPath, config: SkeletonConfig) -> list[str]:
    """Names of the structural invariants the path's skeletons break (empty if none)."""
    R, bad = config.R, []
    sk = skeleton(path, R)
    if not tiles(sk) or any(b - a <= R for a, b in sk.gaps):
        bad.append("tiling")
    lf = lift(sk, config.M)
    if lift(lf, config.M) != lf or lf.size > sk.size or not tiles(lf):
        bad.append("lift")
    if path.N % config.block == 0:
        cg = cg_skeleton(lf, config.block)
        if any(b - a < (1 - 2 * config.eps3) * R for a, b in cg.gaps) or not cg.covers(lf):
            bad.append("cg_gap")
        if lf.m >= 2 and not lf.size <= cg.size <= (1 + config.h1) * lf.size:
            bad.append("cg_size_ratio")
    sc = semi_cg_skeleton(sk, config)
    if any(b - a < (1 - config.eps4) * R for a, b in sc.gaps) or not sc.covers(sk) or not tiles(sc):
        bad.append("semi_cg_gap")
    return bad
