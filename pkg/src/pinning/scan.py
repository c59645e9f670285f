"""Parameter sweeps over (beta, Delta, N, replica), with CSV/JSON persistence.

Files written by run_scan for an output path ``out.csv``:

``out.csv``
    one row per replica, appended and flushed as each finishes:
    point, replica, seed, stream_id, beta, delta, N, log_Z0_N, f_q_hat,
    contact_mean, error.  ``f_q_hat`` is log Z0_N / (beta N) for the
    constrained chain; ``contact_mean`` is the mean over n = 0..N of the
    free-measure contact profile; ``error`` is empty unless the replica failed.
``out.summary.csv``
    one row per grid point: point, beta, delta, delta_over_delta0, N,
    replicas, f_q_mean, f_q_se, contact_mean, contact_se, f_a, delta_star,
    delta0, jensen_ok, linear_ok, error.
``out.json``
    sidecar with the spec, the law config, the mode and the seeding rule.

Replica r of grid point i draws its disorder from
PCG64(SeedSequence(master_seed, spawn_key=((i << 32) | r,))), so every row
is reproducible from (master_seed, i, r) alone.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .annealed import annealed_solution, crossover_delta0
from .errors import NoRoot
from .excursion import ExcursionLaw, build_law, SlowVariation
from .quenched import ModelParams, run_replica, standard_error

ROW_FIELDS = ["point", "replica", "seed", "stream_id", "beta", "delta", "N", "log_Z0_N", "f_q_hat", "contact_mean", "error"]
SUMMARY_FIELDS = [
    "point", "beta", "delta", "delta_over_delta0", "N", "replicas",
    "f_q_mean", "f_q_se", "contact_mean", "contact_se",
    "f_a", "delta_star", "delta0", "jensen_ok", "linear_ok", "error",
]
PLOT_KINDS = ("free_energy_vs_delta", "contact_ratio_vs_delta_over_delta0", "delta0_vs_beta")


def stream_id(point: int, replica: int) -> int:
    return (int(point) << 32) | int(replica)


@dataclass(frozen=True)
class ScanSpec:
    law: dict
    betas: tuple[float, ...]
    deltas: tuple[float, ...]
    Ns: tuple[int, ...]
    replicas: int = 2
    master_seed: int = 0
    delta_units: str = "absolute"  # or "delta0": deltas are multiples of Delta0(beta)
    excursion_cap: int | None = None  # None: exact recursion
    output: str = "scan.csv"
    eps2: float = 0.1

    def __post_init__(self):
        if not self.betas or not self.deltas or not self.Ns:
            raise ValueError("beta, delta and N grids must be nonempty")
        if self.replicas < 2:
            raise ValueError("need at least 2 replicas for a standard error")
        if self.delta_units not in ("absolute", "delta0"):
            raise ValueError(f"delta_units must be 'absolute' or 'delta0', got {self.delta_units!r}")
        if any(b <= 0 for b in self.betas):
            raise ValueError("betas must be positive")
        if any(n < 1 for n in self.Ns):
            raise ValueError("N values must be positive")

    @property
    def mode(self) -> str:
        return "exact" if self.excursion_cap is None else f"capped:{self.excursion_cap}"

    @property
    def points(self) -> list[tuple[int, float, float, int]]:
        """(index, beta, delta factor, N) in row-major order beta, delta, N."""
        out = []
        for b in self.betas:
            for d in self.deltas:
                for n in self.Ns:
                    out.append((len(out), b, d, n))
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("betas", "deltas", "Ns"):
            d[k] = list(d[k])
        d["mode"] = "exact" if self.excursion_cap is None else {"capped": self.excursion_cap}
        del d["excursion_cap"]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ScanSpec":
        d = dict(d)
        mode = d.pop("mode", "exact")
        if isinstance(mode, dict):
            cap = int(mode["capped"])
        elif mode == "exact":
            cap = None
        elif isinstance(mode, str) and mode.startswith("capped:"):
            cap = int(mode.split(":", 1)[1])
        else:
            raise ValueError(f"unknown mode {mode!r}")
        d["excursion_cap"] = d.get("excursion_cap", cap)
        for k in ("betas", "deltas"):
            d[k] = tuple(float(x) for x in d[k])
        d["Ns"] = tuple(int(x) for x in d["Ns"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ScanSpec":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass
class PointSummary:
    point: int
    beta: float
    delta: float
    delta_over_delta0: float
    N: int
    replicas: int
    f_q_mean: float
    f_q_se: float
    contact_mean: float
    contact_se: float
    f_a: float
    delta_star: float
    delta0: float
    stream_ids: list[int] = field(default_factory=list, repr=False)
    error: str = ""

    @property
    def jensen_ok(self) -> bool:
        return bool(self.f_q_mean <= self.f_a + 3 * self.f_q_se)

    @property
    def linear_ok(self) -> bool:
        return bool(self.contact_mean <= 2 * self.delta / self.beta + 3 * self.contact_se)

    @property
    def contact_ratio(self) -> tuple[float, float]:
        """C_q / C_a and its standard error (C_a is exact)."""
        if not self.delta_star > 0:
            return math.nan, math.nan
        return self.contact_mean / self.delta_star, self.contact_se / self.delta_star

    def to_row(self) -> dict:
        d = {k: getattr(self, k) for k in SUMMARY_FIELDS if k not in ("jensen_ok", "linear_ok")}
        d["jensen_ok"] = int(self.jensen_ok)
        d["linear_ok"] = int(self.linear_ok)
        return d


@dataclass
class ScanResult:
    spec: ScanSpec
    points: list[PointSummary]
    rows: list[dict]

    def __len__(self):
        return len(self.points)


def law_for(spec: ScanSpec) -> ExcursionLaw:
    """Build the spec's law with a cap at least the largest N."""
    cfg = dict(spec.law)
    phi = cfg.get("phi")
    cap = max(int(cfg.get("cap", 4096)), max(spec.Ns))
    return build_law(float(cfg["c"]), SlowVariation.from_dict(phi) if phi else None, cap, float(cfg.get("tail_tol", 1e-10)))


def _delta0_table(law, betas) -> dict[float, float | str]:
    out = {}
    for b in betas:
        try:
            out[b] = crossover_delta0(law, b).delta0
        except NoRoot as e:
            out[b] = f"NoRoot: {e}"
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _open_csv(path: Path, fields):
    f = open(path, "w", newline="")
    w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    f.flush()
    return f, w


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def run_scan(spec: ScanSpec, threads: int = 1, law: ExcursionLaw | None = None, write: bool = True) -> ScanResult:
    """Run every (grid point, replica) unit and aggregate per point.

    Units go through a thread pool (the kernels release the GIL) and are
    collected in submission order, so rows and results do not depend on
    the thread count.  A failing unit records its error and the scan goes on.
    """
    law = law_for(spec) if law is None else law
    d0 = _delta0_table(law, spec.betas)  # also reported for absolute grids
    out_path = Path(spec.output)

    units, meta = [], {}
    for i, beta, dfac, N in spec.points:
        d0b = d0.get(beta)
        if spec.delta_units == "delta0":
            delta = dfac * d0b if isinstance(d0b, float) else math.nan
        else:
            delta = dfac
        meta[i] = (beta, delta, N, d0b, dfac)
        for r in range(spec.replicas):
            units.append((i, r))

    def work(unit):
        i, r = unit
        beta, delta, N, d0b, _ = meta[i]
        sid = stream_id(i, r)
        row = {"point": i, "replica": r, "seed": spec.master_seed, "stream_id": sid, "beta": beta, "delta": delta, "N": N}
        try:
            if isinstance(d0b, str) and spec.delta_units == "delta0":
                raise NoRoot(d0b)
            params = ModelParams(beta, delta, N, spec.excursion_cap)
            row.update(run_replica(law, params, spec.master_seed, sid))
            row["error"] = ""
        except Exception as e:  # recorded in-row, scan continues
            row.update({"log_Z0_N": math.nan, "f_q_hat": math.nan, "contact_mean": math.nan, "error": f"{type(e).__name__}: {e}"})
        return row

    rows = []
    f = w = None
    if write:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        f, w = _open_csv(out_path, ROW_FIELDS)
    try:
        with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
            for row in pool.map(work, units):
                rows.append(row)
                if w is not None:
                    w.writerow({k: _fmt(row[k]) for k in ROW_FIELDS})
                    f.flush()
                    os.fsync(f.fileno())
    finally:
        if f is not None:
            f.close()

    points = [_summarize(law, spec, i, meta[i], [r for r in rows if r["point"] == i]) for i, *_ in spec.points]
    result = ScanResult(spec, points, rows)
    if write:
        _write_summary(result, _sibling(out_path, ".summary.csv"))
        _write_sidecar(result, law, _sibling(out_path, ".json"))
    return result


def _summarize(law, spec, i, meta, rows) -> PointSummary:
    beta, delta, N, d0b, dfac = meta
    ok = [r for r in rows if not r["error"]]
    errors = sorted({r["error"] for r in rows if r["error"]})
    fq = [r["f_q_hat"] for r in ok]
    cm = [r["contact_mean"] for r in ok]
    delta0 = d0b if isinstance(d0b, float) else math.nan
    f_a = dstar = math.nan
    if not math.isnan(delta):
        try:
            sol = annealed_solution(law, beta, delta, spec.eps2)
            f_a, dstar = sol.f_a, sol.delta_star
        except Exception as e:
            errors.append(f"{type(e).__name__}: {e}")
    return PointSummary(
        point=i,
        beta=beta,
        delta=delta,
        delta_over_delta0=dfac if spec.delta_units == "delta0" else (delta / delta0 if delta0 == delta0 else math.nan),
        N=N,
        replicas=len(ok),
        f_q_mean=float(np.mean(fq)) if fq else math.nan,
        f_q_se=standard_error(fq),
        contact_mean=float(np.mean(cm)) if cm else math.nan,
        contact_se=standard_error(cm),
        f_a=f_a,
        delta_star=dstar,
        delta0=delta0,
        stream_ids=[r["stream_id"] for r in rows],
        error="; ".join(errors),
    )


def _write_summary(result: ScanResult, path: Path) -> None:
    f, w = _open_csv(path, SUMMARY_FIELDS)
    with f:
        for p in result.points:
            w.writerow({k: _fmt(v) for k, v in p.to_row().items()})


def _write_sidecar(result: ScanResult, law: ExcursionLaw, path: Path) -> None:
    doc = {
        "spec": result.spec.to_json(),
        "law": law.config(),
        "mode": result.spec.mode,
        "seeding": "PCG64(SeedSequence(master_seed, spawn_key=((point << 32) | replica,)))",
        "row_fields": ROW_FIELDS,
        "summary_fields": SUMMARY_FIELDS,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def read_rows(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def gap_probe(spec: ScanSpec, result: ScanResult | None = None, threads: int = 1) -> dict:
    """Per (beta, N): the curve Delta/Delta0 -> (C_q, C_a) and where C_q/C_a crosses 1/2.

    This is a finite-size diagnostic.  The crossover is reported as the
    Delta/Delta0 interval between the last grid point with ratio below 1/2
    and the next one, never as a single critical value.
    """
    result = run_scan(spec, threads) if result is None else result
    curves = []
    for beta in spec.betas:
        for N in spec.Ns:
            pts = sorted((p for p in result.points if p.beta == beta and p.N == N), key=lambda p: p.delta)
            if not pts or not all(p.delta0 == p.delta0 for p in pts):
                curves.append({"beta": beta, "N": N, "skipped": "Delta0 undefined (NoRoot)"})
                continue
            rows = []
            for p in pts:
                ratio, se = p.contact_ratio
                rows.append({
                    "delta_over_delta0": p.delta_over_delta0,
                    "C_q": p.contact_mean,
                    "C_q_se": p.contact_se,
                    "C_a": p.delta_star,
                    "ratio": ratio,
                    "ratio_se": se,
                    "linear_bound_ok": p.linear_ok,
                    "jensen_ok": p.jensen_ok,
                })
            crossover = None
            for a, b in zip(rows, rows[1:]):
                if a["ratio"] < 0.5 <= b["ratio"]:
                    crossover = [a["delta_over_delta0"], b["delta_over_delta0"]]
            lo, hi = rows[0], rows[-1]
            gap = hi["ratio"] - lo["ratio"]
            comb = math.hypot(lo["ratio_se"], hi["ratio_se"])
            curves.append({
                "beta": beta,
                "N": N,
                "delta0": pts[0].delta0,
                "points": rows,
                "crossover_interval": crossover,
                "ratio_rise": gap,
                "ratio_rise_combined_se": comb,
                "direction_ok": bool(gap >= 3 * comb),
            })
    return {
        "label": "finite-size diagnostic; not an estimate of the infinite-volume quenched critical point",
        "law": dict(spec.law),
        "curves": curves,
    }


def _write_blocks(stem: Path, kind: str, blocks: list[dict]) -> list[Path]:
    """Blocks separated by two blank lines (gnuplot ``index``), plus a JSON mirror."""
    dat, js = stem.with_suffix(".dat"), stem.with_suffix(".json")
    lines = [f"# {kind}"]
    for j, blk in enumerate(blocks):
        if j:
            lines += ["", ""]
        lines.append(f"# {blk['label']}")
        lines.append("# " + " ".join(blk["columns"]))
        lines += [" ".join(repr(float(v)) for v in row) for row in blk["rows"]]
    dat.write_text("\n".join(lines) + "\n")
    js.write_text(json.dumps({"kind": kind, "blocks": blocks}, indent=2) + "\n")
    return [dat, js]


def plot_blocks(result: ScanResult, kind: str, law: ExcursionLaw | None = None) -> list[dict]:
    spec = result.spec
    blocks = []
    if kind == "free_energy_vs_delta":
        for beta in spec.betas:
            for N in spec.Ns:
                pts = sorted((p for p in result.points if p.beta == beta and p.N == N and p.replicas), key=lambda p: p.delta)
                blocks.append({"label": f"quenched beta={beta!r} N={N}", "columns": ["delta", "f_q", "f_q_se"],
                               "rows": [[p.delta, p.f_q_mean, p.f_q_se] for p in pts]})
                blocks.append({"label": f"annealed beta={beta!r}", "columns": ["delta", "f_a"],
                               "rows": [[p.delta, p.f_a] for p in pts]})
    elif kind == "contact_ratio_vs_delta_over_delta0":
        for beta in spec.betas:
            for N in spec.Ns:
                pts = sorted((p for p in result.points if p.beta == beta and p.N == N and p.delta0 == p.delta0 and p.replicas), key=lambda p: p.delta)
                blocks.append({"label": f"beta={beta!r} N={N}", "columns": ["delta_over_delta0", "ratio", "ratio_se"],
                               "rows": [[p.delta_over_delta0, *p.contact_ratio] for p in pts]})
    elif kind == "delta0_vs_beta":
        law = law_for(spec) if law is None else law
        rows = []
        for beta in sorted(set(spec.betas)):
            d0 = next((p.delta0 for p in result.points if p.beta == beta), math.nan)
            if d0 != d0:
                try:
                    d0 = crossover_delta0(law, beta).delta0
                except NoRoot:
                    continue
            rows.append([beta, d0])
        blocks.append({"label": f"c={spec.law.get('c')!r}", "columns": ["beta", "delta0"], "rows": rows})
    else:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    return blocks


def emit_plot_data(result: ScanResult, kinds, outdir, law: ExcursionLaw | None = None) -> list[Path]:
    """Write <outdir>/<kind>.dat and <kind>.json for each requested kind."""
    kinds = list(kinds)
    if not kinds:
        return []
    if not result.points:
        raise ValueError("empty scan result")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for kind in kinds:
        files += _write_blocks(outdir / kind, kind, plot_blocks(result, kind, law))
    return files


def read_plot_data(path) -> list[np.ndarray]:
    """Parse a .dat file back into one array per block."""
    blocks, cur = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            continue
        if not line.strip():
            if cur:
                blocks.append(np.array(cur))
                cur = []
            continue
        cur.append([float(x) for x in line.split()])
    if cur:
        blocks.append(np.array(cur))
    return blocks


def result_from_files(output) -> ScanResult:
    """Rebuild a ScanResult from the files run_scan wrote."""
    out = Path(output)
    doc = json.loads(_sibling(out, ".json").read_text())
    spec = ScanSpec.from_json(doc["spec"])
    rows = read_rows(out)
    points = []
    for r in read_rows(_sibling(out, ".summary.csv")):
        i = int(r["point"])
        points.append(PointSummary(
            point=i, beta=float(r["beta"]), delta=float(r["delta"]), delta_over_delta0=float(r["delta_over_delta0"]),
            N=int(r["N"]), replicas=int(r["replicas"]), f_q_mean=float(r["f_q_mean"]), f_q_se=float(r["f_q_se"]),
            contact_mean=float(r["contact_mean"]), contact_se=float(r["contact_se"]), f_a=float(r["f_a"]),
            delta_star=float(r["delta_star"]), delta0=float(r["delta0"]),
            stream_ids=[int(x["stream_id"]) for x in rows if int(x["point"]) == i], error=r["error"],
        ))
    return ScanResult(spec, points, rows)
