"""Command line entry point: ``pinning <subcommand> [--config FILE] ...``.

Every subcommand reads the same JSON document as a scan (see ScanSpec);
the single-run commands use the first beta, delta and N of its grids.
Explicit flags override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import annealed, oracle, pathkit, quenched, scan
from .errors import NoRoot


def _spec(args) -> scan.ScanSpec:
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    doc.setdefault("law", {"c": 1.8})
    doc.setdefault("betas", [1.0])
    doc.setdefault("deltas", [0.1])
    doc.setdefault("Ns", [1024])
    doc.setdefault("replicas", 2)
    if getattr(args, "c", None) is not None:
        doc["law"] = dict(doc["law"], c=args.c)
    if getattr(args, "beta", None) is not None:
        doc["betas"] = [args.beta]
    if getattr(args, "delta", None) is not None:
        doc["deltas"] = [args.delta]
        doc["delta_units"] = "absolute"
    if getattr(args, "N", None) is not None:
        doc["Ns"] = [args.N]
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.out is not None and args.command == "scan":
        doc["output"] = args.out
    return scan.ScanSpec.from_json(doc)


def _first_point(spec: scan.ScanSpec, law) -> tuple[float, float, int]:
    beta, dfac, N = spec.betas[0], spec.deltas[0], spec.Ns[0]
    if spec.delta_units == "delta0":
        dfac *= annealed.crossover_delta0(law, beta).delta0
    return beta, dfac, N


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2, default=float)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def cmd_annealed(args) -> int:
    spec = _spec(args)
    law = scan.law_for(spec)
    beta, delta, _ = _first_point(spec, law)
    rec = annealed.annealed_solution(law, beta, delta, spec.eps2).to_record()
    try:
        rec["delta0"] = annealed.crossover_delta0(law, beta).delta0
    except NoRoot as e:
        rec["delta0"] = None
        rec["delta0_note"] = str(e)
    _emit(rec, args.out)
    return 0


def cmd_quenched(args) -> int:
    spec = _spec(args)
    law = scan.law_for(spec)
    beta, delta, N = _first_point(spec, law)
    params = quenched.ModelParams(beta, delta, N, spec.excursion_cap)
    rec = quenched.run_replica(law, params, spec.master_seed, args.stream)
    rec["f_a"] = annealed.annealed_solution(law, beta, delta, spec.eps2).f_a
    rec["mode"] = params.mode()
    _emit(rec, args.out)
    return 0


def cmd_scan(args) -> int:
    spec = _spec(args)
    result = scan.run_scan(spec, threads=args.threads)
    bad = [p for p in result.points if p.error]
    print(f"{len(result.points)} points, {len(result.rows)} rows -> {spec.output}")
    for p in result.points:
        print(f"  beta={p.beta:g} delta={p.delta:.6g} N={p.N}: f_q={p.f_q_mean:.6g}+-{p.f_q_se:.2g} "
              f"C_q={p.contact_mean:.6g}+-{p.contact_se:.2g} f_a={p.f_a:.6g} delta*={p.delta_star:.6g}"
              + (f" ERROR {p.error}" if p.error else ""))
    if args.probe:
        report = scan.gap_probe(spec, result)
        probe_path = Path(spec.output).with_name(Path(spec.output).stem + ".probe.json")
        probe_path.write_text(json.dumps(report, indent=2) + "\n")
        print(f"gap probe ({report['label']}) -> {probe_path}")
    return 1 if bad else 0


def cmd_sample(args) -> int:
    spec = _spec(args)
    law = scan.law_for(spec)
    beta, delta, N = _first_point(spec, law)
    params = quenched.ModelParams(beta, delta, N, spec.excursion_cap)
    dis = quenched.sample_disorder(spec.master_seed, args.stream, N)
    tab = quenched.forward_recursion(law, params, dis)
    if args.R is not None:
        R = args.R
        config = pathkit.make_config(R, args.eps2, args.eps3, args.eps4)
    else:
        sol = annealed.annealed_solution(law, beta, delta, args.eps2)
        if not math.isfinite(sol.scale_R) or sol.scale_R > N:
            raise SystemExit(f"annealed scale R = {sol.scale_R:.4g} exceeds N = {N}; pass --R")
        config = pathkit.config_from_annealed(sol, args.eps3, args.eps4)
    rng = np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=(args.stream, 1)))
    paths = [pathkit.sample_path(tab, law, params, dis, rng, constrained=not args.free) for _ in range(args.paths)]
    stats = pathkit.skeleton_stats(paths, config)
    stats["config"] = {"R": config.R, "M": config.M, "eps2": config.eps2, "eps3": config.eps3, "eps4": config.eps4,
                       "block": config.block, "h1": config.h1, "delta2": config.delta2}
    stats["violations"] = sum(bool(pathkit.skeleton_violations(p, config)) for p in paths)
    if args.dump:
        with open(args.dump, "w") as f:
            for p in paths:
                sk = pathkit.lifted_skeleton(p, config)
                f.write(json.dumps({"path": p.to_json(), "lifted_skeleton": sk.to_json()}) + "\n")
    _emit(stats, args.out)
    return 0


def cmd_verify(args) -> int:
    rows = oracle.identity_suite(seed=args.seed or 0)
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['name']:<{width}}  err={r['error']:.2e}  tol={r['tol']:.0e}")
    failed = sum(not r["ok"] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} passed")
    return 1 if failed else 0


def cmd_plot_data(args) -> int:
    source = args.scan or _spec(args).output
    try:
        result = scan.result_from_files(source)
    except FileNotFoundError as e:
        raise SystemExit(f"no finished scan at {source}: {e.filename} missing")
    kinds = args.kinds.split(",") if args.kinds else list(scan.PLOT_KINDS)
    files = scan.emit_plot_data(result, [k for k in kinds if k], args.out or ".")
    for f in files:
        print(f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pinning", description="Quenched and annealed pinning model laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, point=True):
        p.add_argument("--config", help="JSON document mirroring ScanSpec")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", help="output file or directory")
        if point:
            p.add_argument("--c", type=float, help="excursion tail exponent")
            p.add_argument("--beta", type=float)
            p.add_argument("--delta", type=float, help="absolute Delta")
            p.add_argument("--N", type=int)
        return p

    common(sub.add_parser("annealed", help="print the annealed solution as JSON")).set_defaults(func=cmd_annealed)
    p = common(sub.add_parser("quenched", help="one disorder replica"))
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=cmd_quenched)
    p = common(sub.add_parser("scan", help="run a ScanSpec to CSV"))
    p.add_argument("--probe", action="store_true", help="also write the gap-probe report")
    p.set_defaults(func=cmd_scan)
    p = common(sub.add_parser("sample", help="sample paths and report skeleton statistics"))
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--R", type=int, help="skeleton scale (default: annealed R)")
    p.add_argument("--eps2", type=float, default=0.2)
    p.add_argument("--eps3", type=float, default=0.02)
    p.add_argument("--eps4", type=float, default=0.06)
    p.add_argument("--free", action="store_true", help="free endpoint")
    p.add_argument("--dump", help="write paths and lifted skeletons as JSON lines")
    p.set_defaults(func=cmd_sample)
    common(sub.add_parser("verify", help="run the exact identity suite"), point=False).set_defaults(func=cmd_verify)
    p = common(sub.add_parser("plot-data", help="gnuplot-ready files from a finished scan"))
    p.add_argument("--scan", help="row CSV of a finished scan (default: the config's output)")
    p.add_argument("--kinds", help=f"comma list from {','.join(scan.PLOT_KINDS)}")
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
