"""Command line front end: synth, compare, bench, gen, validate-lib.

Exit codes: 0 success, 1 input error, 2 no feasible decomposition.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from typing import Optional, Sequence

from .decomposer import (
    COST_MODES,
    Constraints,
    Decomposition,
    Infeasible,
    check_constraints,
    decompose,
    format_listing,
)
from .energy import CALIBRATED, EnergyModel
from .graph import Acg, AcgError, parse_acg, serialize_acg
from .library import Library, LibraryError, builtin_library, load_library, validate_library
from .simulator import CSV_HEADER, SWITCHING, SimConfig, Traffic, mesh_baseline, simulate
from .synthesizer import (
    ArchError,
    architecture_stats,
    build_routing_tables,
    glue,
    write_architecture,
    write_routes,
)
from .workloads import aes_acg, bench_instance, planted_workload, random_acg, traffic_from_acg

log = logging.getLogger("nocsynth")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2
BLOCK_BITS = 128


class InputError(Exception):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read_acg(path: Optional[str]) -> tuple[Acg, str]:
    if not path:
        raise InputError("an ACG file is required (positional or --acg)")
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_acg(raw.decode()), _sha256(raw)
    except (AcgError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _energy(args) -> EnergyModel:
    try:
        em = EnergyModel.parse(args.energy)
        if args.lam is not None:
            em = replace(em, remainder_penalty=args.lam)
        return em
    except ValueError as exc:
        raise InputError(f"energy model: {exc}") from None


def _library(args) -> Library:
    try:
        return load_library(args.library)
    except OSError as exc:
        raise InputError(f"cannot read library {args.library}: {exc.strerror}") from None
    except LibraryError as exc:
        raise InputError(f"library: {exc}") from None


def _constraints(args) -> Constraints:
    try:
        return Constraints(args.max_link_bw, args.max_bisection)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write(path: str, text: str) -> str:
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _synthesize(args, g: Acg, digest: str):
    lib = _library(args)
    em = _energy(args)
    c = _constraints(args)
    t0 = time.perf_counter()
    d = decompose(g, lib, em, c, timeout=args.timeout_iso, mode=args.cost_mode, workers=args.workers)
    t1 = time.perf_counter()
    arch = glue(d, g, lib, em)
    tables = build_routing_tables(arch, d, g, lib)
    stats = architecture_stats(arch, tables, g)
    t2 = time.perf_counter()
    out = _out_dir(args.out_dir)
    listing = format_listing(d, lib)
    files = {
        "decomposition": _write(os.path.join(out, "decomposition.txt"), listing),
        "architecture": _write(os.path.join(out, "architecture.arch"), write_architecture(arch, tables)),
        "routes": _write(os.path.join(out, "routes.txt"), write_routes(tables)),
    }
    report = {
        "input_digest": digest,
        "library_digest": lib.digest(),
        "energy_model": em.describe(),
        "cost_mode": args.cost_mode,
        "cost": d.cost,
        "truncated": d.truncated,
        "listing": listing,
        "constraints": {
            "max_link_bandwidth": _finite(c.max_link_bandwidth),
            "max_bisection_bandwidth": _finite(c.max_bisection_bandwidth),
            "violations": [str(v) for v in check_constraints(d, g, c, lib)],
        },
        "architecture": stats,
        "search": {k: v for k, v in d.stats.items() if k != "elapsed_s"},
        "timings_s": {"decompose": t1 - t0, "synthesize": t2 - t1},
        "files": {k: {"path": os.path.basename(p), "sha256": _file_digest(p)} for k, p in files.items()},
    }
    return d, arch, tables, report, lib


def _finite(x: float):
    return None if math.isinf(x) else x


def _file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return _sha256(fh.read())


def _dump_report(args, report: dict, name: str = "report.json") -> str:
    path = os.path.join(_out_dir(args.out_dir), name)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_synth(args) -> int:
    g, digest = _read_acg(args.acg_pos or args.acg)
    d, _, _, report, _ = _synthesize(args, g, digest)
    _dump_report(args, report)
    sys.stdout.write(report["listing"])
    if d.truncated:
        log.warning("isomorphism timeout fired; the decomposition may not be optimal")
    return EXIT_OK


def _mesh_shape(text: Optional[str], n: int) -> tuple[int, int]:
    if text:
        try:
            r, c = (int(x) for x in text.lower().split("x"))
        except ValueError:
            raise InputError(f"--mesh expects RxC, got {text!r}") from None
    else:
        r = int(round(math.sqrt(n)))
        c = r
    if r * c != n:
        raise InputError(f"mesh {r}x{c} does not hold {n} nodes")
    return r, c


def _traffic(args, g: Acg) -> Traffic:
    if args.traffic == "acg":
        return traffic_from_acg(g, args.rounds, args.flit_bits)
    pairs = [(e.src, e.dst, e.volume) for e in g.edges]
    return Traffic.poisson(pairs, args.rate, args.cycles, args.seed)


def cmd_compare(args) -> int:
    g, digest = _read_acg(args.acg_pos or args.acg)
    rows_, cols_ = _mesh_shape(args.mesh, len(g))
    if g.nodes != tuple(range(1, rows_ * cols_ + 1)):
        raise InputError("mesh comparison needs nodes numbered 1..n")
    d, arch, tables, report, _ = _synthesize(args, g, digest)
    try:
        sim_em = EnergyModel.parse(args.sim_energy)
    except ValueError as exc:
        raise InputError(f"simulation energy model: {exc}") from None
    cfg = SimConfig(flit_bits=args.flit_bits, buffer_depth=args.buffer_depth,
                    virtual_channels=args.vc, switching=args.switching)
    tr = _traffic(args, g)
    mesh, mesh_t = mesh_baseline(rows_, cols_, args.spacing)
    runs = [("custom", arch, tables), (f"mesh{rows_}x{cols_}", mesh, mesh_t)]
    rows, results = [], {}
    blocks = max(1, args.rounds if args.traffic == "acg" else 1)
    for name, a, t in runs:
        res = simulate(a, t, tr, cfg, sim_em)
        results[name] = res.as_dict()
        per_block_delta = res.delta_cycles / blocks
        rows.append({
            "scenario": args.scenario, "arch": name,
            "delta_cycles": res.delta_cycles, "avg_latency": res.avg_latency_cycles,
            "throughput_bps": BLOCK_BITS * cfg.f_clk / per_block_delta if per_block_delta else 0.0,
            "energy_j": res.energy_joules / blocks, "p_ave_w": res.p_ave_watts,
        })
    out = _out_dir(args.out_dir)
    csv_path = os.path.join(out, "compare.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_HEADER.split(","), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    from .plotting import comparison_chart

    svg = comparison_chart(rows, os.path.join(out, "compare.svg"))
    report["simulation"] = {"config": cfg.__dict__, "energy_model": sim_em.describe(),
                            "traffic": tr.mode, "packets": len(tr), "results": results}
    report["files"]["compare_csv"] = {"path": "compare.csv", "sha256": _file_digest(csv_path)}
    report["files"]["compare_svg"] = {"path": "compare.svg", "sha256": _file_digest(svg)}
    _dump_report(args, report)
    with open(csv_path) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--sizes expects comma-separated integers, got {args.sizes!r}") from None
    lib = _library(args)
    em = _energy(args)
    rows = []
    for n in sizes:
        for i in range(args.instances):
            seed = args.seed + i
            g = bench_instance(seed, n, noise=args.noise)
            t0 = time.perf_counter()
            d = decompose(g, lib, em, timeout=args.timeout_iso, mode=args.cost_mode, workers=args.workers)
            wall = time.perf_counter() - t0
            rows.append({"n": n, "seed": seed, "edges": g.number_of_edges(),
                         "candidates": d.stats["candidates"], "cost": d.cost,
                         "truncated": int(d.truncated), "wall_s": wall})
            log.info("n=%d seed=%d edges=%d wall=%.3fs", n, seed, g.number_of_edges(), wall)
    out = _out_dir(args.out_dir)
    path = os.path.join(out, "bench.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["n", "wall_s"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    from .plotting import bench_chart

    bench_chart(rows, os.path.join(out, "bench.svg"))
    with open(path) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        if args.workload == "aes":
            g, truth = aes_acg(), None
        elif args.workload == "planted":
            mix = args.mix.split(",") if args.mix else None
            p = planted_workload(args.seed, args.n, mix or ("MGG4",), noise=args.noise, overlap=args.overlap)
            g, truth = p.acg, p.log(builtin_library())
        else:
            g, truth = random_acg(args.seed, args.n, args.density), None
    except (ValueError, KeyError) as exc:
        raise InputError(f"cannot generate workload: {exc}") from None
    text = serialize_acg(g)
    if args.out:
        _write(args.out, text)
        if truth is not None:
            _write(args.out + ".truth", truth)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate_lib(args) -> int:
    lib = _library(args)
    bad = 0
    for name, errors in validate_library(lib).items():
        if errors:
            bad += 1
            for e in errors:
                print(f"{name}: {e}")
        else:
            print(f"{name}: ok")
    return EXIT_INPUT if bad else EXIT_OK


def _add_common(p: argparse.ArgumentParser, acg: bool = True) -> None:
    if acg:
        p.add_argument("acg_pos", nargs="?", metavar="ACG", help="ACG file")
        p.add_argument("--acg", help="ACG file (alternative to the positional argument)")
    p.add_argument("--library", help="primitive library file (default: builtin)")
    p.add_argument("--energy", default="unit", help="'unit' or 'linear:e_router,e_wire[,default_mm,lambda]'")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="remainder penalty")
    p.add_argument("--max-link-bw", type=float, default=math.inf)
    p.add_argument("--max-bisection", type=float, default=math.inf)
    p.add_argument("--timeout-iso", type=float, default=10.0, help="seconds per isomorphism call")
    p.add_argument("--cost-mode", choices=COST_MODES, default="link")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nocsynth", description="Application-specific NoC synthesis from communication primitives.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="decompose an ACG and synthesize the architecture")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="simulate the synthesized architecture against a mesh")
    _add_common(p)
    p.add_argument("--mesh", help="mesh shape RxC (default: square)")
    p.add_argument("--spacing", type=float, default=1.0, help="mesh link length in mm")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--flit-bits", type=int, default=32)
    p.add_argument("--buffer-depth", type=int, default=4)
    p.add_argument("--vc", type=int, default=1)
    p.add_argument("--switching", choices=SWITCHING, default="store-and-forward")
    p.add_argument("--sim-energy", default=f"linear:{CALIBRATED.e_router:g},{CALIBRATED.e_wire:g}")
    p.add_argument("--traffic", choices=("acg", "poisson"), default="acg")
    p.add_argument("--rate", type=float, default=0.05, help="poisson injections per cycle per pair")
    p.add_argument("--cycles", type=int, default=1000, help="poisson generation window")
    p.add_argument("--scenario", default="aes")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="time decompose() over planted suites")
    _add_common(p, acg=False)
    p.add_argument("--sizes", default="4,8,12,18")
    p.add_argument("--instances", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.2)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a workload ACG")
    p.add_argument("--workload", choices=("aes", "planted", "random"), default="aes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--density", type=float, default=0.2)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--mix", help="comma-separated primitive names for planted graphs")
    p.add_argument("--overlap", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate-lib", help="check a primitive library")
    p.add_argument("--library")
    p.set_defaults(func=cmd_validate_lib)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, AcgError, ArchError, LibraryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
