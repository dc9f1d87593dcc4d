"""Command-line surface.

Subcommands: gen, stats, optimize, explain, verify, bench, calibrate.

Exit codes: 0 success, 1 usage or I/O error, 2 no feasible plan,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from dataclasses import dataclass

from . import datagen, report
from .costmodel import (Calibration, DEFAULT_CALIBRATION, assess, calibrate,
                        measure_base_calibration)
from .deployment import default_deployment, load_deployment
from .errors import VizplanError
from .executor import Sampling, Session, verify, write_events
from .optimizer import enumerate_candidates, feasible_set, pareto
from .physical import load_plan, save_plan
from .plan import load_spec, validate_spec
from .relation import dataset_stats, load_csv
from .structures import DEFAULT_CUBE_CELL_CAP

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFY_FAILED = 3


class CliError(VizplanError):
    pass


@dataclass
class RunConfig:
    spec_path: str
    data_dir: str
    deploy_path: str | None
    calibration_path: str | None
    seed: int
    out_dir: str | None
    net_mode: str
    cap_candidates: int
    cap_cube_cells: int


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_context(cfg: RunConfig):
    spec = load_spec(cfg.spec_path)
    diags = validate_spec(spec)
    if diags:
        lines = "\n".join(f"  {d}" for d in diags)
        raise CliError(f"spec failed validation:\n{lines}")
    missing = [(s.relation, os.path.join(cfg.data_dir, s.path))
               for s in spec.sources
               if not os.path.exists(os.path.join(cfg.data_dir, s.path))]
    if missing:
        listing = ", ".join(f"{rel} ({path})" for rel, path in missing)
        raise CliError(f"missing data files for sources: {listing}")
    db = {}
    for source in spec.sources:
        path = os.path.join(cfg.data_dir, source.path)
        db[source.relation] = load_csv(path, source.relation, source.schema)
    stats = dataset_stats(db)
    dm = load_deployment(cfg.deploy_path) if cfg.deploy_path \
        else default_deployment()
    if cfg.calibration_path:
        with open(cfg.calibration_path, "r", encoding="utf-8") as fh:
            cal = Calibration.from_json(json.load(fh))
    else:
        cal = DEFAULT_CALIBRATION
    return spec, db, stats, dm, cal


def _stats_json(stats) -> dict:
    out = {}
    for rel, rs in sorted(stats.items()):
        cols = {}
        for name, cs in sorted(rs.columns.items()):
            cols[name] = {"distinct_count": cs.distinct_count,
                          "null_count": cs.null_count,
                          "width_bytes": round(cs.width_bytes, 3),
                          "min": cs.min, "max": cs.max}
        out[rel] = {"row_count": rs.row_count, "columns": cols}
    return out


def cmd_gen(args) -> int:
    if args.dataset not in datagen.GENERATORS:
        raise CliError(f"unknown dataset {args.dataset!r}; "
                       f"choose from {sorted(datagen.GENERATORS)}")
    gen = datagen.GENERATORS[args.dataset]
    kwargs = {"seed": args.seed}
    if args.dataset == "wide" and args.rows:
        kwargs["rows"] = args.rows
    db, spec = gen(**kwargs)
    paths = datagen.write_dataset(db, spec, args.out)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _config(args)
    spec, db, stats, _dm, _cal = _load_context(cfg)
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "stats.json")
    _write_json(path, _stats_json(stats))
    print(path)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    spec, db, stats, dm, cal = _load_context(cfg)
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    candidates, truncated = enumerate_candidates(
        spec, dm, stats, cfg.cap_candidates, cfg.cap_cube_cells)
    result = feasible_set(candidates, spec, dm, cal, stats)
    points = pareto(result.entries, spec)
    doc = {
        "candidates": len(candidates),
        "truncated": truncated,
        "feasible": len(result.entries),
        "points": [p.to_json() for p in points],
        "diagnostic": result.diagnostic.to_json()
        if result.diagnostic else None,
    }
    plan_files = []
    for i, p in enumerate(points):
        name = f"plan_{i:02d}_{p.plan.plan_id}.json"
        save_plan(p.plan, os.path.join(out_dir, name))
        plan_files.append(name)
    doc["plan_files"] = plan_files
    _write_json(os.path.join(out_dir, "pareto.json"), doc)
    if points:
        report.save_pareto_figure(points, os.path.join(out_dir, "pareto.png"))
    print(f"candidates={len(candidates)} feasible={len(result.entries)} "
          f"frontier={len(points)}")
    if not points:
        diag = result.diagnostic
        if diag is not None:
            print("infeasible interface; closest candidate "
                  f"{diag.plan_id}: interaction={diag.interaction} "
                  f"bound={diag.bound_ms} estimate={diag.estimate_ms} "
                  f"over-budget sites={list(diag.site_over)}")
        return EXIT_INFEASIBLE
    for p in points:
        print(f"  {p.plan.plan_id}  client={p.client_bytes}B "
              f"server={p.server_bytes}B "
              f"headroom={p.max_latency_headroom_ms:.2f}ms")
    return EXIT_OK


def cmd_explain(args) -> int:
    cfg = _config(args)
    spec, db, stats, dm, cal = _load_context(cfg)
    plan = load_plan(args.plan)
    rep = assess(plan, spec, dm, cal, stats)
    print(f"plan {plan.plan_id} "
          f"({'feasible' if rep.feasible else 'infeasible'})")
    print("provenance:")
    for entry in plan.provenance:
        print(f"  {entry}")
    print("per-interaction latency estimate (ms):")
    for inter in spec.interactions:
        bd = rep.breakdown[inter.name]
        mark = "ok " if bd.total_ms <= inter.latency_bound_ms else "MISS"
        print(f"  [{mark}] {inter.name:<20} total={bd.total_ms:9.3f} "
              f"bound={inter.latency_bound_ms:g} "
              f"(build={bd.build_ms:.3f} eval={bd.eval_ms:.3f} "
              f"ship={bd.ship_ms:.3f} residual={bd.residual_ms:.3f})")
    print("resident bytes per site:")
    for site in sorted(rep.site_bytes):
        over = " OVER BUDGET" if site in rep.site_over else ""
        print(f"  {site:<7} {rep.site_bytes[site]}{over}")
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        doc = {"plan_id": plan.plan_id, "provenance": list(plan.provenance)}
        doc.update(rep.to_json())
        _write_json(os.path.join(cfg.out_dir, "explain.json"), doc)
    return EXIT_OK


def _sampling(args) -> Sampling:
    if getattr(args, "exhaustive", False):
        return Sampling("exhaustive", n=args.sample or 1000, seed=args.seed)
    if args.sample:
        return Sampling("sample", n=args.sample, seed=args.seed)
    return Sampling("exhaustive", seed=args.seed)


def cmd_verify(args) -> int:
    cfg = _config(args)
    spec, db, stats, dm, _cal = _load_context(cfg)
    plan = load_plan(args.plan)
    session = Session(plan, spec, db, dm, net_mode=cfg.net_mode).warm()
    rep = verify(session, spec, _sampling(args))
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        _write_json(os.path.join(cfg.out_dir, "verify.json"), rep.to_json())
        write_events(os.path.join(cfg.out_dir, "events.jsonl"), rep.events)
    for v in rep.verdicts:
        status = "pass" if v.passed == v.checked else "FAIL"
        print(f"[{status}] {v.interaction}: {v.passed}/{v.checked} "
              f"oracle matches ({v.mode}), max latency "
              f"{v.max_latency_ms:.3f}ms")
        for failure in v.failures[:5]:
            print(f"    mismatch at binding {failure}")
    return EXIT_OK if rep.all_pass else EXIT_VERIFY_FAILED


def cmd_bench(args) -> int:
    cfg = _config(args)
    spec, db, stats, dm, _cal = _load_context(cfg)
    plan = load_plan(args.plan)
    session = Session(plan, spec, db, dm, net_mode=cfg.net_mode).warm()
    from .plan import sample_bindings
    rows = []
    all_events = []
    n = args.sample or 200
    for inter in spec.interactions:
        events = []
        for binding in sample_bindings(spec, inter, n, args.seed):
            _rel, ev = session.interact(inter.name, binding)
            events.append(ev)
        lat = sorted(e.measured_ms + e.simulated_net_ms for e in events)
        p50 = statistics.median(lat)
        p95 = lat[min(len(lat) - 1, int(0.95 * (len(lat) - 1)))]
        violations = sum(1 for v in lat if v > inter.latency_bound_ms)
        rows.append({"interaction": inter.name, "kind": inter.kind,
                     "bound_ms": inter.latency_bound_ms,
                     "p50_ms": round(p50, 4), "p95_ms": round(p95, 4),
                     "max_ms": round(lat[-1], 4), "violations": violations})
        all_events.extend(events)
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "bench.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["interaction", "kind",
                                                "bound_ms", "p50_ms",
                                                "p95_ms", "max_ms",
                                                "violations"])
        writer.writeheader()
        writer.writerows(rows)
    report.save_bench_figure(rows, os.path.join(out_dir, "bench.png"))
    write_events(os.path.join(out_dir, "events.jsonl"), all_events)
    print(csv_path)
    for r in rows:
        print(f"  {r['interaction']:<20} p50={r['p50_ms']}ms "
              f"p95={r['p95_ms']}ms max={r['max_ms']}ms "
              f"violations={r['violations']}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cal = measure_base_calibration(runs=args.runs)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "calibration.json")
    _write_json(path, cal.to_json())
    print(path)
    for name, value in sorted(cal.to_json().items()):
        print(f"  {name} = {value:.3e} ms/unit")
    return EXIT_OK


def _config(args) -> RunConfig:
    return RunConfig(
        spec_path=args.spec,
        data_dir=args.data,
        deploy_path=getattr(args, "deploy", None),
        calibration_path=getattr(args, "calibration", None),
        seed=getattr(args, "seed", 0),
        out_dir=getattr(args, "out", None),
        net_mode=getattr(args, "net", "simulated"),
        cap_candidates=getattr(args, "cap_candidates", None) or 10 ** 5,
        cap_cube_cells=getattr(args, "cap_cube_cells", None)
        or DEFAULT_CUBE_CELL_CAP,
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _add_common(p, out_required=False):
    p.add_argument("--spec", required=True, help="interface spec JSON")
    p.add_argument("--data", required=True, help="directory with source CSVs")
    p.add_argument("--deploy", help="deployment model JSON")
    p.add_argument("--calibration", help="measured calibration JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=out_required, help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="vizplan",
                     description="latency-feasible physical plan synthesis "
                                 "for interactive views")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a bundled synthetic dataset + spec")
    p.add_argument("--dataset", required=True,
                   help=f"one of {sorted(datagen.GENERATORS)}")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rows", type=int, help="row count for the wide dataset")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("stats", help="write exact column statistics")
    _add_common(p, out_required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("optimize",
                       help="emit the feasible-plan frontier and plan files")
    _add_common(p, out_required=True)
    p.add_argument("--cap-candidates", type=int, dest="cap_candidates")
    p.add_argument("--cap-cube-cells", type=int, dest="cap_cube_cells")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("explain", help="cost breakdown for one plan file")
    _add_common(p)
    p.add_argument("plan", help="physical plan JSON")
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("verify", help="run a plan and compare to the oracle")
    _add_common(p)
    p.add_argument("plan")
    p.add_argument("--sample", type=int, help="sample size per interaction")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--net", choices=["simulated", "none"],
                   default="simulated")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="measure per-interaction latency")
    _add_common(p, out_required=True)
    p.add_argument("plan")
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--net", choices=["simulated", "none"],
                   default="simulated")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("calibrate", help="measure cost-model constants")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VizplanError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
