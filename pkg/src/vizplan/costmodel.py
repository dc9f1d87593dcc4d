"""Latency and resource estimation for physical plans.

Latency is estimated per interaction as the worst case over the
interaction's bindings: rebuild cost for structures it invalidates,
plus eval, transfer, and residual evaluation along the operator chain.
Estimates gate the plan search; measured wall-clock latencies from the
executor check the result.

The per-unit constants come from microbenchmarks (``calibrate``) or
from the pinned defaults, which keep optimizer output deterministic
across runs on the same inputs.
"""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass
from typing import Mapping

from .deployment import CLIENT, CLOUD, DeploymentModel, Site, fits, transfer_cost
from .physical import BaselineStrategy, PhysicalPlan, StructureStrategy
from .plan import (Eq, Filter, GroupByAgg, Hole, InterfaceSpec,
                   Interaction, Join, PlanNode, Project, Scan,
                   SubplanChoice, flatten_pred, plan_choices)
from .relation import RelationStats
from .structures import estimate

REQUEST_BYTES = 256


@dataclass(frozen=True)
class Calibration:
    """Per-unit operation costs in milliseconds (compute scale 1.0)."""

    c_scan: float
    c_hash: float
    c_probe: float
    c_sort: float
    c_cell: float

    def scaled(self, compute_scale: float) -> "Calibration":
        return Calibration(self.c_scan * compute_scale,
                           self.c_hash * compute_scale,
                           self.c_probe * compute_scale,
                           self.c_sort * compute_scale,
                           self.c_cell * compute_scale)

    def to_json(self) -> dict:
        return {"c_scan": self.c_scan, "c_hash": self.c_hash,
                "c_probe": self.c_probe, "c_sort": self.c_sort,
                "c_cell": self.c_cell}

    @classmethod
    def from_json(cls, obj: dict) -> "Calibration":
        return cls(obj["c_scan"], obj["c_hash"], obj["c_probe"],
                   obj["c_sort"], obj["c_cell"])


# Representative constants for CPython on commodity hardware; used when
# no measured calibration is supplied so repeated runs emit identical files.
DEFAULT_CALIBRATION = Calibration(
    c_scan=6e-5, c_hash=1.5e-4, c_probe=3e-4, c_sort=1.5e-5, c_cell=5e-4)


def _bench_scan(n: int) -> float:
    data = list(range(n))
    hits = 0
    t0 = time.perf_counter()
    for v in data:
        if v == -1:
            hits += 1
    elapsed = (time.perf_counter() - t0) * 1000.0
    assert hits == 0
    return elapsed / n


def _bench_hash(n: int) -> float:
    keys = list(range(n))
    t0 = time.perf_counter()
    table: dict = {}
    for k in keys:
        table[k] = k
    elapsed = (time.perf_counter() - t0) * 1000.0
    assert len(table) == n
    return elapsed / n


def _bench_probe(n: int) -> float:
    # probe + materialize matched rows, the shape of an index eval
    size = min(n, 10 ** 5)
    table = {k: (k, k + 1, k + 2) for k in range(size)}
    probes = [i % size for i in range(n)]
    out_a: list = []
    out_b: list = []
    out_c: list = []
    t0 = time.perf_counter()
    get = table.get
    for k in probes:
        row = get(k)
        out_a.append(row[0])
        out_b.append(row[1])
        out_c.append(row[2])
    elapsed = (time.perf_counter() - t0) * 1000.0
    assert len(out_a) == n
    return elapsed / n


def _bench_sort(n: int) -> float:
    import math
    rng = random.Random(12)
    data = [rng.random() for _ in range(n)]
    t0 = time.perf_counter()
    sorted(data)
    elapsed = (time.perf_counter() - t0) * 1000.0
    return elapsed / (n * math.log2(n))


_CELL_BENCH_STATE: dict = {}


def _bench_cell(reads: int) -> float:
    """Unit cost of cube range evaluation: run a representative cube
    (100 output groups, 50 range positions, count+sum) and divide by
    groups * 2**d corner reads per eval."""
    from .plan import AggSpec, IntervalDomain, LiteralChoice
    from .relation import Relation
    from .structures import (DimSpec, LoadedStructure, PrefixSumCubeKind,
                             build, eval_structure)
    groups, positions = 100, 50
    if "loaded" not in _CELL_BENCH_STATE:
        rng = random.Random(34)
        n = 20_000
        rel = Relation.from_rows(
            "bench", [("g", "int64"), ("pos", "int64"), ("v", "float64")],
            [[rng.randrange(groups), rng.randrange(positions),
              rng.random()] for _ in range(n)])
        dom = IntervalDomain(0, positions - 1, 1)
        kind = PrefixSumCubeKind(
            [DimSpec("g", "group"),
             DimSpec("pos", "range", LiteralChoice("lo", dom),
                     LiteralChoice("hi", dom))],
            [AggSpec("count", None, "n"), AggSpec("sum", "v", "s")], ["g"])
        _CELL_BENCH_STATE["loaded"] = LoadedStructure(build(kind, rel))
        eval_structure(_CELL_BENCH_STATE["loaded"], {"lo": 0, "hi": 10})
    loaded = _CELL_BENCH_STATE["loaded"]
    units_per_eval = groups * 4  # 2**d with d = 2 dims
    evals = max(reads // units_per_eval, 1)
    rng = random.Random(35)
    windows = []
    for _ in range(evals):
        lo = rng.randrange(positions)
        windows.append((lo, rng.randrange(lo, positions)))
    t0 = time.perf_counter()
    for lo, hi in windows:
        eval_structure(loaded, {"lo": lo, "hi": hi})
    elapsed = (time.perf_counter() - t0) * 1000.0
    return elapsed / (evals * units_per_eval)


def measure_base_calibration(runs: int = 5, units: int = 10 ** 6) -> Calibration:
    """Median-of-runs microbenchmark at compute scale 1.0."""
    samples = {name: [] for name in ("scan", "hash", "probe", "sort", "cell")}
    for _ in range(runs):
        samples["scan"].append(_bench_scan(units))
        samples["hash"].append(_bench_hash(units))
        samples["probe"].append(_bench_probe(units))
        samples["sort"].append(_bench_sort(units))
        samples["cell"].append(_bench_cell(2 * 10 ** 5))
    med = {k: statistics.median(v) for k, v in samples.items()}
    return Calibration(med["scan"], med["hash"], med["probe"], med["sort"],
                       med["cell"])


def calibrate(site: Site, runs: int = 5, units: int = 10 ** 6) -> Calibration:
    """Measured constants for one site: base benchmark times compute_scale."""
    return measure_base_calibration(runs, units).scaled(site.compute_scale)


# ---------------------------------------------------------------------------
# Cardinality and width estimation


def _selectivity(pred, stats_cols) -> float:
    sel = 1.0
    for p in flatten_pred(pred):
        if isinstance(p, Eq):
            cs = stats_cols.get(p.column)
            distinct = max(cs.distinct_count, 1) if cs else 10
            sel *= 1.0 / distinct
        # ranges keep selectivity 1.0: the worst binding selects everything
    return sel


def est_rows(node: PlanNode, stats: Mapping[str, RelationStats],
             hole_rows: float = 0.0) -> float:
    """Worst-case-over-bindings output cardinality."""
    if isinstance(node, Scan):
        rs = stats.get(node.relation)
        return float(rs.row_count) if rs else 0.0
    if isinstance(node, Hole):
        return hole_rows
    if isinstance(node, Filter):
        base = est_rows(node.input, stats, hole_rows)
        cols = _visible_columns(node.input, stats)
        return base * _selectivity(node.pred, cols)
    if isinstance(node, Project):
        return est_rows(node.input, stats, hole_rows)
    if isinstance(node, GroupByAgg):
        base = est_rows(node.input, stats, hole_rows)
        cols = _visible_columns(node.input, stats)
        groups = 1.0
        for k in node.keys:
            cs = cols.get(k)
            groups *= max(cs.distinct_count, 1) if cs else 10
        return min(base, groups) if node.keys else min(base, 1.0)
    if isinstance(node, Join):
        left = est_rows(node.left, stats, hole_rows)
        right = est_rows(node.right, stats, hole_rows)
        if node.max_fanout is not None:
            return left * node.max_fanout
        return left * right
    if isinstance(node, SubplanChoice):
        return max((est_rows(a, stats, hole_rows) for a in node.alternatives),
                   default=0.0)
    raise TypeError(f"unknown node {node!r}")


def _visible_columns(node: PlanNode, stats) -> dict:
    """Column stats visible at a node, looked up by name across sources."""
    out: dict = {}
    for rs in stats.values():
        for c, cs in rs.columns.items():
            out.setdefault(c, cs)
    return out


def _column_width(name: str, stats) -> float:
    for rs in stats.values():
        cs = rs.columns.get(name)
        if cs is not None:
            return cs.width_bytes
    return 8.0


def est_output_bytes(node: PlanNode, rows: float, stats,
                     columns: list[str] | None = None) -> int:
    cols = columns if columns is not None else _output_columns(node)
    width = sum(_column_width(c, stats) for c in cols)
    return int(rows * max(width, 8.0)) + 64


def _output_columns(node: PlanNode) -> list[str]:
    if isinstance(node, Scan):
        return []  # caller falls back to default width
    if isinstance(node, (Filter,)):
        return _output_columns(node.input)
    if isinstance(node, Project):
        return list(node.columns)
    if isinstance(node, GroupByAgg):
        return list(node.keys) + [a.name for a in node.aggs]
    if isinstance(node, Join):
        return _output_columns(node.left) + _output_columns(node.right)
    if isinstance(node, SubplanChoice):
        return _output_columns(node.alternatives[0])
    return []


def est_plan_cost(node: PlanNode, stats, cal: Calibration,
                  hole_rows: float = 0.0) -> float:
    """Milliseconds to evaluate a plan by naive iteration."""
    if isinstance(node, (Scan, Hole)):
        return est_rows(node, stats, hole_rows) * cal.c_scan
    if isinstance(node, Filter):
        return (est_plan_cost(node.input, stats, cal, hole_rows)
                + est_rows(node.input, stats, hole_rows) * cal.c_scan)
    if isinstance(node, Project):
        return (est_plan_cost(node.input, stats, cal, hole_rows)
                + est_rows(node.input, stats, hole_rows) * cal.c_scan)
    if isinstance(node, GroupByAgg):
        inner = est_rows(node.input, stats, hole_rows)
        out = est_rows(node, stats, hole_rows)
        return (est_plan_cost(node.input, stats, cal, hole_rows)
                + inner * cal.c_hash + out * cal.c_probe)
    if isinstance(node, Join):
        left = est_rows(node.left, stats, hole_rows)
        right = est_rows(node.right, stats, hole_rows)
        return (est_plan_cost(node.left, stats, cal, hole_rows)
                + est_plan_cost(node.right, stats, cal, hole_rows)
                + left * right * cal.c_scan)
    if isinstance(node, SubplanChoice):
        return max((est_plan_cost(a, stats, cal, hole_rows)
                    for a in node.alternatives), default=0.0)
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Structure-strategy derived quantities


def _build_input_rows(strategy: StructureStrategy, stats) -> float:
    return est_rows(strategy.match.build_plan, stats)


def _base_relation(strategy: StructureStrategy) -> str:
    node = strategy.match.build_plan
    while not isinstance(node, Scan):
        node = node.input
    return node.relation


def _structure_estimate(strategy: StructureStrategy, stats,
                        cal_at_build: Calibration,
                        cal_at_eval: Calibration):
    rel = _base_relation(strategy)
    cols = stats[rel].columns
    rows = _build_input_rows(strategy, stats)
    build_side = estimate(strategy.match.kind, cols, rows, cal_at_build)
    eval_side = estimate(strategy.match.kind, cols, rows, cal_at_eval)
    return build_side, eval_side


def _eval_output(strategy: StructureStrategy, stats) -> tuple[float, int]:
    """Worst-case rows and bytes the structure eval emits."""
    from .structures import (BaseScanKind, HashIndexKind, PrefixSumCubeKind,
                             SortedRangeIndexKind)
    kind = strategy.match.kind
    rel = _base_relation(strategy)
    cols = stats[rel].columns
    rows = _build_input_rows(strategy, stats)
    if isinstance(kind, PrefixSumCubeKind):
        groups = 1.0
        for spec in kind.dim_specs:
            if spec.role == "group":
                cs = cols.get(spec.column)
                groups *= max(cs.distinct_count, 1) if cs else 10
        out_cols = list(kind.group_keys) + [m.name for m in kind.measures]
        width = sum(_column_width(c, {rel: stats[rel]}) if c in cols else 8.0
                    for c in out_cols)
        return groups, int(groups * width) + 64
    if isinstance(kind, HashIndexKind):
        cs = cols.get(kind.key_column)
        distinct = max(cs.distinct_count, 1) if cs else 10
        out_rows = rows / distinct
    elif isinstance(kind, (SortedRangeIndexKind, BaseScanKind)):
        out_rows = rows
    else:
        out_rows = rows
    width = sum(cs.width_bytes for cs in cols.values())
    return out_rows, int(out_rows * width) + 64


def _replica_count(strategy: StructureStrategy, spec: InterfaceSpec) -> int:
    choices = plan_choices(spec.view(strategy.view).plan)
    n = 1
    for cid in sorted(strategy.match.build_choices):
        n *= len(choices[cid].iter_values())
    return n


# ---------------------------------------------------------------------------
# Interaction latency


@dataclass(frozen=True)
class LatencyBreakdown:
    build_ms: float
    eval_ms: float
    ship_ms: float
    residual_ms: float

    @property
    def total_ms(self) -> float:
        return self.build_ms + self.eval_ms + self.ship_ms + self.residual_ms

    def to_json(self) -> dict:
        return {"build_ms": self.build_ms, "eval_ms": self.eval_ms,
                "ship_ms": self.ship_ms, "residual_ms": self.residual_ms,
                "total_ms": self.total_ms}


def interaction_latency(plan: PhysicalPlan, interaction: Interaction,
                        spec: InterfaceSpec, dm: DeploymentModel,
                        cal: Calibration, stats) -> LatencyBreakdown:
    """Worst-case end-to-end latency estimate for one interaction.

    Structures not invalidated by the interaction contribute no build
    cost; replicated caches never rebuild.
    """
    strategy = plan.strategy_for(interaction.view)
    view_plan = spec.view(interaction.view).plan

    def cal_at(site_id: str) -> Calibration:
        return cal.scaled(dm.site(site_id).compute_scale)

    if isinstance(strategy, BaselineStrategy):
        compute = est_plan_cost(view_plan, stats, cal_at(CLOUD))
        rows = est_rows(view_plan, stats)
        out_bytes = est_output_bytes(view_plan, rows, stats)
        ship = transfer_cost(dm, CLIENT, CLOUD, REQUEST_BYTES) \
            + transfer_cost(dm, CLOUD, CLIENT, out_bytes)
        return LatencyBreakdown(0.0, compute, ship, 0.0)

    m = strategy.match
    build_est, eval_est = _structure_estimate(
        strategy, stats, cal_at(strategy.build_site),
        cal_at(strategy.eval_site))
    ship = 0.0
    build_ms = 0.0
    if strategy.rebuild_choices & interaction.bound_choices:
        build_ms = build_est.build_ms
        if strategy.build_site != strategy.eval_site:
            ship += transfer_cost(dm, strategy.build_site, strategy.eval_site,
                                  build_est.size_bytes)
    if strategy.eval_site != CLIENT:
        ship += transfer_cost(dm, CLIENT, strategy.eval_site, REQUEST_BYTES)
    out_rows, out_bytes = _eval_output(strategy, stats)
    residual_ms = 0.0
    result_rows, result_bytes = out_rows, out_bytes
    if m.residual is not None:
        if strategy.residual_site != strategy.eval_site:
            ship += transfer_cost(dm, strategy.eval_site,
                                  strategy.residual_site, out_bytes)
        residual_ms = est_plan_cost(m.residual, stats,
                                    cal_at(strategy.residual_site),
                                    hole_rows=out_rows)
        result_rows = est_rows(m.residual, stats, hole_rows=out_rows)
        result_bytes = est_output_bytes(m.residual, result_rows, stats)
    if strategy.residual_site != CLIENT:
        ship += transfer_cost(dm, strategy.residual_site, CLIENT, result_bytes)
    return LatencyBreakdown(build_ms, eval_est.eval_ms, ship, residual_ms)


# ---------------------------------------------------------------------------
# Plan assessment


@dataclass(frozen=True)
class Violation:
    interaction: str
    bound_ms: float
    estimate_ms: float

    def to_json(self) -> dict:
        return {"interaction": self.interaction, "bound_ms": self.bound_ms,
                "estimate_ms": self.estimate_ms}


@dataclass(frozen=True)
class CostReport:
    per_interaction_latency_ms: dict
    site_bytes: dict
    feasible: bool
    violated: tuple
    site_over: tuple
    breakdown: dict

    def to_json(self) -> dict:
        return {
            "per_interaction_latency_ms": dict(self.per_interaction_latency_ms),
            "site_bytes": dict(self.site_bytes),
            "feasible": self.feasible,
            "violated": [v.to_json() for v in self.violated],
            "site_over": list(self.site_over),
            "breakdown": {k: v.to_json() for k, v in self.breakdown.items()},
        }


def plan_site_bytes(plan: PhysicalPlan, spec: InterfaceSpec, dm, stats
                    ) -> dict[str, int]:
    """Estimated resident bytes per site: cached structures, retained
    build inputs, and base tables residual fragments scan."""
    out = {s.id: 0 for s in dm.sites}
    base_cal = DEFAULT_CALIBRATION  # size estimates ignore the constants
    for strategy in plan.strategies:
        if isinstance(strategy, BaselineStrategy):
            continue
        build_est, _ = _structure_estimate(strategy, stats, base_cal, base_cal)
        if strategy.replicate:
            out[strategy.eval_site] += build_est.size_bytes * \
                _replica_count(strategy, spec)
        else:
            out[strategy.eval_site] += build_est.size_bytes
            if strategy.match.build_choices and strategy.build_site != CLOUD:
                rel = _base_relation(strategy)
                from .structures import table_bytes
                out[strategy.build_site] += table_bytes(
                    stats[rel].columns, stats[rel].row_count)
        residual = strategy.match.residual
        if residual is not None and strategy.residual_site != CLOUD:
            for _nid, node in _iter_residual_scans(residual):
                rs = stats.get(node.relation)
                if rs is None:
                    continue
                from .structures import table_bytes
                out[strategy.residual_site] += table_bytes(
                    rs.columns, rs.row_count)
    return out


def _iter_residual_scans(residual: PlanNode):
    from .plan import iter_nodes
    for nid, node in iter_nodes(residual):
        if isinstance(node, Scan):
            yield nid, node


def assess(plan: PhysicalPlan, spec: InterfaceSpec, dm: DeploymentModel,
           cal: Calibration, stats) -> CostReport:
    """Latency and footprint report; feasible means every interaction
    meets its bound and every site fits its budget."""
    latencies: dict[str, float] = {}
    breakdown: dict[str, LatencyBreakdown] = {}
    violated: list[Violation] = []
    for inter in spec.interactions:
        bd = interaction_latency(plan, inter, spec, dm, cal, stats)
        latencies[inter.name] = bd.total_ms
        breakdown[inter.name] = bd
        if bd.total_ms > inter.latency_bound_ms:
            violated.append(Violation(inter.name, inter.latency_bound_ms,
                                      bd.total_ms))
    site_bytes = plan_site_bytes(plan, spec, dm, stats)
    fit = fits(dm, site_bytes)
    site_over = tuple(s for s in sorted(fit) if not fit[s])
    feasible = not violated and not site_over
    return CostReport(latencies, site_bytes, feasible, tuple(violated),
                      site_over, breakdown)
