"""Rule-based search over structure choice and placement.

Rules, applied exhaustively per view and combined across views:

  R1  baseline: evaluate the bound plan at the cloud, ship the result.
  R2  for each structure match, insert build at one site and cache +
      eval at the same or a downstream site.
  R3  replicate a structure per value of the choices baked into its
      build input, keying the cache by them (enumerated domains only).
  R4  place the residual fragment at the eval site or downstream.

Matches whose residual crosses a join without a declared fan-out bound
are pruned: an unbounded join evaluated at interaction time cannot
guarantee any latency bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .costmodel import Calibration, CostReport, assess
from .deployment import SITES, DeploymentModel, depth, sites_from
from .errors import MissingStats
from .physical import BaselineStrategy, PhysicalPlan, StructureStrategy
from .plan import InterfaceSpec, Join, PlanNode, iter_nodes, plan_choices
from .relation import RelationStats
from .structures import MatchResult, PrefixSumCubeKind, match_all

DEFAULT_CANDIDATE_CAP = 10 ** 5
DEFAULT_CUBE_CELL_CAP = 10 ** 8

_SITE_ORDER = sorted(SITES, key=depth)  # cloud, server, client


def _residual_has_unbounded_join(residual: PlanNode | None) -> bool:
    if residual is None:
        return False
    return any(isinstance(node, Join) and node.max_fanout is None
               for _nid, node in iter_nodes(residual))


def _cube_cells(match: MatchResult, relation: str,
                stats: Mapping[str, RelationStats]) -> float:
    kind = match.kind
    assert isinstance(kind, PrefixSumCubeKind)
    rs = stats.get(relation)
    cells = 1.0
    for spec in kind.dim_specs:
        cs = rs.columns.get(spec.column) if rs else None
        if cs is None:
            raise MissingStats(spec.column)
        cells *= max(cs.distinct_count, 1)
    return cells


def _scan_relation(match: MatchResult) -> str:
    node = match.build_plan
    while hasattr(node, "input"):
        node = node.input
    return node.relation


def _replicable(match: MatchResult, spec: InterfaceSpec, view: str) -> bool:
    """R3 applies only when every build choice has an enumerated domain."""
    if not match.build_choices:
        return False
    choices = plan_choices(spec.view(view).plan)
    for cid in match.build_choices:
        info = choices.get(cid)
        if info is None or info.kind != "literal":
            return False
        from .plan import EnumDomain
        if not isinstance(info.domain, EnumDomain):
            return False
    return True


def view_strategies(spec: InterfaceSpec, view_name: str,
                    stats: Mapping[str, RelationStats],
                    cube_cell_cap: int = DEFAULT_CUBE_CELL_CAP) -> list:
    """All per-view strategies, baseline first, in deterministic order."""
    view = spec.view(view_name)
    out: list = [BaselineStrategy(view_name)]
    for m in match_all(view.plan, stats):
        if _residual_has_unbounded_join(m.residual):
            continue
        if isinstance(m.kind, PrefixSumCubeKind):
            if _cube_cells(m, _scan_relation(m), stats) > cube_cell_cap:
                continue
        replicate_options = [False]
        if _replicable(m, spec, view_name):
            replicate_options.append(True)
        for build_site in _SITE_ORDER:
            for eval_site in _SITE_ORDER:
                if depth(build_site) > depth(eval_site):
                    continue
                residual_sites = sites_from(eval_site) \
                    if m.residual is not None else [eval_site]
                for residual_site in residual_sites:
                    for replicate in replicate_options:
                        out.append(StructureStrategy(
                            view_name, m, build_site, eval_site,
                            residual_site, replicate))
    return out


def enumerate_candidates(spec: InterfaceSpec, dm: DeploymentModel,
                         stats: Mapping[str, RelationStats],
                         candidate_cap: int = DEFAULT_CANDIDATE_CAP,
                         cube_cell_cap: int = DEFAULT_CUBE_CELL_CAP,
                         ) -> tuple[list[PhysicalPlan], bool]:
    """Cross product of per-view strategies, capped.

    Returns (candidates, truncated); ordering is deterministic for
    identical inputs.
    """
    per_view = [view_strategies(spec, v.name, stats, cube_cell_cap)
                for v in spec.views]
    plans: list[PhysicalPlan] = []
    truncated = False

    def rec(i: int, chosen: list) -> bool:
        nonlocal truncated
        if i == len(per_view):
            if len(plans) >= candidate_cap:
                truncated = True
                return False
            plans.append(PhysicalPlan(list(chosen)))
            return True
        for s in per_view[i]:
            chosen.append(s)
            ok = rec(i + 1, chosen)
            chosen.pop()
            if not ok:
                return False
        return True

    rec(0, [])
    return plans, truncated


@dataclass(frozen=True)
class InfeasibleDiagnostic:
    """Closest miss when no candidate satisfies every constraint."""

    plan_id: str
    provenance: tuple
    interaction: str | None
    bound_ms: float | None
    estimate_ms: float | None
    site_over: tuple

    def to_json(self) -> dict:
        return {"plan_id": self.plan_id, "provenance": list(self.provenance),
                "interaction": self.interaction, "bound_ms": self.bound_ms,
                "estimate_ms": self.estimate_ms,
                "site_over": list(self.site_over)}


@dataclass(frozen=True)
class FeasibleResult:
    entries: tuple  # ((plan, report), ...)
    diagnostic: InfeasibleDiagnostic | None


def feasible_set(candidates, spec: InterfaceSpec, dm: DeploymentModel,
                 cal: Calibration, stats) -> FeasibleResult:
    """Assess every candidate; an empty feasible set is a legitimate
    answer, reported with the closest (plan, interaction) miss."""
    entries = []
    closest = None
    closest_gap = None
    for plan in candidates:
        report = assess(plan, spec, dm, cal, stats)
        if report.feasible:
            entries.append((plan, report))
            continue
        gap = 0.0
        worst = None
        for v in report.violated:
            miss = v.estimate_ms - v.bound_ms
            if worst is None or miss > gap:
                gap = miss
                worst = v
        if report.site_over:
            gap += 1e12  # budget misses rank behind pure latency misses
        if closest_gap is None or gap < closest_gap:
            closest_gap = gap
            closest = InfeasibleDiagnostic(
                plan.plan_id, plan.provenance,
                worst.interaction if worst else None,
                worst.bound_ms if worst else None,
                worst.estimate_ms if worst else None,
                report.site_over)
    diagnostic = None if entries else closest
    return FeasibleResult(tuple(entries), diagnostic)


@dataclass(frozen=True)
class ParetoPoint:
    plan: PhysicalPlan
    report: CostReport
    client_bytes: int
    server_bytes: int
    max_latency_headroom_ms: float

    def to_json(self) -> dict:
        headroom = self.max_latency_headroom_ms
        return {"plan_id": self.plan.plan_id,
                "client_bytes": self.client_bytes,
                "server_bytes": self.server_bytes,
                "max_latency_headroom_ms":
                    None if headroom == float("inf") else headroom,
                "provenance": list(self.plan.provenance)}


def _headroom(plan: PhysicalPlan, report: CostReport,
              spec: InterfaceSpec) -> float:
    slack = float("inf")
    for inter in spec.interactions:
        est = report.per_interaction_latency_ms.get(inter.name)
        if est is not None:
            slack = min(slack, inter.latency_bound_ms - est)
    return slack


def pareto(feasible, spec: InterfaceSpec) -> list[ParetoPoint]:
    """2-D dominance filter on (client_bytes, server_bytes).

    Ties on both axes keep the candidate with the larger latency
    headroom, then fewer operators, then lexicographic provenance, so
    the frontier is fully deterministic.
    """
    points = []
    for plan, report in feasible:
        points.append(ParetoPoint(
            plan, report,
            int(report.site_bytes.get("client", 0)),
            int(report.site_bytes.get("server", 0)),
            _headroom(plan, report, spec)))

    def tiebreak(p: ParetoPoint):
        return (-p.max_latency_headroom_ms, p.plan.operator_count,
                p.plan.provenance)

    best_at: dict[tuple[int, int], ParetoPoint] = {}
    for p in points:
        key = (p.client_bytes, p.server_bytes)
        cur = best_at.get(key)
        if cur is None or tiebreak(p) < tiebreak(cur):
            best_at[key] = p
    unique = list(best_at.values())
    frontier = []
    for p in unique:
        dominated = any(
            q.client_bytes <= p.client_bytes
            and q.server_bytes <= p.server_bytes
            and (q.client_bytes < p.client_bytes
                 or q.server_bytes < p.server_bytes)
            for q in unique)
        if not dominated:
            frontier.append(p)
    frontier.sort(key=lambda p: (p.client_bytes, p.server_bytes,
                                 p.plan.provenance))
    return frontier
