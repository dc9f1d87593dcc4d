"""Physical plans: per-view execution strategies with site assignments.

A view is served either by the baseline strategy (evaluate the bound
plan at the cloud per interaction and ship the result) or by a
structure strategy: build a matched structure at one site, cache it at
the eval site (optionally one replica per value of the choices baked
into its input), evaluate per interaction, run the residual fragment at
or downstream of the eval site, and render at the client.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Union

from .deployment import CLIENT, CLOUD, SITES
from .errors import InvalidPlanFile
from .plan import PlanNode, node_from_json, node_to_json
from .structures import MatchResult, kind_from_json, kind_to_json

PLAN_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BaselineStrategy:
    view: str

    @property
    def provenance(self) -> tuple:
        return (f"{self.view}|R1:baseline@{CLOUD}",)


@dataclass(frozen=True)
class StructureStrategy:
    view: str
    match: MatchResult
    build_site: str
    eval_site: str
    residual_site: str
    replicate: bool

    @property
    def provenance(self) -> tuple:
        kind = self.match.kind
        entries = [f"{self.view}|R2:{kind.family}[{self.match.matched_node}]"
                   f"@build={self.build_site},eval={self.eval_site}"]
        if self.replicate:
            keys = ",".join(sorted(self.match.build_choices))
            entries.append(f"{self.view}|R3:replicate[{keys}]")
        entries.append(f"{self.view}|R4:residual@{self.residual_site}")
        return tuple(entries)

    @property
    def rebuild_choices(self) -> frozenset:
        """Choices whose change forces a rebuild at interaction time."""
        return frozenset() if self.replicate else self.match.build_choices


ViewStrategy = Union[BaselineStrategy, StructureStrategy]


@dataclass(frozen=True)
class PhysicalPlan:
    strategies: tuple

    def __init__(self, strategies):
        object.__setattr__(self, "strategies", tuple(strategies))

    @property
    def provenance(self) -> tuple:
        out: list[str] = []
        for s in self.strategies:
            out.extend(s.provenance)
        return tuple(out)

    def strategy_for(self, view: str) -> ViewStrategy:
        for s in self.strategies:
            if s.view == view:
                return s
        raise KeyError(view)

    @property
    def operator_count(self) -> int:
        return sum(len(_operators(s)) for s in self.strategies)

    @property
    def plan_id(self) -> str:
        blob = json.dumps(plan_to_json(self), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


def _operators(strategy: ViewStrategy) -> list[dict]:
    """Flat operator listing for serialization and explain output."""
    if isinstance(strategy, BaselineStrategy):
        return [
            {"op": "eval_query", "site": CLOUD},
            {"op": "ship_result", "from": CLOUD, "to": CLIENT},
            {"op": "render", "site": CLIENT},
        ]
    m = strategy.match
    ops: list[dict] = []
    if strategy.build_site != CLOUD:
        ops.append({"op": "ship_table", "from": CLOUD,
                    "to": strategy.build_site, "when": "warm"})
    ops.append({"op": "build", "site": strategy.build_site,
                "kind": kind_to_json(m.kind),
                "rebuild_on": sorted(m.build_choices)
                if not strategy.replicate else []})
    ops.append({"op": "cache", "site": strategy.eval_site,
                "keys": sorted(m.build_choices),
                "replicate": strategy.replicate})
    ops.append({"op": "eval", "site": strategy.eval_site})
    ops.append({"op": "residual", "site": strategy.residual_site,
                "empty": m.residual is None})
    if strategy.residual_site != CLIENT:
        ops.append({"op": "ship_result", "from": strategy.residual_site,
                    "to": CLIENT})
    ops.append({"op": "render", "site": CLIENT})
    return ops


def match_to_json(m: MatchResult) -> dict:
    return {
        "matched_node": m.matched_node,
        "kind": kind_to_json(m.kind),
        "residual": None if m.residual is None else node_to_json(m.residual),
        "build_plan": node_to_json(m.build_plan),
        "build_choices": sorted(m.build_choices),
        "eval_choices": sorted(m.eval_choices),
    }


def match_from_json(obj: dict) -> MatchResult:
    residual: PlanNode | None = None
    if obj.get("residual") is not None:
        residual = node_from_json(obj["residual"])
    return MatchResult(obj["matched_node"], kind_from_json(obj["kind"]),
                       residual, node_from_json(obj["build_plan"]),
                       frozenset(obj["build_choices"]),
                       frozenset(obj["eval_choices"]))


def plan_to_json(plan: PhysicalPlan) -> dict:
    views = []
    for s in plan.strategies:
        entry: dict = {"view": s.view, "operators": _operators(s)}
        if isinstance(s, BaselineStrategy):
            entry["strategy"] = "baseline"
        else:
            entry["strategy"] = "structure"
            entry["match"] = match_to_json(s.match)
            entry["sites"] = {"build": s.build_site, "eval": s.eval_site,
                              "residual": s.residual_site}
            entry["replicate"] = s.replicate
        views.append(entry)
    return {"format_version": PLAN_FORMAT_VERSION, "views": views,
            "provenance": list(plan.provenance)}


def plan_from_json(obj: dict) -> PhysicalPlan:
    try:
        if obj.get("format_version") != PLAN_FORMAT_VERSION:
            raise InvalidPlanFile(
                f"unsupported format_version {obj.get('format_version')!r}")
        strategies: list[ViewStrategy] = []
        for entry in obj["views"]:
            if entry["strategy"] == "baseline":
                strategies.append(BaselineStrategy(entry["view"]))
            else:
                sites = entry["sites"]
                for role in ("build", "eval", "residual"):
                    if sites[role] not in SITES:
                        raise InvalidPlanFile(
                            f"unknown {role} site {sites[role]!r}")
                strategies.append(StructureStrategy(
                    entry["view"], match_from_json(entry["match"]),
                    sites["build"], sites["eval"], sites["residual"],
                    bool(entry["replicate"])))
        return PhysicalPlan(strategies)
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidPlanFile(f"malformed physical plan: {exc}") from exc


def load_plan(path: str) -> PhysicalPlan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidPlanFile(f"{path}: {exc}") from exc
    return plan_from_json(obj)


def save_plan(plan: PhysicalPlan, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_json(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")
