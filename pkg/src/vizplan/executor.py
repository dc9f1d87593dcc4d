"""Interprets physical plans over loaded data.

A Session materializes builds at warm time, maintains the per-site
structure caches, and serves interactions: it rebuilds exactly the
structures invalidated by changed choices, evaluates the operator
chain, and reports wall-clock compute time together with simulated
network delays derived from the deployment model (no real sockets).

Every interaction's output can be checked against the brute-force
evaluator; ``verify`` sweeps binding enumerations and reports the
match rate and observed latencies.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from typing import Mapping

from .codec import encode_relation, relation_digest
import hashlib
from .deployment import CLIENT, CLOUD, DeploymentModel, transfer_cost
from .errors import DomainExplosion, OutOfDomain, StaleStructure, UnboundChoice
from .oracle import oracle_eval
from .physical import BaselineStrategy, PhysicalPlan, StructureStrategy
from .plan import (Filter, Hole, InterfaceSpec, LiteralChoice, PlanNode, Scan,
                   bind, combine_preds, enumerate_bindings, flatten_pred,
                   iter_nodes, plan_choices, range_pairs, sample_bindings)
from .relation import Relation, relations_match
from .structures import LoadedStructure, build, eval_structure
from .costmodel import REQUEST_BYTES


@dataclass
class TraceEvent:
    interaction: str
    binding: dict
    measured_ms: float
    simulated_net_ms: float
    output_digest: str
    matches_oracle: bool | None = None
    rebuilt: tuple = ()
    cache_hit: bool = False

    def to_json(self) -> dict:
        return {"interaction": self.interaction, "binding": self.binding,
                "measured_ms": self.measured_ms,
                "simulated_net_ms": self.simulated_net_ms,
                "output_digest": self.output_digest,
                "matches_oracle": self.matches_oracle,
                "rebuilt": list(self.rebuilt), "cache_hit": self.cache_hit}


def read_trace(path: str) -> list[tuple[str, dict]]:
    """One JSON object per line: {"interaction": ..., "binding": {...}}."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append((obj["interaction"], obj["binding"]))
    return out


def write_events(path: str, events) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json(), sort_keys=True))
            fh.write("\n")


def _strip_choice_atoms(node: PlanNode) -> PlanNode:
    """Build plan without its choice predicates (the rebuild base)."""
    if isinstance(node, Filter):
        inner = _strip_choice_atoms(node.input)
        kept = []
        for p in flatten_pred(node.pred):
            operands = [getattr(p, "value", None), getattr(p, "lo", None),
                        getattr(p, "hi", None)]
            if any(isinstance(op, LiteralChoice) for op in operands):
                continue
            kept.append(p)
        pred = combine_preds(kept)
        return Filter(pred, inner) if pred is not None else inner
    return node


def _choice_only_filter(node: PlanNode) -> PlanNode | None:
    """Filter applying just the build plan's choice predicates to a Hole."""
    atoms = []
    cur = node
    while isinstance(cur, Filter):
        for p in flatten_pred(cur.pred):
            operands = [getattr(p, "value", None), getattr(p, "lo", None),
                        getattr(p, "hi", None)]
            if any(isinstance(op, LiteralChoice) for op in operands):
                atoms.append(p)
        cur = cur.input
    pred = combine_preds(atoms)
    return Filter(pred, Hole()) if pred is not None else None


@dataclass
class WarmReport:
    structures_built: int
    cache_entries: tuple
    site_bytes: dict
    warm_ms: float


@dataclass
class _ViewState:
    signature: tuple | None = None
    result: Relation | None = None
    digest: str = ""


class Session:
    """Single-threaded execution of one physical plan over one database."""

    def __init__(self, plan: PhysicalPlan, spec: InterfaceSpec,
                 db: Mapping[str, Relation], dm: DeploymentModel,
                 net_mode: str = "simulated"):
        if net_mode not in ("simulated", "none"):
            raise ValueError(f"unknown net_mode {net_mode!r}")
        self.plan = plan
        self.spec = spec
        self.db = dict(db)
        self.dm = dm
        self.net_mode = net_mode
        self.cache: dict[tuple, LoadedStructure] = {}
        self.resident: dict[tuple, Relation] = {}
        self.site_bytes: dict[str, int] = {s.id: 0 for s in dm.sites}
        self.current: dict[str, object] = {}
        self._view_choices: dict[str, dict] = {}
        self._view_pairs: dict[str, list] = {}
        self._state: dict[str, _ViewState] = {}
        self.warm_report: WarmReport | None = None
        for view in spec.views:
            choices = plan_choices(view.plan)
            self._view_choices[view.name] = choices
            self._view_pairs[view.name] = range_pairs(view.plan)
            self._state[view.name] = _ViewState()
            for cid, info in choices.items():
                self.current[cid] = info.first()

    # -- warm phase ---------------------------------------------------------

    def warm(self) -> "Session":
        """Run every build/ship step not keyed by an interaction choice.

        Keyed caches are seeded with the default binding; replicated
        caches are populated for every key value.
        """
        t0 = time.perf_counter()
        built = 0
        for strategy in self.plan.strategies:
            if isinstance(strategy, BaselineStrategy):
                continue
            built += self._warm_structure(strategy)
        self.warm_report = WarmReport(built, tuple(sorted(self.cache)),
                                      dict(self.site_bytes),
                                      (time.perf_counter() - t0) * 1000.0)
        return self

    def _warm_structure(self, strategy: StructureStrategy) -> int:
        m = strategy.match
        choices = self._view_choices[strategy.view]
        key_ids = sorted(m.build_choices)
        if strategy.replicate:
            value_lists = [choices[cid].iter_values() for cid in key_ids]
            combos = [dict(zip(key_ids, values))
                      for values in itertools.product(*value_lists)]
        else:
            combos = [{cid: self.current[cid] for cid in key_ids}]
            if key_ids:
                # rebuilds re-filter this retained input at the build site
                base = oracle_eval(_strip_choice_atoms(m.build_plan), self.db)
                key = (strategy.build_site, strategy.view, m.matched_node)
                self.resident[key] = base
                if strategy.build_site != CLOUD:
                    self.site_bytes[strategy.build_site] += \
                        len(encode_relation(base))
        built = 0
        for combo in combos:
            input_rel = oracle_eval(bind(m.build_plan, combo), self.db)
            structure = build(m.kind, input_rel, build_binding=combo)
            cache_key = self._cache_key(strategy, combo)
            self.cache[cache_key] = LoadedStructure(structure)
            self.site_bytes[strategy.eval_site] += structure.size_bytes
            built += 1
        if m.residual is not None and strategy.residual_site != CLOUD:
            for _nid, node in iter_nodes(m.residual):
                if isinstance(node, Scan):
                    key = (strategy.residual_site, node.relation)
                    if key not in self.resident:
                        self.resident[key] = self.db[node.relation]
                        self.site_bytes[strategy.residual_site] += \
                            len(encode_relation(self.db[node.relation]))
        return built

    @staticmethod
    def _cache_key(strategy: StructureStrategy, combo: Mapping) -> tuple:
        return (strategy.view, strategy.match.matched_node,
                tuple(sorted(combo.items())))

    # -- interactions ---------------------------------------------------------

    def _validate_binding(self, interaction_name: str, binding: Mapping):
        inter = self.spec.interaction(interaction_name)
        choices = self._view_choices[inter.view]
        for cid, value in binding.items():
            info = choices.get(cid)
            if info is None:
                raise UnboundChoice(f"{cid!r} is not a choice of view "
                                    f"{inter.view!r}")
            if not info.contains(value):
                raise OutOfDomain(cid, value)
        merged = {cid: binding.get(cid, self.current[cid]) for cid in choices}
        for lo, hi in self._view_pairs[inter.view]:
            if merged[lo] > merged[hi]:
                raise OutOfDomain(lo, (merged[lo], merged[hi]))
        return inter, merged

    def interact(self, interaction_name: str, binding: Mapping
                 ) -> tuple[Relation, TraceEvent]:
        """Apply a binding, re-evaluate the view, return render input."""
        inter, merged = self._validate_binding(interaction_name, binding)
        self.current.update(merged)
        state = self._state[inter.view]
        signature = tuple(sorted(merged.items()))
        if state.signature == signature and state.result is not None:
            event = TraceEvent(interaction_name, dict(merged), 0.0, 0.0,
                               state.digest, cache_hit=True)
            return state.result, event

        strategy = self.plan.strategy_for(inter.view)
        net = 0.0
        rebuilt: list[str] = []
        encoded: bytes | None = None
        simulate = self.net_mode == "simulated"
        t0 = time.perf_counter()
        if isinstance(strategy, BaselineStrategy):
            result = oracle_eval(bind(self.spec.view(inter.view).plan, merged),
                                 self.db)
            if simulate:
                # serialization is part of shipping a result off-site
                encoded = encode_relation(result)
                net += self._ship(CLIENT, CLOUD, REQUEST_BYTES)
                net += self._ship(CLOUD, CLIENT, len(encoded))
        else:
            result, encoded, net_s, rebuilt = self._run_structure(
                strategy, merged)
            net += net_s
        measured = (time.perf_counter() - t0) * 1000.0
        # the digest is trace instrumentation, not execution work
        if encoded is None:
            digest = relation_digest(result)
        else:
            digest = hashlib.sha256(encoded).hexdigest()
        state.signature = signature
        state.result = result
        state.digest = digest
        event = TraceEvent(interaction_name, dict(merged), measured, net,
                           digest, rebuilt=tuple(rebuilt))
        return result, event

    def _ship(self, frm: str, to: str, nbytes: int) -> float:
        if self.net_mode == "none" or frm == to:
            return 0.0
        return transfer_cost(self.dm, frm, to, nbytes)

    def _run_structure(self, strategy: StructureStrategy, merged: Mapping):
        m = strategy.match
        net = 0.0
        rebuilt: list[str] = []
        simulate = self.net_mode == "simulated"
        combo = {cid: merged[cid] for cid in sorted(m.build_choices)}
        cache_key = self._cache_key(strategy, combo)
        loaded = self.cache.get(cache_key)
        if loaded is None:
            if strategy.replicate:
                raise StaleStructure(
                    f"replica {cache_key!r} missing from warm cache")
            loaded, ship_bytes = self._rebuild(strategy, combo, cache_key)
            rebuilt.append(f"{strategy.view}:{m.matched_node}")
            if strategy.build_site != strategy.eval_site:
                net += self._ship(strategy.build_site, strategy.eval_site,
                                  ship_bytes)
        if strategy.eval_site != CLIENT:
            net += self._ship(CLIENT, strategy.eval_site, REQUEST_BYTES)
        result = eval_structure(loaded, merged)
        if m.residual is not None:
            if simulate and strategy.residual_site != strategy.eval_site:
                net += self._ship(strategy.eval_site, strategy.residual_site,
                                  len(encode_relation(result)))
            result = oracle_eval(bind(m.residual, merged), self.db,
                                 hole=result)
        encoded = None
        if simulate and strategy.residual_site != CLIENT:
            encoded = encode_relation(result)
            net += self._ship(strategy.residual_site, CLIENT, len(encoded))
        return result, encoded, net, rebuilt

    def _rebuild(self, strategy: StructureStrategy, combo: dict,
                 cache_key: tuple):
        m = strategy.match
        base = self.resident[(strategy.build_site, strategy.view,
                              m.matched_node)]
        choice_filter = _choice_only_filter(m.build_plan)
        if choice_filter is None:
            input_rel = base
        else:
            input_rel = oracle_eval(bind(choice_filter, combo), self.db,
                                    hole=base)
        structure = build(m.kind, input_rel, build_binding=combo)
        # the keyed cache holds one build at a time; evict the old key
        stale = [k for k in self.cache
                 if k[0] == strategy.view and k[1] == m.matched_node]
        for k in stale:
            old = self.cache.pop(k)
            self.site_bytes[strategy.eval_site] -= old.built.size_bytes
        loaded = LoadedStructure(structure)
        self.cache[cache_key] = loaded
        self.site_bytes[strategy.eval_site] += structure.size_bytes
        return loaded, structure.size_bytes

    # -- verification ---------------------------------------------------------

    def check_against_oracle(self, event: TraceEvent,
                             result: Relation) -> bool:
        view = self.spec.interaction(event.interaction).view
        expected = oracle_eval(bind(self.spec.view(view).plan, event.binding),
                               self.db)
        ok = relations_match(result, expected)
        event.matches_oracle = ok
        return ok


@dataclass(frozen=True)
class Sampling:
    """exhaustive: full enumeration up to ``cap``, then seeded sampling."""

    mode: str = "exhaustive"  # "exhaustive" | "sample"
    n: int = 1000
    seed: int = 0
    cap: int = 10 ** 6


@dataclass
class InteractionVerdict:
    interaction: str
    mode: str
    checked: int = 0
    passed: int = 0
    failures: list = field(default_factory=list)
    max_latency_ms: float = 0.0

    def to_json(self) -> dict:
        return {"interaction": self.interaction, "mode": self.mode,
                "checked": self.checked, "passed": self.passed,
                "failed": self.checked - self.passed,
                "failures": self.failures[:10],
                "max_latency_ms": self.max_latency_ms}


@dataclass
class VerifyReport:
    verdicts: list
    events: list

    @property
    def all_pass(self) -> bool:
        return all(v.passed == v.checked for v in self.verdicts)

    def to_json(self) -> dict:
        return {"all_pass": self.all_pass,
                "interactions": [v.to_json() for v in self.verdicts]}


def verify(session: Session, spec: InterfaceSpec,
           sampling: Sampling = Sampling()) -> VerifyReport:
    """Sweep bindings per interaction and compare against the oracle."""
    verdicts = []
    events = []
    for inter in spec.interactions:
        if sampling.mode == "sample":
            bindings = sample_bindings(spec, inter, sampling.n, sampling.seed)
            mode = f"sample({sampling.n})"
        else:
            try:
                bindings = list(enumerate_bindings(spec, inter, sampling.cap))
                mode = "exhaustive"
            except DomainExplosion:
                bindings = sample_bindings(spec, inter, sampling.n,
                                           sampling.seed)
                mode = f"sample({sampling.n})"
        verdict = InteractionVerdict(inter.name, mode)
        for binding in bindings:
            result, event = session.interact(inter.name, binding)
            ok = session.check_against_oracle(event, result)
            verdict.checked += 1
            if ok:
                verdict.passed += 1
            else:
                verdict.failures.append(dict(event.binding))
            verdict.max_latency_ms = max(
                verdict.max_latency_ms,
                event.measured_ms + event.simulated_net_ms)
            events.append(event)
        verdicts.append(verdict)
    return VerifyReport(verdicts, events)
