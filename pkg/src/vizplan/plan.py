"""Logical query plans with choice operators, and the interface model.

A view's plan is a tree of Scan/Filter/Project/GroupByAgg/Join nodes.
Two kinds of choices parameterize a plan:

* literal choices sit in predicate value slots (``LiteralChoice``) and
  are bound to scalars drawn from a finite domain,
* subplan choices are tree nodes (``SubplanChoice``) bound to the index
  of one of their alternatives.

User interactions bind subsets of choices under per-interaction latency
bounds. Binding every choice yields a concrete plan the brute-force
evaluator can run.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Sequence, Union

from .errors import DomainExplosion, OutOfDomain, UnboundChoice
from .relation import COLUMN_TYPES, scalar_type

SPEC_VERSION = 1
DEFAULT_BINDING_CAP = 10 ** 6

AGG_FUNCS = ("count", "sum", "min", "max", "avg")


# ---------------------------------------------------------------------------
# Domains and choices


@dataclass(frozen=True)
class EnumDomain:
    values: tuple

    def iter_values(self) -> tuple:
        return self.values

    def contains(self, v) -> bool:
        return any(v == x and type(v) is type(x) for x in self.values)

    def first(self):
        return self.values[0]

    def size(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class IntervalDomain:
    """Numeric interval discretized by an explicit step."""

    lo: Union[int, float]
    hi: Union[int, float]
    step: Union[int, float] = 1

    def iter_values(self) -> tuple:
        vals = []
        v = self.lo
        # small epsilon guards float accumulation at the upper edge
        limit = self.hi + abs(self.step) * 1e-9
        while v <= limit:
            vals.append(v)
            v = v + self.step
        return tuple(vals)

    def contains(self, v) -> bool:
        return v in set(self.iter_values())

    def first(self):
        return self.lo

    def size(self) -> int:
        return len(self.iter_values())


Domain = Union[EnumDomain, IntervalDomain]


@dataclass(frozen=True)
class LiteralChoice:
    """A choice occupying a literal slot inside a predicate."""

    choice_id: str
    domain: Domain


Operand = Union[int, float, str, bool, LiteralChoice]


# ---------------------------------------------------------------------------
# Predicates


@dataclass(frozen=True)
class Eq:
    column: str
    value: Operand


@dataclass(frozen=True)
class Between:
    """Inclusive range predicate; either bound may be absent."""

    column: str
    lo: Operand | None = None
    hi: Operand | None = None


@dataclass(frozen=True)
class And:
    preds: tuple

    def __init__(self, preds: Sequence):
        object.__setattr__(self, "preds", tuple(preds))


Predicate = Union[Eq, Between, And]


def flatten_pred(pred: Predicate) -> list[Predicate]:
    """Flatten nested Ands into a list of atomic predicates."""
    if isinstance(pred, And):
        out: list[Predicate] = []
        for p in pred.preds:
            out.extend(flatten_pred(p))
        return out
    return [pred]


def combine_preds(preds: Sequence[Predicate]) -> Predicate | None:
    preds = list(preds)
    if not preds:
        return None
    if len(preds) == 1:
        return preds[0]
    return And(tuple(preds))


# ---------------------------------------------------------------------------
# Plan nodes


@dataclass(frozen=True)
class AggSpec:
    func: str
    column: str | None
    name: str


@dataclass(frozen=True)
class Scan:
    relation: str


@dataclass(frozen=True)
class Filter:
    pred: Predicate
    input: "PlanNode"


@dataclass(frozen=True)
class Project:
    columns: tuple
    input: "PlanNode"

    def __init__(self, columns: Sequence[str], input: "PlanNode"):
        object.__setattr__(self, "columns", tuple(columns))
        object.__setattr__(self, "input", input)


@dataclass(frozen=True)
class GroupByAgg:
    keys: tuple
    aggs: tuple
    input: "PlanNode"

    def __init__(self, keys: Sequence[str], aggs: Sequence[AggSpec],
                 input: "PlanNode"):
        object.__setattr__(self, "keys", tuple(keys))
        object.__setattr__(self, "aggs", tuple(aggs))
        object.__setattr__(self, "input", input)


@dataclass(frozen=True)
class Join:
    """Equi-join; ``max_fanout`` is the declared per-left-row output bound.

    ``None`` marks the join unbounded, which excludes it from structure
    rewrites.
    """

    left: "PlanNode"
    right: "PlanNode"
    on: tuple  # ((left_col, right_col), ...)
    max_fanout: int | None = None

    def __init__(self, left, right, on: Sequence[tuple[str, str]],
                 max_fanout: int | None = None):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "on", tuple((a, b) for a, b in on))
        object.__setattr__(self, "max_fanout", max_fanout)


@dataclass(frozen=True)
class SubplanChoice:
    choice_id: str
    alternatives: tuple

    def __init__(self, choice_id: str, alternatives: Sequence["PlanNode"]):
        object.__setattr__(self, "choice_id", choice_id)
        object.__setattr__(self, "alternatives", tuple(alternatives))


@dataclass(frozen=True)
class Hole:
    """Placeholder for a rewritten subtree; never appears in interface specs."""


PlanNode = Union[Scan, Filter, Project, GroupByAgg, Join, SubplanChoice, Hole]

# a view's plan is identified by its root node
ChoicePlan = PlanNode


# ---------------------------------------------------------------------------
# Tree walking

ROOT_ID = "$"


def children(node: PlanNode) -> list[tuple[str, PlanNode]]:
    if isinstance(node, (Filter, Project, GroupByAgg)):
        return [(".in", node.input)]
    if isinstance(node, Join):
        return [(".l", node.left), (".r", node.right)]
    if isinstance(node, SubplanChoice):
        return [(f".a{i}", alt) for i, alt in enumerate(node.alternatives)]
    return []


def iter_nodes(root: PlanNode) -> Iterator[tuple[str, PlanNode]]:
    """Depth-first (node_id, node) pairs; ids are root-relative paths."""
    stack = [(ROOT_ID, root)]
    while stack:
        nid, node = stack.pop()
        yield nid, node
        for suffix, child in reversed(children(node)):
            stack.append((nid + suffix, child))


def node_at(root: PlanNode, node_id: str) -> PlanNode:
    for nid, node in iter_nodes(root):
        if nid == node_id:
            return node
    raise KeyError(node_id)


def replace_node(root: PlanNode, node_id: str, replacement: PlanNode) -> PlanNode:
    """Return a copy of the tree with the node at ``node_id`` swapped out."""
    if node_id == ROOT_ID:
        return replacement

    def rebuild(node: PlanNode, nid: str) -> PlanNode:
        if nid == node_id:
            return replacement
        if isinstance(node, (Filter, Project, GroupByAgg)):
            new_child = rebuild(node.input, nid + ".in")
            return replace(node, input=new_child)
        if isinstance(node, Join):
            return Join(rebuild(node.left, nid + ".l"),
                        rebuild(node.right, nid + ".r"),
                        node.on, node.max_fanout)
        if isinstance(node, SubplanChoice):
            alts = [rebuild(a, nid + f".a{i}")
                    for i, a in enumerate(node.alternatives)]
            return SubplanChoice(node.choice_id, alts)
        return node

    return rebuild(root, ROOT_ID)


def pred_choices(pred: Predicate) -> list[LiteralChoice]:
    out = []
    for p in flatten_pred(pred):
        if isinstance(p, Eq) and isinstance(p.value, LiteralChoice):
            out.append(p.value)
        elif isinstance(p, Between):
            for op in (p.lo, p.hi):
                if isinstance(op, LiteralChoice):
                    out.append(op)
    return out


@dataclass(frozen=True)
class ChoiceInfo:
    choice_id: str
    kind: str  # "literal" | "subplan"
    anchor: str  # node id of the predicate's filter, or the choice node
    domain: Domain | None = None  # literal choices only
    column: str | None = None  # literal choices only
    alternative_count: int = 0  # subplan choices only

    def iter_values(self) -> tuple:
        if self.kind == "literal":
            assert self.domain is not None
            return self.domain.iter_values()
        return tuple(range(self.alternative_count))

    def contains(self, v) -> bool:
        if self.kind == "literal":
            assert self.domain is not None
            return self.domain.contains(v)
        return isinstance(v, int) and 0 <= v < self.alternative_count

    def first(self):
        return self.iter_values()[0]


def plan_choices(root: PlanNode) -> dict[str, ChoiceInfo]:
    """All choices in a plan, in deterministic discovery order.

    Duplicate ids are not collapsed here; validate_spec reports them.
    """
    found: dict[str, ChoiceInfo] = {}
    for nid, node in iter_nodes(root):
        if isinstance(node, Filter):
            for p in flatten_pred(node.pred):
                if isinstance(p, Eq) and isinstance(p.value, LiteralChoice):
                    found.setdefault(p.value.choice_id, ChoiceInfo(
                        p.value.choice_id, "literal", nid,
                        domain=p.value.domain, column=p.column))
                elif isinstance(p, Between):
                    for op in (p.lo, p.hi):
                        if isinstance(op, LiteralChoice):
                            found.setdefault(op.choice_id, ChoiceInfo(
                                op.choice_id, "literal", nid,
                                domain=op.domain, column=p.column))
        elif isinstance(node, SubplanChoice):
            found.setdefault(node.choice_id, ChoiceInfo(
                node.choice_id, "subplan", nid,
                alternative_count=len(node.alternatives)))
    return found


def range_pairs(root: PlanNode) -> list[tuple[str, str]]:
    """(lo_choice, hi_choice) pairs that share a Between predicate.

    Bindings must keep lo <= hi for these pairs.
    """
    pairs = []
    for _nid, node in iter_nodes(root):
        if isinstance(node, Filter):
            for p in flatten_pred(node.pred):
                if (isinstance(p, Between)
                        and isinstance(p.lo, LiteralChoice)
                        and isinstance(p.hi, LiteralChoice)):
                    pairs.append((p.lo.choice_id, p.hi.choice_id))
    return pairs


# ---------------------------------------------------------------------------
# Interface model


@dataclass(frozen=True)
class SourceDecl:
    relation: str
    path: str
    schema: tuple

    def __init__(self, relation: str, path: str,
                 schema: Sequence[tuple[str, str]]):
        object.__setattr__(self, "relation", relation)
        object.__setattr__(self, "path", path)
        object.__setattr__(self, "schema", tuple((c, t) for c, t in schema))


@dataclass(frozen=True)
class View:
    name: str
    plan: PlanNode


@dataclass(frozen=True)
class Interaction:
    name: str
    view: str
    bound_choices: frozenset
    kind: str  # "continuous" | "discrete"
    latency_bound_ms: float

    def __init__(self, name: str, view: str, bound_choices,
                 kind: str, latency_bound_ms: float):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "view", view)
        object.__setattr__(self, "bound_choices", frozenset(bound_choices))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "latency_bound_ms", float(latency_bound_ms))


@dataclass(frozen=True)
class InterfaceSpec:
    sources: tuple
    views: tuple
    interactions: tuple

    def __init__(self, sources: Sequence[SourceDecl], views: Sequence[View],
                 interactions: Sequence[Interaction]):
        object.__setattr__(self, "sources", tuple(sources))
        object.__setattr__(self, "views", tuple(views))
        object.__setattr__(self, "interactions", tuple(interactions))

    def view(self, name: str) -> View:
        for v in self.views:
            if v.name == name:
                return v
        raise KeyError(name)

    def source(self, relation: str) -> SourceDecl:
        for s in self.sources:
            if s.relation == relation:
                return s
        raise KeyError(relation)

    def interaction(self, name: str) -> Interaction:
        for i in self.interactions:
            if i.name == name:
                return i
        raise KeyError(name)

    def view_choices(self, view_name: str) -> dict[str, ChoiceInfo]:
        return plan_choices(self.view(view_name).plan)

    def view_interactions(self, view_name: str) -> list[Interaction]:
        return [i for i in self.interactions if i.view == view_name]


Binding = Mapping[str, object]


# ---------------------------------------------------------------------------
# Schema inference


def output_schema(node: PlanNode,
                  source_schemas: Mapping[str, Sequence[tuple[str, str]]],
                  hole_schema: Sequence[tuple[str, str]] | None = None,
                  ) -> list[tuple[str, str]]:
    """Infer the (column, type) schema a node produces.

    Raises KeyError/ValueError on unknown relations or columns; callers
    doing diagnostics should use validate_spec instead.
    """
    if isinstance(node, Scan):
        return list(source_schemas[node.relation])
    if isinstance(node, Hole):
        if hole_schema is None:
            raise ValueError("hole outside a rewrite context")
        return list(hole_schema)
    if isinstance(node, Filter):
        return output_schema(node.input, source_schemas, hole_schema)
    if isinstance(node, Project):
        inner = dict(output_schema(node.input, source_schemas, hole_schema))
        return [(c, inner[c]) for c in node.columns]
    if isinstance(node, GroupByAgg):
        inner = dict(output_schema(node.input, source_schemas, hole_schema))
        out = [(k, inner[k]) for k in node.keys]
        for agg in node.aggs:
            if agg.func == "count":
                out.append((agg.name, "int64"))
            elif agg.func == "avg":
                out.append((agg.name, "float64"))
            elif agg.func == "sum":
                out.append((agg.name, inner[agg.column]))
            else:  # min/max
                out.append((agg.name, inner[agg.column]))
        return out
    if isinstance(node, Join):
        left = output_schema(node.left, source_schemas, hole_schema)
        right = output_schema(node.right, source_schemas, hole_schema)
        right_keys = {r for _, r in node.on}
        out = list(left)
        names = {c for c, _ in out}
        for c, t in right:
            if c in right_keys:
                continue
            if c in names:
                raise ValueError(f"join output column collision: {c}")
            out.append((c, t))
        return out
    if isinstance(node, SubplanChoice):
        schemas = [output_schema(a, source_schemas, hole_schema)
                   for a in node.alternatives]
        for s in schemas[1:]:
            if s != schemas[0]:
                raise ValueError(
                    f"choice {node.choice_id!r}: alternative schemas differ")
        return schemas[0]
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def _domain_value_types(domain: Domain) -> set[str]:
    return {scalar_type(v) for v in domain.iter_values()}


def validate_spec(spec: InterfaceSpec) -> list[Diagnostic]:
    """Structural and type validation; empty list means the spec is sound."""
    diags: list[Diagnostic] = []
    source_schemas = {s.relation: s.schema for s in spec.sources}
    for s in spec.sources:
        for _c, t in s.schema:
            if t not in COLUMN_TYPES:
                diags.append(Diagnostic("BadColumnType",
                                        f"source {s.relation!r} type {t!r}"))

    seen_choices: dict[str, str] = {}
    all_view_choices: dict[str, dict[str, ChoiceInfo]] = {}
    for view in spec.views:
        schema_ok = True
        for nid, node in iter_nodes(view.plan):
            if isinstance(node, Scan) and node.relation not in source_schemas:
                diags.append(Diagnostic(
                    "UnknownRelation",
                    f"view {view.name!r} scans undeclared {node.relation!r}"))
                schema_ok = False
            if isinstance(node, Hole):
                diags.append(Diagnostic(
                    "BadNode", f"view {view.name!r} contains a hole node"))
                schema_ok = False
        choices = plan_choices(view.plan)
        all_view_choices[view.name] = choices
        for cid in choices:
            if cid in seen_choices and seen_choices[cid] != view.name:
                diags.append(Diagnostic(
                    "DuplicateChoice",
                    f"choice {cid!r} appears in views "
                    f"{seen_choices[cid]!r} and {view.name!r}"))
            seen_choices[cid] = view.name
        for info in choices.values():
            if info.kind == "literal" and info.domain.size() == 0:
                diags.append(Diagnostic(
                    "EmptyDomain", f"choice {info.choice_id!r} has no values"))
        if not schema_ok:
            continue
        try:
            output_schema(view.plan, source_schemas)
        except (KeyError, ValueError, TypeError) as exc:
            diags.append(Diagnostic(
                "SchemaError", f"view {view.name!r}: {exc}"))
            continue
        diags.extend(_validate_view_types(view, source_schemas))

    bound: set[str] = set()
    for inter in spec.interactions:
        if inter.latency_bound_ms <= 0:
            diags.append(Diagnostic(
                "NonPositiveLatency",
                f"interaction {inter.name!r} bound "
                f"{inter.latency_bound_ms}ms"))
        if inter.kind not in ("continuous", "discrete"):
            diags.append(Diagnostic(
                "BadInteractionKind",
                f"interaction {inter.name!r} kind {inter.kind!r}"))
        if not inter.bound_choices:
            diags.append(Diagnostic(
                "EmptyInteraction", f"interaction {inter.name!r} binds nothing"))
        view_names = {v.name for v in spec.views}
        if inter.view not in view_names:
            diags.append(Diagnostic(
                "UnknownView",
                f"interaction {inter.name!r} names view {inter.view!r}"))
            continue
        view_choice_ids = set(all_view_choices.get(inter.view, {}))
        for cid in sorted(inter.bound_choices):
            if cid not in view_choice_ids:
                diags.append(Diagnostic(
                    "DanglingChoice",
                    f"interaction {inter.name!r} binds {cid!r}, absent "
                    f"from view {inter.view!r}"))
            bound.add(cid)
    for view_name, choices in all_view_choices.items():
        for cid in choices:
            if cid not in bound:
                diags.append(Diagnostic(
                    "UnboundChoice",
                    f"choice {cid!r} in view {view_name!r} is bound "
                    f"by no interaction"))
    return diags


def _validate_view_types(view: View, source_schemas) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def check(node: PlanNode):
        schema = dict(output_schema(node, source_schemas))
        if isinstance(node, Filter):
            inner = dict(output_schema(node.input, source_schemas))
            for p in flatten_pred(node.pred):
                col_t = inner.get(p.column)
                if col_t is None:
                    diags.append(Diagnostic(
                        "UnknownColumn",
                        f"view {view.name!r} filters on {p.column!r}"))
                    continue
                operands = [p.value] if isinstance(p, Eq) else [p.lo, p.hi]
                for op in operands:
                    if op is None:
                        continue
                    if isinstance(op, LiteralChoice):
                        bad = _domain_value_types(op.domain) - {col_t}
                        if bad:
                            diags.append(Diagnostic(
                                "DomainTypeMismatch",
                                f"choice {op.choice_id!r} domain has "
                                f"{sorted(bad)} values for {col_t} column "
                                f"{p.column!r}"))
                    elif scalar_type(op) != col_t:
                        diags.append(Diagnostic(
                            "PredicateTypeMismatch",
                            f"view {view.name!r}: {op!r} vs {col_t} "
                            f"column {p.column!r}"))
        if isinstance(node, GroupByAgg):
            inner = dict(output_schema(node.input, source_schemas))
            for k in node.keys:
                if k not in inner:
                    diags.append(Diagnostic(
                        "UnknownColumn",
                        f"view {view.name!r} groups by {k!r}"))
            out_names = list(node.keys)
            for agg in node.aggs:
                if agg.func not in AGG_FUNCS:
                    diags.append(Diagnostic(
                        "BadAggregate", f"unknown aggregate {agg.func!r}"))
                    continue
                if agg.func == "count":
                    if agg.column is not None:
                        diags.append(Diagnostic(
                            "BadAggregate", "count takes no column"))
                else:
                    t = inner.get(agg.column)
                    if t is None:
                        diags.append(Diagnostic(
                            "UnknownColumn",
                            f"aggregate {agg.func} over {agg.column!r}"))
                    elif t not in ("int64", "float64"):
                        diags.append(Diagnostic(
                            "BadAggregate",
                            f"{agg.func} over non-numeric {agg.column!r}"))
                if agg.name in out_names:
                    diags.append(Diagnostic(
                        "DuplicateOutput",
                        f"aggregate output {agg.name!r} repeats"))
                out_names.append(agg.name)
        if isinstance(node, Join):
            left = dict(output_schema(node.left, source_schemas))
            right = dict(output_schema(node.right, source_schemas))
            for lcol, rcol in node.on:
                lt, rt = left.get(lcol), right.get(rcol)
                if lt is None or rt is None:
                    diags.append(Diagnostic(
                        "UnknownColumn",
                        f"join key {lcol!r}={rcol!r} missing"))
                elif lt != rt:
                    diags.append(Diagnostic(
                        "JoinTypeMismatch",
                        f"join key {lcol!r}:{lt} vs {rcol!r}:{rt}"))
            if node.max_fanout is not None and node.max_fanout < 1:
                diags.append(Diagnostic(
                    "BadFanout", f"declared fan-out {node.max_fanout}"))
        for _s, child in children(node):
            check(child)

    try:
        check(view.plan)
    except (KeyError, ValueError, TypeError) as exc:
        diags.append(Diagnostic("SchemaError", f"view {view.name!r}: {exc}"))
    return diags


# ---------------------------------------------------------------------------
# Binding


def _bind_operand(op: Operand | None, binding: Binding):
    if isinstance(op, LiteralChoice):
        if op.choice_id not in binding:
            raise UnboundChoice(op.choice_id)
        v = binding[op.choice_id]
        if not op.domain.contains(v):
            raise OutOfDomain(op.choice_id, v)
        return v
    return op


def _bind_pred(pred: Predicate, binding: Binding) -> Predicate:
    if isinstance(pred, And):
        return And(tuple(_bind_pred(p, binding) for p in pred.preds))
    if isinstance(pred, Eq):
        return Eq(pred.column, _bind_operand(pred.value, binding))
    if isinstance(pred, Between):
        return Between(pred.column, _bind_operand(pred.lo, binding),
                       _bind_operand(pred.hi, binding))
    raise TypeError(f"unknown predicate {pred!r}")


def bind(root: PlanNode, binding: Binding) -> PlanNode:
    """Substitute every choice; the result is a concrete plan."""
    if isinstance(root, Filter):
        return Filter(_bind_pred(root.pred, binding), bind(root.input, binding))
    if isinstance(root, Project):
        return Project(root.columns, bind(root.input, binding))
    if isinstance(root, GroupByAgg):
        return GroupByAgg(root.keys, root.aggs, bind(root.input, binding))
    if isinstance(root, Join):
        return Join(bind(root.left, binding), bind(root.right, binding),
                    root.on, root.max_fanout)
    if isinstance(root, SubplanChoice):
        if root.choice_id not in binding:
            raise UnboundChoice(root.choice_id)
        idx = binding[root.choice_id]
        if not (isinstance(idx, int) and 0 <= idx < len(root.alternatives)):
            raise OutOfDomain(root.choice_id, idx)
        return bind(root.alternatives[idx], binding)
    return root  # Scan, Hole


def is_concrete(root: PlanNode) -> bool:
    return not plan_choices(root)


# ---------------------------------------------------------------------------
# Enumeration


def _ordered_valid(values_by_choice: dict[str, tuple],
                   pairs: list[tuple[str, str]],
                   fixed: Binding) -> Iterator[dict]:
    ids = list(values_by_choice)
    for combo in itertools.product(*(values_by_choice[c] for c in ids)):
        b = dict(fixed)
        b.update(zip(ids, combo))
        if all(b[lo] <= b[hi] for lo, hi in pairs
               if lo in b and hi in b):
            yield b


def enumerate_bindings(spec: InterfaceSpec, interaction: Interaction,
                       cap: int = DEFAULT_BINDING_CAP) -> Iterator[dict]:
    """Cross product of the interaction's choice domains.

    Other choices in the view are held at their domain's first value.
    Range pairs (lo, hi) sharing a Between predicate are constrained to
    lo <= hi. Raises DomainExplosion when the unconstrained product
    exceeds ``cap``.
    """
    view = spec.view(interaction.view)
    choices = plan_choices(view.plan)
    target = sorted(interaction.bound_choices)
    product = 1
    for cid in target:
        product *= len(choices[cid].iter_values())
        if product > cap:
            raise DomainExplosion(
                f"interaction {interaction.name!r}: cross product exceeds {cap}")
    fixed = {cid: info.first() for cid, info in sorted(choices.items())
             if cid not in interaction.bound_choices}
    values = {cid: choices[cid].iter_values() for cid in target}
    yield from _ordered_valid(values, range_pairs(view.plan), fixed)


def count_bindings(spec: InterfaceSpec, interaction: Interaction,
                   cap: int = DEFAULT_BINDING_CAP) -> int:
    return sum(1 for _ in enumerate_bindings(spec, interaction, cap))


def sample_bindings(spec: InterfaceSpec, interaction: Interaction,
                    n: int, seed: int) -> list[dict]:
    """Seeded uniform sample of valid bindings (with replacement)."""
    view = spec.view(interaction.view)
    choices = plan_choices(view.plan)
    target = sorted(interaction.bound_choices)
    pairs = [p for p in range_pairs(view.plan)
             if p[0] in interaction.bound_choices
             and p[1] in interaction.bound_choices]
    fixed = {cid: info.first() for cid, info in sorted(choices.items())
             if cid not in interaction.bound_choices}
    rng = random.Random(seed)
    out: list[dict] = []
    guard = 0
    while len(out) < n:
        guard += 1
        if guard > 1000 * n:
            raise DomainExplosion(
                f"interaction {interaction.name!r}: rejection sampling stalled")
        b = dict(fixed)
        for cid in target:
            vals = choices[cid].iter_values()
            b[cid] = vals[rng.randrange(len(vals))]
        if all(b[lo] <= b[hi] for lo, hi in pairs):
            out.append(b)
    return out


def choice_dependencies(spec: InterfaceSpec) -> dict[str, frozenset]:
    """Per choice, the plan nodes whose output can change with it.

    Node ids are ``view_name:path``; the set is ancestor-closed (the
    anchor node and everything above it).
    """
    out: dict[str, frozenset] = {}
    for view in spec.views:
        for cid, info in plan_choices(view.plan).items():
            anchor = info.anchor
            deps = set()
            # every prefix of the anchor path that is itself a node id
            parts = anchor.split(".")
            for k in range(1, len(parts) + 1):
                deps.add(f"{view.name}:{'.'.join(parts[:k])}")
            out[cid] = frozenset(deps)
    return out


# ---------------------------------------------------------------------------
# JSON serialization


def _operand_to_json(op: Operand | None):
    if op is None:
        return None
    if isinstance(op, LiteralChoice):
        return {"choice": {"id": op.choice_id,
                           "domain": _domain_to_json(op.domain)}}
    return {"lit": op}


def _domain_to_json(domain: Domain) -> dict:
    if isinstance(domain, EnumDomain):
        return {"type": "enum", "values": list(domain.values)}
    return {"type": "interval", "lo": domain.lo, "hi": domain.hi,
            "step": domain.step}


def _pred_to_json(pred: Predicate) -> dict:
    if isinstance(pred, Eq):
        return {"kind": "eq", "column": pred.column,
                "value": _operand_to_json(pred.value)}
    if isinstance(pred, Between):
        return {"kind": "between", "column": pred.column,
                "lo": _operand_to_json(pred.lo),
                "hi": _operand_to_json(pred.hi)}
    return {"kind": "and", "preds": [_pred_to_json(p) for p in pred.preds]}


def node_to_json(node: PlanNode) -> dict:
    if isinstance(node, Scan):
        return {"op": "scan", "relation": node.relation}
    if isinstance(node, Filter):
        return {"op": "filter", "pred": _pred_to_json(node.pred),
                "input": node_to_json(node.input)}
    if isinstance(node, Project):
        return {"op": "project", "columns": list(node.columns),
                "input": node_to_json(node.input)}
    if isinstance(node, GroupByAgg):
        return {"op": "groupby", "keys": list(node.keys),
                "aggs": [{"func": a.func, "column": a.column, "as": a.name}
                         for a in node.aggs],
                "input": node_to_json(node.input)}
    if isinstance(node, Join):
        return {"op": "join", "left": node_to_json(node.left),
                "right": node_to_json(node.right),
                "on": [list(p) for p in node.on],
                "max_fanout": node.max_fanout}
    if isinstance(node, SubplanChoice):
        return {"op": "choice", "id": node.choice_id,
                "alternatives": [node_to_json(a) for a in node.alternatives]}
    if isinstance(node, Hole):
        return {"op": "hole"}
    raise TypeError(f"unknown node {node!r}")


def _operand_from_json(obj):
    if obj is None:
        return None
    if "choice" in obj:
        c = obj["choice"]
        return LiteralChoice(c["id"], _domain_from_json(c["domain"]))
    return obj["lit"]


def _domain_from_json(obj: dict) -> Domain:
    if obj["type"] == "enum":
        return EnumDomain(tuple(obj["values"]))
    return IntervalDomain(obj["lo"], obj["hi"], obj.get("step", 1))


def _pred_from_json(obj: dict) -> Predicate:
    kind = obj["kind"]
    if kind == "eq":
        return Eq(obj["column"], _operand_from_json(obj["value"]))
    if kind == "between":
        return Between(obj["column"], _operand_from_json(obj.get("lo")),
                       _operand_from_json(obj.get("hi")))
    if kind == "and":
        return And(tuple(_pred_from_json(p) for p in obj["preds"]))
    raise ValueError(f"unknown predicate kind {kind!r}")


def node_from_json(obj: dict) -> PlanNode:
    op = obj["op"]
    if op == "scan":
        return Scan(obj["relation"])
    if op == "filter":
        return Filter(_pred_from_json(obj["pred"]), node_from_json(obj["input"]))
    if op == "project":
        return Project(obj["columns"], node_from_json(obj["input"]))
    if op == "groupby":
        aggs = [AggSpec(a["func"], a.get("column"), a["as"])
                for a in obj["aggs"]]
        return GroupByAgg(obj["keys"], aggs, node_from_json(obj["input"]))
    if op == "join":
        return Join(node_from_json(obj["left"]), node_from_json(obj["right"]),
                    [tuple(p) for p in obj["on"]], obj.get("max_fanout"))
    if op == "choice":
        return SubplanChoice(obj["id"],
                             [node_from_json(a) for a in obj["alternatives"]])
    if op == "hole":
        return Hole()
    raise ValueError(f"unknown plan op {op!r}")


def spec_to_json(spec: InterfaceSpec) -> dict:
    return {
        "spec_version": SPEC_VERSION,
        "sources": [{"relation": s.relation, "path": s.path,
                     "schema": [list(c) for c in s.schema]}
                    for s in spec.sources],
        "views": [{"name": v.name, "plan": node_to_json(v.plan)}
                  for v in spec.views],
        "interactions": [{"name": i.name, "view": i.view,
                          "bound_choices": sorted(i.bound_choices),
                          "kind": i.kind,
                          "latency_bound_ms": i.latency_bound_ms}
                         for i in spec.interactions],
    }


def spec_from_json(obj: dict) -> InterfaceSpec:
    version = obj.get("spec_version")
    if version != SPEC_VERSION:
        raise ValueError(f"unsupported spec_version {version!r}")
    sources = [SourceDecl(s["relation"], s["path"],
                          [tuple(c) for c in s["schema"]])
               for s in obj["sources"]]
    views = [View(v["name"], node_from_json(v["plan"])) for v in obj["views"]]
    interactions = [Interaction(i["name"], i["view"], i["bound_choices"],
                                i["kind"], i["latency_bound_ms"])
                    for i in obj["interactions"]]
    return InterfaceSpec(sources, views, interactions)


def load_spec(path: str) -> InterfaceSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(json.load(fh))


def save_spec(spec: InterfaceSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_json(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
