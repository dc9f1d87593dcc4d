"""Brute-force evaluator for concrete plans.

Every operator is evaluated by naive iteration, bottom-up. The output
is canonical (group-by results sort by their key tuple), so this is the
ground truth any rewritten physical plan must reproduce exactly.

Null semantics mirror common SQL: nulls never match equality or range
predicates, never match join keys, and are excluded from aggregates.
count(*) counts rows. Empty inputs aggregate to empty outputs, even
without group keys.
"""

from __future__ import annotations

from typing import Mapping

from .errors import PlanTypeError, UnboundChoice, UnknownRelation
from .plan import (Between, Eq, Filter, GroupByAgg, Hole, Join,
                   LiteralChoice, PlanNode, Predicate, Project, Scan,
                   SubplanChoice, flatten_pred)
from .relation import Relation, Scalar, scalar_type, sort_key


def _check_operand(op, col_type: str, column: str):
    if isinstance(op, LiteralChoice):
        raise UnboundChoice(op.choice_id)
    if op is not None and scalar_type(op) != col_type:
        raise PlanTypeError(
            f"{op!r} ({scalar_type(op)}) compared against {col_type} "
            f"column {column!r}")


def _pred_fn(pred: Predicate, rel: Relation):
    """Compile a predicate into a row-index test over ``rel``."""
    atoms = []
    for p in flatten_pred(pred):
        idx = rel.col_index(p.column)
        ctype = rel.schema[idx][1]
        col = rel.columns[idx]
        if isinstance(p, Eq):
            _check_operand(p.value, ctype, p.column)
            value = p.value
            atoms.append(lambda i, col=col, value=value:
                         col[i] is not None and col[i] == value)
        elif isinstance(p, Between):
            _check_operand(p.lo, ctype, p.column)
            _check_operand(p.hi, ctype, p.column)
            lo, hi = p.lo, p.hi
            atoms.append(lambda i, col=col, lo=lo, hi=hi:
                         col[i] is not None
                         and (lo is None or col[i] >= lo)
                         and (hi is None or col[i] <= hi))
        else:
            raise PlanTypeError(f"unexpected predicate {p!r}")

    def test(i: int) -> bool:
        return all(a(i) for a in atoms)

    return test


class _Acc:
    """Aggregate accumulator for one group."""

    __slots__ = ("count", "sums", "nonnull", "mins", "maxs")

    def __init__(self, n_cols: int):
        self.count = 0
        self.sums = [0] * n_cols
        self.nonnull = [0] * n_cols
        self.mins: list[Scalar] = [None] * n_cols
        self.maxs: list[Scalar] = [None] * n_cols


def _eval_groupby(node: GroupByAgg, rel: Relation) -> Relation:
    key_idx = [rel.col_index(k) for k in node.keys]
    agg_cols = sorted({a.column for a in node.aggs if a.column is not None})
    agg_idx = {c: j for j, c in enumerate(agg_cols)}
    col_pos = [rel.col_index(c) for c in agg_cols]

    groups: dict[tuple, _Acc] = {}
    for i in range(rel.row_count):
        key = tuple(rel.columns[j][i] for j in key_idx)
        acc = groups.get(key)
        if acc is None:
            acc = groups[key] = _Acc(len(agg_cols))
        acc.count += 1
        for j, pos in enumerate(col_pos):
            v = rel.columns[pos][i]
            if v is None:
                continue
            acc.nonnull[j] += 1
            acc.sums[j] += v
            if acc.mins[j] is None or v < acc.mins[j]:
                acc.mins[j] = v
            if acc.maxs[j] is None or v > acc.maxs[j]:
                acc.maxs[j] = v

    ordered = sorted(groups.items(),
                     key=lambda kv: tuple(sort_key(v) for v in kv[0]))
    out_schema = []
    inner = dict(rel.schema)
    for k in node.keys:
        out_schema.append((k, inner[k]))
    for a in node.aggs:
        if a.func == "count":
            out_schema.append((a.name, "int64"))
        elif a.func == "avg":
            out_schema.append((a.name, "float64"))
        else:
            out_schema.append((a.name, inner[a.column]))

    cols: list[list] = [[] for _ in out_schema]
    for key, acc in ordered:
        row = list(key)
        for a in node.aggs:
            if a.func == "count":
                row.append(acc.count)
                continue
            j = agg_idx[a.column]
            if acc.nonnull[j] == 0:
                row.append(None)
            elif a.func == "sum":
                row.append(acc.sums[j])
            elif a.func == "avg":
                row.append(acc.sums[j] / acc.nonnull[j])
            elif a.func == "min":
                row.append(acc.mins[j])
            else:
                row.append(acc.maxs[j])
        for c, v in zip(cols, row):
            c.append(v)
    return Relation("groupby", out_schema, cols)


def _eval_join(node: Join, left: Relation, right: Relation) -> Relation:
    lkeys = [left.col_index(a) for a, _ in node.on]
    rkeys = [right.col_index(b) for _, b in node.on]
    right_key_names = {b for _, b in node.on}
    keep_right = [j for j, (c, _) in enumerate(right.schema)
                  if c not in right_key_names]
    out_schema = list(left.schema) + [right.schema[j] for j in keep_right]
    seen = {c for c, _ in left.schema}
    for j in keep_right:
        c = right.schema[j][0]
        if c in seen:
            raise PlanTypeError(f"join output column collision: {c!r}")
    cols: list[list] = [[] for _ in out_schema]
    nleft = len(left.schema)
    for i in range(left.row_count):
        lkey = [left.columns[k][i] for k in lkeys]
        if any(v is None for v in lkey):
            continue
        for j in range(right.row_count):
            if all(right.columns[rk][j] == kv
                   for rk, kv in zip(rkeys, lkey)):
                for c in range(nleft):
                    cols[c].append(left.columns[c][i])
                for c, rj in enumerate(keep_right):
                    cols[nleft + c].append(right.columns[rj][j])
    return Relation("join", out_schema, cols)


def oracle_eval(plan: PlanNode, db: Mapping[str, Relation],
                hole: Relation | None = None) -> Relation:
    """Evaluate a concrete plan by naive iteration.

    ``hole`` supplies the input for a Hole node when evaluating the
    residual fragment of a rewrite.
    """
    if isinstance(plan, Scan):
        if plan.relation not in db:
            raise UnknownRelation(plan.relation)
        return db[plan.relation]
    if isinstance(plan, Hole):
        if hole is None:
            raise ValueError("plan contains a hole but no input was supplied")
        return hole
    if isinstance(plan, SubplanChoice):
        raise UnboundChoice(plan.choice_id)
    if isinstance(plan, Filter):
        rel = oracle_eval(plan.input, db, hole)
        test = _pred_fn(plan.pred, rel)
        keep = [i for i in range(rel.row_count) if test(i)]
        return rel.take(keep, "filter")
    if isinstance(plan, Project):
        rel = oracle_eval(plan.input, db, hole)
        idx = [rel.col_index(c) for c in plan.columns]
        return Relation("project", [rel.schema[i] for i in idx],
                        [rel.columns[i] for i in idx])
    if isinstance(plan, GroupByAgg):
        return _eval_groupby(plan, oracle_eval(plan.input, db, hole))
    if isinstance(plan, Join):
        return _eval_join(plan, oracle_eval(plan.left, db, hole),
                          oracle_eval(plan.right, db, hole))
    raise TypeError(f"unknown node {plan!r}")
