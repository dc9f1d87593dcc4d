"""Data-structure library: scan, hash index, sorted range index, cube.

Each structure is a (match, build, eval, estimate) quadruple:

* ``match`` finds subplans of a view plan the structure can replace,
* ``build`` turns the subplan's input table into an encoded payload,
* ``eval`` answers a bound query from the payload alone,
* ``estimate`` predicts build/eval cost and size from statistics.

The cube stores inclusive prefix aggregates over its dimension grid, so
any axis-aligned range aggregate needs at most 2**d cell reads per
output group regardless of the selected range. min/max measures are
stored as plain cells (they do not telescope) and answered by scanning
the selected box.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from itertools import product as iter_product
from typing import Mapping, Sequence, Union

import numpy as np

from .codec import (KIND_TAGS, PayloadParts, decode_relation, encode_relation,
                    fingerprint, pack_payload, unpack_payload)
from .errors import CapExceeded, OutOfDomain, StaleStructure, UnboundChoice
from .plan import (AggSpec, Between, Eq, Filter, GroupByAgg, Hole,
                   LiteralChoice, PlanNode, Scan,
                   _operand_from_json, _operand_to_json, combine_preds,
                   flatten_pred, iter_nodes, replace_node)
from .relation import ColumnStats, Relation, RelationStats

DEFAULT_CUBE_CELL_CAP = 10 ** 8

_EXACT_INT_LIMIT = 2 ** 53  # int sums flow through float64 bincount weights

Operand = Union[int, float, str, bool, LiteralChoice]


# ---------------------------------------------------------------------------
# Kinds


@dataclass(frozen=True)
class BaseScanKind:
    family = "base_scan"


@dataclass(frozen=True)
class HashIndexKind:
    key_column: str
    probe: Operand = None
    family = "hash_index"


@dataclass(frozen=True)
class SortedRangeIndexKind:
    sort_column: str
    lo: Operand | None = None
    hi: Operand | None = None
    family = "sorted_range_index"


@dataclass(frozen=True)
class DimSpec:
    column: str
    role: str  # "group" | "range"
    lo: Operand | None = None
    hi: Operand | None = None


@dataclass(frozen=True)
class PrefixSumCubeKind:
    dim_specs: tuple
    measures: tuple
    group_keys: tuple
    family = "prefix_sum_cube"

    def __init__(self, dim_specs: Sequence[DimSpec],
                 measures: Sequence[AggSpec],
                 group_keys: Sequence[str]):
        object.__setattr__(self, "dim_specs", tuple(dim_specs))
        object.__setattr__(self, "measures", tuple(measures))
        object.__setattr__(self, "group_keys", tuple(group_keys))

    @property
    def dims(self) -> tuple:
        return tuple(d.column for d in self.dim_specs)


StructureKind = Union[BaseScanKind, HashIndexKind, SortedRangeIndexKind,
                      PrefixSumCubeKind]

FAMILIES = ("base_scan", "hash_index", "sorted_range_index",
            "prefix_sum_cube")


@dataclass(frozen=True)
class BuiltStructure:
    kind: StructureKind
    payload: bytes
    source_fingerprint: int
    size_bytes: int
    build_binding: tuple  # ((choice_id, value), ...) baked into the input


# ---------------------------------------------------------------------------
# Matching


@dataclass(frozen=True)
class MatchResult:
    """A subplan a structure can replace.

    ``build_plan`` is the subplan whose output feeds build(); choice
    predicates listed in ``build_choices`` remain inside it and are
    bound at build time. ``residual`` is the rest of the view plan with
    a Hole at the matched position (None when the match is the root).
    """

    matched_node: str
    kind: StructureKind
    residual: PlanNode | None
    build_plan: PlanNode
    build_choices: frozenset
    eval_choices: frozenset


def _inside_alternative(node_id: str) -> bool:
    return any(part.startswith("a") and part[1:].isdigit()
               for part in node_id.split(".")[1:])


def _chain_below(node):
    """Filters-only descent from ``node``'s input down to a Scan.

    Returns (scan, [filters top-down]) or None when the shape differs.
    """
    filters = []
    cur = node.input
    while isinstance(cur, Filter):
        filters.append(cur)
        cur = cur.input
    if isinstance(cur, Scan):
        return cur, filters
    return None


def _residual_for(root: PlanNode, node_id: str) -> PlanNode | None:
    if node_id == "$":
        return None
    return replace_node(root, node_id, Hole())


def _chain_classify(filters):
    """Split chain predicates into build atoms and range-choice atoms."""
    build_atoms = []
    range_atoms = []  # (column, lo_operand, hi_operand)
    eq_choice_ids = []
    for f in filters:
        for p in flatten_pred(f.pred):
            if isinstance(p, Eq):
                build_atoms.append(p)
                if isinstance(p.value, LiteralChoice):
                    eq_choice_ids.append(p.value.choice_id)
            elif isinstance(p, Between):
                if isinstance(p.lo, LiteralChoice) or isinstance(p.hi, LiteralChoice):
                    range_atoms.append(p)
                else:
                    build_atoms.append(p)
            else:
                return None
    return build_atoms, range_atoms, eq_choice_ids


def _build_plan_from(scan: Scan, atoms) -> PlanNode:
    node: PlanNode = Scan(scan.relation)
    pred = combine_preds(atoms)
    if pred is not None:
        node = Filter(pred, node)
    return node


def _operand_choice_ids(*ops) -> list[str]:
    return [op.choice_id for op in ops if isinstance(op, LiteralChoice)]


def _null_free(stats, relation: str, columns) -> bool:
    if stats is None:
        return True
    rel_stats = stats.get(relation)
    if rel_stats is None:
        return True
    for c in columns:
        cs = rel_stats.columns.get(c)
        if cs is not None and cs.null_count > 0:
            return False
    return True


def match(family: str, plan: PlanNode,
          stats: Mapping[str, RelationStats] | None = None,
          ) -> list[MatchResult]:
    """MatchResults for one structure family over a view plan.

    Subtrees under subplan choices are not matched; they execute via the
    baseline or residual paths.
    """
    out: list[MatchResult] = []
    for nid, node in iter_nodes(plan):
        if _inside_alternative(nid):
            continue
        if family == "base_scan" and isinstance(node, Scan):
            out.append(MatchResult(nid, BaseScanKind(), _residual_for(plan, nid),
                                   Scan(node.relation), frozenset(), frozenset()))
        elif family == "hash_index" and isinstance(node, Filter):
            atoms = flatten_pred(node.pred)
            if len(atoms) != 1 or not isinstance(atoms[0], Eq):
                continue
            eq = atoms[0]
            if not isinstance(eq.value, LiteralChoice):
                continue
            chain = _chain_below(node)
            if chain is None:
                continue
            scan, below = chain
            classified = _chain_classify(below)
            if classified is None or classified[1]:
                continue  # range choices below would go stale silently
            build_atoms, _, eq_ids = classified
            out.append(MatchResult(
                nid, HashIndexKind(eq.column, eq.value),
                _residual_for(plan, nid),
                _build_plan_from(scan, build_atoms),
                frozenset(eq_ids), frozenset([eq.value.choice_id])))
        elif family == "sorted_range_index" and isinstance(node, Filter):
            atoms = flatten_pred(node.pred)
            if len(atoms) != 1 or not isinstance(atoms[0], Between):
                continue
            rng = atoms[0]
            ids = _operand_choice_ids(rng.lo, rng.hi)
            if not ids:
                continue
            chain = _chain_below(node)
            if chain is None:
                continue
            scan, below = chain
            classified = _chain_classify(below)
            if classified is None or classified[1]:
                continue
            build_atoms, _, eq_ids = classified
            out.append(MatchResult(
                nid, SortedRangeIndexKind(rng.column, rng.lo, rng.hi),
                _residual_for(plan, nid),
                _build_plan_from(scan, build_atoms),
                frozenset(eq_ids), frozenset(ids)))
        elif family == "prefix_sum_cube" and isinstance(node, GroupByAgg):
            m = _match_cube(plan, nid, node, stats)
            if m is not None:
                out.append(m)
    return out


def _match_cube(plan: PlanNode, nid: str, node: GroupByAgg, stats):
    chain = _chain_below(node)
    if chain is None:
        return None
    scan, filters = chain
    classified = _chain_classify(filters)
    if classified is None:
        return None
    build_atoms, range_atoms, eq_ids = classified
    if not node.keys and not range_atoms:
        return None  # dimensionless cube adds nothing over the input
    for agg in node.aggs:
        if agg.func not in ("count", "sum", "min", "max", "avg"):
            return None
    range_cols = []
    dim_specs = [DimSpec(k, "group") for k in node.keys]
    for p in range_atoms:
        if p.column in node.keys or p.column in range_cols:
            return None  # conflicting roles for one column
        range_cols.append(p.column)
        dim_specs.append(DimSpec(p.column, "range", p.lo, p.hi))
    measure_cols = [a.column for a in node.aggs if a.column is not None]
    if not _null_free(stats, scan.relation,
                      list(node.keys) + range_cols + measure_cols):
        return None  # null group keys / measures do not survive the encoding
    eval_ids = []
    for p in range_atoms:
        eval_ids.extend(_operand_choice_ids(p.lo, p.hi))
    return MatchResult(
        nid, PrefixSumCubeKind(dim_specs, node.aggs, node.keys),
        _residual_for(plan, nid),
        _build_plan_from(scan, build_atoms),
        frozenset(eq_ids), frozenset(eval_ids))


def match_all(plan: PlanNode,
              stats: Mapping[str, RelationStats] | None = None,
              families: Sequence[str] = FAMILIES) -> list[MatchResult]:
    out: list[MatchResult] = []
    for family in families:
        out.extend(match(family, plan, stats))
    return out


# ---------------------------------------------------------------------------
# Building


def _dtype_for(col_type: str) -> str:
    return "<i8" if col_type == "int64" else "<f8"


def _measure_arrays(measures) -> list[tuple[str, str | None]]:
    """(op, column) array descriptors, count first, deduplicated."""
    needed: list[tuple[str, str | None]] = [("count", None)]
    for m in measures:
        if m.func == "count":
            continue
        key = ("sum", m.column) if m.func in ("sum", "avg") else (m.func, m.column)
        if key not in needed:
            needed.append(key)
    return needed


def _kind_param_bytes(kind: StructureKind) -> bytes:
    return json.dumps(kind_to_json(kind), sort_keys=True).encode("utf-8")


def build(kind: StructureKind, input_rel: Relation,
          build_binding: Mapping[str, object] | None = None,
          cube_cell_cap: int = DEFAULT_CUBE_CELL_CAP) -> BuiltStructure:
    """Encode ``input_rel`` as the given structure.

    ``build_binding`` records choice values already baked into the
    input (eval raises StaleStructure when they change). Identical
    inputs produce identical payload bytes and fingerprints.
    """
    binding_items = tuple(sorted((build_binding or {}).items()))
    rel_bytes = encode_relation(input_rel)
    fp = fingerprint(rel_bytes, _kind_param_bytes(kind),
                     repr(binding_items).encode("utf-8"))
    meta = {
        "kind": kind_to_json(kind),
        "build_binding": [[k, v] for k, v in binding_items],
        "schema": [list(c) for c in input_rel.schema],
    }
    if isinstance(kind, BaseScanKind):
        payload = _pack(kind, meta, rel_bytes, fp, dims=0, arrays=0)
    elif isinstance(kind, HashIndexKind):
        payload = _build_hash(kind, input_rel, rel_bytes, meta, fp)
    elif isinstance(kind, SortedRangeIndexKind):
        payload = _build_sorted(kind, input_rel, rel_bytes, meta, fp)
    elif isinstance(kind, PrefixSumCubeKind):
        payload = _build_cube(kind, input_rel, meta, fp, cube_cell_cap)
    else:
        raise TypeError(f"unknown kind {kind!r}")
    return BuiltStructure(kind, payload, fp, len(payload), binding_items)


def _pack(kind, meta, data: bytes, fp: int, dims: int, arrays: int) -> bytes:
    return pack_payload(PayloadParts(KIND_TAGS[kind.family], dims, arrays,
                                     meta, data, fp))


def _build_hash(kind: HashIndexKind, rel: Relation, rel_bytes: bytes,
                meta: dict, fp: int) -> bytes:
    col = rel.col(kind.key_column)
    pairs = sorted((v, i) for i, v in enumerate(col) if v is not None)
    keys: list = []
    offsets = [0]
    perm = []
    for v, i in pairs:
        if not keys or v != keys[-1]:
            keys.append(v)
            offsets.append(offsets[-1])
        perm.append(i)
        offsets[-1] += 1
    meta["keys"] = keys
    meta["offsets"] = offsets
    meta["rel_len"] = len(rel_bytes)
    perm_arr = np.asarray(perm, dtype="<i8").tobytes()
    return _pack(kind, meta, rel_bytes + perm_arr, fp, dims=1, arrays=1)


def _build_sorted(kind: SortedRangeIndexKind, rel: Relation, rel_bytes: bytes,
                  meta: dict, fp: int) -> bytes:
    col = rel.col(kind.sort_column)
    perm = [i for _, i in sorted((v, i) for i, v in enumerate(col)
                                 if v is not None)]
    meta["rel_len"] = len(rel_bytes)
    perm_arr = np.asarray(perm, dtype="<i8").tobytes()
    return _pack(kind, meta, rel_bytes + perm_arr, fp, dims=1, arrays=1)


def _build_cube(kind: PrefixSumCubeKind, rel: Relation, meta: dict,
                fp: int, cell_cap: int) -> bytes:
    n = rel.row_count
    dim_values: list[list] = []
    idx_arrays: list[np.ndarray] = []
    for spec in kind.dim_specs:
        col = rel.col(spec.column)
        if any(v is None for v in col):
            raise ValueError(f"cube dimension {spec.column!r} contains nulls")
        values = sorted(set(col))
        index = {v: i for i, v in enumerate(values)}
        dim_values.append(values)
        idx_arrays.append(np.fromiter((index[v] for v in col),
                                      dtype=np.int64, count=n))
    shape = tuple(max(len(v), 1) for v in dim_values)
    cells = 1
    for c in shape:
        cells *= c
    if cells > cell_cap:
        raise CapExceeded(cells, cell_cap)

    if n:
        flat = np.ravel_multi_index(tuple(idx_arrays), shape)
    else:
        flat = np.zeros(0, dtype=np.int64)
    schema = dict(rel.schema)
    arrays = _measure_arrays(kind.measures)
    blobs: list[bytes] = []
    array_meta = []
    for op, column in arrays:
        if op == "count":
            grid = np.bincount(flat, minlength=cells).astype("<i8").reshape(shape)
            grid = _prefix(grid)
            dtype, role = "<i8", "prefix"
        elif op == "sum":
            vals = rel.col(column)
            if any(v is None for v in vals):
                raise ValueError(f"cube measure {column!r} contains nulls")
            weights = np.asarray(vals, dtype=np.float64)
            summed = np.bincount(flat, weights=weights, minlength=cells)
            if schema[column] == "int64":
                if np.any(np.abs(summed) >= _EXACT_INT_LIMIT):
                    raise ValueError(f"integer sums over {column!r} overflow "
                                     f"the exact range")
                grid = np.rint(summed).astype("<i8").reshape(shape)
            else:
                grid = summed.astype("<f8").reshape(shape)
            grid = _prefix(grid)
            dtype = _dtype_for(schema[column])
            role = "prefix"
        else:  # min / max, plain cells
            vals = rel.col(column)
            if any(v is None for v in vals):
                raise ValueError(f"cube measure {column!r} contains nulls")
            if schema[column] == "int64":
                info = np.iinfo(np.int64)
                fill = info.max if op == "min" else info.min
                grid = np.full(shape, fill, dtype="<i8")
                data = np.asarray(vals, dtype=np.int64)
            else:
                fill = np.inf if op == "min" else -np.inf
                grid = np.full(shape, fill, dtype="<f8")
                data = np.asarray(vals, dtype=np.float64)
            ufunc = np.minimum if op == "min" else np.maximum
            ufunc.at(grid, tuple(idx_arrays), data)
            dtype = _dtype_for(schema[column])
            role = "cells"
        blobs.append(np.ascontiguousarray(grid).tobytes())
        array_meta.append({"op": op, "column": column, "dtype": dtype,
                           "role": role})
    meta["dim_values"] = dim_values
    meta["shape"] = list(shape)
    meta["arrays"] = array_meta
    return _pack(kind, meta, b"".join(blobs), fp,
                 dims=len(kind.dim_specs), arrays=len(arrays))


def _prefix(grid: np.ndarray) -> np.ndarray:
    for axis in range(grid.ndim):
        grid = np.cumsum(grid, axis=axis)
    return grid


# ---------------------------------------------------------------------------
# Loading and evaluation


class LoadedStructure:
    """Decoded runtime form of a BuiltStructure, cheap to evaluate."""

    def __init__(self, built: BuiltStructure):
        self.built = built
        self.kind = built.kind
        parts = unpack_payload(built.payload)
        self.meta = parts.meta
        self.build_binding = dict((k, v) for k, v in parts.meta["build_binding"])
        kind = built.kind
        if isinstance(kind, BaseScanKind):
            self.relation = decode_relation(parts.data, "base")
        elif isinstance(kind, (HashIndexKind, SortedRangeIndexKind)):
            rel_len = parts.meta["rel_len"]
            self.relation = decode_relation(parts.data[:rel_len], "indexed")
            self.perm = np.frombuffer(parts.data[rel_len:], dtype="<i8")
            if isinstance(kind, HashIndexKind):
                self.keys = parts.meta["keys"]
                self.offsets = parts.meta["offsets"]
            else:
                col = self.relation.col(kind.sort_column)
                self.sorted_keys = [col[i] for i in self.perm]
        elif isinstance(kind, PrefixSumCubeKind):
            self._load_cube(parts)
        else:
            raise TypeError(f"unknown kind {kind!r}")

    def _load_cube(self, parts: PayloadParts):
        meta = parts.meta
        self.shape = tuple(meta["shape"])
        self.dim_values = [list(v) for v in meta["dim_values"]]
        cells = 1
        for c in self.shape:
            cells *= c
        self.prefix_padded: dict[tuple, np.ndarray] = {}
        self.cell_arrays: dict[tuple, np.ndarray] = {}
        offset = 0
        raw_count = None
        for am in meta["arrays"]:
            arr = np.frombuffer(parts.data, dtype=am["dtype"], count=cells,
                                offset=offset).reshape(self.shape)
            offset += cells * 8
            key = (am["op"], am["column"])
            if am["role"] == "prefix":
                padded = np.zeros(tuple(c + 1 for c in self.shape),
                                  dtype=arr.dtype)
                padded[tuple(slice(1, None) for _ in self.shape)] = arr
                self.prefix_padded[key] = padded
                if am["op"] == "count":
                    raw = arr
                    for axis in range(raw.ndim):
                        raw = np.diff(raw, axis=axis, prepend=0)
                    raw_count = raw
            else:
                self.cell_arrays[key] = arr
        self.raw_count = raw_count

    # -- cube internals ----------------------------------------------------

    def range_total(self, key: tuple, windows: Sequence[tuple[int, int]]):
        """Inclusive-index box total of one prefix array via 2**d corner reads."""
        padded = self.prefix_padded[key]
        total = padded.dtype.type(0)
        for corner in iter_product(*(((lo, -1), (hi + 1, 1))
                                     for lo, hi in windows)):
            idx = tuple(c[0] for c in corner)
            sign = 1
            for c in corner:
                sign *= c[1]
            total = total + sign * padded[idx]
        return total

    def evaluate(self, binding: Mapping[str, object]) -> Relation:
        return eval_structure(self, binding)


def load(built: BuiltStructure) -> LoadedStructure:
    return LoadedStructure(built)


def structure_from_payload(payload: bytes) -> BuiltStructure:
    """Rehydrate a BuiltStructure from its on-disk payload bytes.

    The payload is self-describing: kind parameters and the baked
    binding live in the meta block, the fingerprint in the header.
    """
    parts = unpack_payload(payload)
    kind = kind_from_json(parts.meta["kind"])
    binding_items = tuple((k, v) for k, v in parts.meta["build_binding"])
    return BuiltStructure(kind, payload, parts.fingerprint, len(payload),
                          binding_items)


def _resolve(op: Operand | None, binding: Mapping[str, object]):
    if isinstance(op, LiteralChoice):
        if op.choice_id not in binding:
            raise UnboundChoice(op.choice_id)
        v = binding[op.choice_id]
        if not op.domain.contains(v):
            raise OutOfDomain(op.choice_id, v)
        return v
    return op


def _check_stale(loaded: LoadedStructure, binding: Mapping[str, object]):
    for cid, baked in loaded.build_binding.items():
        if cid in binding and binding[cid] != baked:
            raise StaleStructure(
                f"choice {cid!r} changed from baked value {baked!r} "
                f"to {binding[cid]!r}; rebuild required")


def eval_structure(structure: BuiltStructure | LoadedStructure,
                   binding: Mapping[str, object]) -> Relation:
    """Answer the matched subplan under ``binding`` from the structure."""
    loaded = structure if isinstance(structure, LoadedStructure) \
        else LoadedStructure(structure)
    _check_stale(loaded, binding)
    kind = loaded.kind
    if isinstance(kind, BaseScanKind):
        return loaded.relation
    if isinstance(kind, HashIndexKind):
        probe = _resolve(kind.probe, binding)
        i = bisect_left(loaded.keys, probe)
        if i >= len(loaded.keys) or loaded.keys[i] != probe:
            return loaded.relation.take([], "probe")
        rows = loaded.perm[loaded.offsets[i]:loaded.offsets[i + 1]]
        return loaded.relation.take(list(rows), "probe")
    if isinstance(kind, SortedRangeIndexKind):
        lo = _resolve(kind.lo, binding)
        hi = _resolve(kind.hi, binding)
        keys = loaded.sorted_keys
        start = 0 if lo is None else bisect_left(keys, lo)
        stop = len(keys) if hi is None else bisect_right(keys, hi)
        rows = sorted(loaded.perm[start:stop])
        return loaded.relation.take(rows, "range")
    if isinstance(kind, PrefixSumCubeKind):
        return _eval_cube(loaded, kind, binding)
    raise TypeError(f"unknown kind {kind!r}")


def _box_totals(loaded: LoadedStructure, key: tuple,
                windows, group_axes: set) -> np.ndarray:
    """Per-group box totals of one prefix array, all groups at once.

    Group axes contribute a full slice per corner (their per-index
    difference), range axes a scalar corner; 2**d gathers total.
    """
    padded = loaded.prefix_padded[key]
    d = padded.ndim
    total = None
    for bits in iter_product((0, 1), repeat=d):
        sel = []
        sign = 1
        for axis, bit in enumerate(bits):
            lo, hi = windows[axis]
            if axis in group_axes:
                sel.append(slice(1, padded.shape[axis]) if bit
                           else slice(0, padded.shape[axis] - 1))
            else:
                sel.append(hi + 1 if bit else lo)
            if not bit:
                sign = -sign
        term = np.asarray(padded[tuple(sel)])
        part = term if sign > 0 else -term
        total = part.copy() if total is None else total + part
    return total


def _eval_cube(loaded: LoadedStructure, kind: PrefixSumCubeKind,
               binding: Mapping[str, object]) -> Relation:
    schema = dict((c, t) for c, t in loaded.meta["schema"])
    windows: list[tuple[int, int]] = []
    group_axes: list[int] = []
    for axis, spec in enumerate(kind.dim_specs):
        values = loaded.dim_values[axis]
        if spec.role == "group":
            windows.append((0, len(values) - 1))
            group_axes.append(axis)
        else:
            lo = _resolve(spec.lo, binding)
            hi = _resolve(spec.hi, binding)
            lo_i = 0 if lo is None else bisect_left(values, lo)
            hi_i = len(values) - 1 if hi is None else bisect_right(values, hi) - 1
            windows.append((lo_i, hi_i))

    out_schema: list[tuple[str, str]] = []
    for k in kind.group_keys:
        out_schema.append((k, schema[k]))
    for a in kind.measures:
        if a.func == "count":
            out_schema.append((a.name, "int64"))
        elif a.func == "avg":
            out_schema.append((a.name, "float64"))
        else:
            out_schema.append((a.name, schema[a.column]))
    cols: list[list] = [[] for _ in out_schema]
    if any(lo > hi for lo, hi in windows):
        return Relation("cube", out_schema, cols)

    axis_set = set(group_axes)
    counts = _box_totals(loaded, ("count", None), windows, axis_set)
    flat_counts = counts.reshape(-1)
    keep = np.nonzero(flat_counts)[0]
    if len(keep) == 0:
        return Relation("cube", out_schema, cols)
    group_shape = tuple(counts.shape)
    group_indices = np.unravel_index(keep, group_shape) if group_shape \
        else ()
    # group key columns, in C order over the group axes (sorted values)
    for pos, axis in enumerate(group_axes):
        values = loaded.dim_values[axis]
        cols[pos] = [values[i] for i in group_indices[pos]]
    sums: dict[str, np.ndarray] = {}
    for m in kind.measures:
        if m.func in ("sum", "avg") and m.column not in sums:
            sums[m.column] = _box_totals(
                loaded, ("sum", m.column), windows, axis_set).reshape(-1)
    kept_counts = flat_counts[keep]
    col_off = len(kind.group_keys)
    for j, m in enumerate(kind.measures):
        out_t = out_schema[col_off + j][1]
        if m.func == "count":
            cols[col_off + j] = [int(c) for c in kept_counts]
        elif m.func == "sum":
            vals = sums[m.column][keep]
            cols[col_off + j] = [int(v) for v in vals] if out_t == "int64" \
                else [float(v) for v in vals]
        elif m.func == "avg":
            vals = sums[m.column][keep]
            cols[col_off + j] = [float(v) / int(c)
                                 for v, c in zip(vals, kept_counts)]
        else:
            cols[col_off + j] = _minmax_column(
                loaded, m, windows, group_axes, group_indices, keep, out_t)
    return Relation("cube", out_schema, cols)


def _minmax_column(loaded: LoadedStructure, m, windows, group_axes,
                   group_indices, keep, out_t: str) -> list:
    """min/max cells do not telescope; scan the selected box per group."""
    cells = loaded.cell_arrays[(m.func, m.column)]
    out = []
    for row in range(len(keep)):
        box = []
        for axis in range(cells.ndim):
            if axis in group_axes:
                gi = int(group_indices[group_axes.index(axis)][row])
                box.append(slice(gi, gi + 1))
            else:
                lo, hi = windows[axis]
                box.append(slice(lo, hi + 1))
        sub = cells[tuple(box)]
        mask = loaded.raw_count[tuple(box)] > 0
        value = sub[mask].min() if m.func == "min" else sub[mask].max()
        out.append(int(value) if out_t == "int64" else float(value))
    return out


# ---------------------------------------------------------------------------
# Estimation


@dataclass(frozen=True)
class CostEstimate:
    build_ms: float
    eval_ms: float
    size_bytes: int


def _col_stats(stats: Mapping[str, ColumnStats], column: str) -> ColumnStats:
    from .errors import MissingStats
    cs = stats.get(column)
    if cs is None:
        raise MissingStats(f"no statistics for column {column!r}")
    return cs


def table_bytes(stats: Mapping[str, ColumnStats], row_count: float,
                columns: Sequence[str] | None = None) -> int:
    cols = columns if columns is not None else list(stats)
    width = sum(_col_stats(stats, c).width_bytes for c in cols)
    return int(row_count * width) + 64


def estimate(kind: StructureKind, stats: Mapping[str, ColumnStats],
             row_count: float, cal) -> CostEstimate:
    """Closed-form cost and size estimates from column statistics.

    ``cal`` carries the calibrated per-unit costs (c_scan, c_hash,
    c_probe, c_sort, c_cell) in milliseconds, already scaled for the
    executing site.
    """
    rows = max(float(row_count), 0.0)
    if isinstance(kind, BaseScanKind):
        return CostEstimate(0.0, rows * cal.c_scan, table_bytes(stats, rows))
    if isinstance(kind, HashIndexKind):
        cs = _col_stats(stats, kind.key_column)
        distinct = max(cs.distinct_count, 1)
        return CostEstimate(rows * cal.c_hash,
                            (rows / distinct) * cal.c_probe,
                            table_bytes(stats, rows) + distinct * 16 + 64)
    if isinstance(kind, SortedRangeIndexKind):
        _col_stats(stats, kind.sort_column)
        logn = math.log2(max(rows, 2.0))
        return CostEstimate(rows * logn * cal.c_sort,
                            logn * cal.c_probe + rows * cal.c_scan,
                            table_bytes(stats, rows) + int(rows * 8) + 64)
    if isinstance(kind, PrefixSumCubeKind):
        cells = 1.0
        groups = 1.0
        meta_est = 256.0
        for spec in kind.dim_specs:
            cs = _col_stats(stats, spec.column)
            card = max(cs.distinct_count, 1)
            cells *= card
            if spec.role == "group":
                groups *= card
            meta_est += card * (cs.width_bytes + 6)
        arrays = len(_measure_arrays(kind.measures))
        d = len(kind.dim_specs)
        return CostEstimate((rows + cells) * cal.c_cell,
                            groups * (2 ** d) * cal.c_cell,
                            int(cells * 8 * arrays + 32 + meta_est))
    raise TypeError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# JSON


def kind_to_json(kind: StructureKind) -> dict:
    if isinstance(kind, BaseScanKind):
        return {"type": "base_scan"}
    if isinstance(kind, HashIndexKind):
        return {"type": "hash_index", "key_column": kind.key_column,
                "probe": _operand_to_json(kind.probe)}
    if isinstance(kind, SortedRangeIndexKind):
        return {"type": "sorted_range_index", "sort_column": kind.sort_column,
                "lo": _operand_to_json(kind.lo), "hi": _operand_to_json(kind.hi)}
    if isinstance(kind, PrefixSumCubeKind):
        return {"type": "prefix_sum_cube",
                "group_keys": list(kind.group_keys),
                "dims": [{"column": d.column, "role": d.role,
                          "lo": _operand_to_json(d.lo),
                          "hi": _operand_to_json(d.hi)}
                         for d in kind.dim_specs],
                "measures": [{"func": m.func, "column": m.column,
                              "as": m.name} for m in kind.measures]}
    raise TypeError(f"unknown kind {kind!r}")


def kind_from_json(obj: dict) -> StructureKind:
    t = obj["type"]
    if t == "base_scan":
        return BaseScanKind()
    if t == "hash_index":
        return HashIndexKind(obj["key_column"], _operand_from_json(obj["probe"]))
    if t == "sorted_range_index":
        return SortedRangeIndexKind(obj["sort_column"],
                                    _operand_from_json(obj.get("lo")),
                                    _operand_from_json(obj.get("hi")))
    if t == "prefix_sum_cube":
        dims = [DimSpec(d["column"], d["role"],
                        _operand_from_json(d.get("lo")),
                        _operand_from_json(d.get("hi")))
                for d in obj["dims"]]
        measures = [AggSpec(m["func"], m.get("column"), m["as"])
                    for m in obj["measures"]]
        return PrefixSumCubeKind(dims, measures, obj["group_keys"])
    raise ValueError(f"unknown structure type {t!r}")
