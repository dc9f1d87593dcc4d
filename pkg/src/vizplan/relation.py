"""Typed in-memory relations and exact column statistics.

Relations are column-oriented: one Python list per column, ``None`` for
nulls. They are treated as immutable after construction so they can be
shared freely between concurrent readers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import ParseError, SchemaMismatch, UnknownColumn

COLUMN_TYPES = ("int64", "float64", "string", "bool")

Scalar = Any  # int | float | str | bool | None


def scalar_type(value: Scalar) -> str:
    """Return the column type a non-null scalar belongs to.

    bool is checked before int because bool subclasses int in Python.
    """
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int64"
    if isinstance(value, float):
        return "float64"
    if isinstance(value, str):
        return "string"
    raise TypeError(f"unsupported scalar {value!r}")


def sort_key(value: Scalar):
    """Total-order key: nulls sort first, then values of the column type."""
    return (value is not None, value)


class Relation:
    """A named table with a declared schema and equal-length columns."""

    __slots__ = ("name", "schema", "columns", "row_count", "_index")

    def __init__(self, name: str, schema: Sequence[tuple[str, str]],
                 columns: Sequence[list]):
        names = [c for c, _ in schema]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate column names in {name!r}: {names}")
        for _, ctype in schema:
            if ctype not in COLUMN_TYPES:
                raise SchemaMismatch(f"unknown column type {ctype!r}")
        if len(columns) != len(schema):
            raise SchemaMismatch(
                f"{name!r}: {len(columns)} columns for {len(schema)} declared")
        lengths = {len(col) for col in columns}
        if len(lengths) > 1:
            raise SchemaMismatch(f"{name!r}: ragged columns {sorted(lengths)}")
        self.name = name
        self.schema = tuple((str(c), str(t)) for c, t in schema)
        self.columns = tuple(columns)
        self.row_count = len(columns[0]) if columns else 0
        self._index = {c: i for i, (c, _) in enumerate(self.schema)}

    @classmethod
    def from_rows(cls, name: str, schema: Sequence[tuple[str, str]],
                  rows: Iterable[Sequence[Scalar]]) -> "Relation":
        cols: list[list] = [[] for _ in schema]
        for row in rows:
            for i, v in enumerate(row):
                cols[i].append(v)
        return cls(name, schema, cols)

    def col_index(self, column: str) -> int:
        try:
            return self._index[column]
        except KeyError:
            raise UnknownColumn(f"{column!r} not in {self.name!r}") from None

    def col(self, column: str) -> list:
        return self.columns[self.col_index(column)]

    def col_type(self, column: str) -> str:
        return self.schema[self.col_index(column)][1]

    def column_names(self) -> list[str]:
        return [c for c, _ in self.schema]

    def rows(self) -> Iterator[tuple]:
        return zip(*self.columns) if self.columns else iter(())

    def take(self, indices: Sequence[int], name: str | None = None) -> "Relation":
        cols = [[col[i] for i in indices] for col in self.columns]
        return Relation(name or self.name, self.schema, cols)

    def rename(self, name: str) -> "Relation":
        return Relation(name, self.schema, list(self.columns))

    def __repr__(self) -> str:
        cols = ", ".join(f"{c}:{t}" for c, t in self.schema)
        return f"Relation({self.name!r}, [{cols}], rows={self.row_count})"


@dataclass(frozen=True)
class ColumnStats:
    """Exact per-column statistics from a full scan."""

    distinct_count: int
    null_count: int
    width_bytes: float
    min: Scalar = None
    max: Scalar = None


@dataclass(frozen=True)
class RelationStats:
    row_count: int
    columns: Mapping[str, ColumnStats]


def _encoded_width(value: Scalar, ctype: str) -> float:
    if ctype in ("int64", "float64"):
        return 8.0
    if ctype == "bool":
        return 1.0
    return 4.0 + len(str(value).encode("utf-8"))


def compute_stats(rel: Relation) -> dict[str, ColumnStats]:
    """Exact statistics; no sampling at this scale."""
    out: dict[str, ColumnStats] = {}
    for (cname, ctype), col in zip(rel.schema, rel.columns):
        nulls = 0
        seen: set = set()
        vmin = vmax = None
        width_total = 0.0
        for v in col:
            if v is None:
                nulls += 1
                continue
            seen.add(v)
            width_total += _encoded_width(v, ctype)
            if vmin is None or v < vmin:
                vmin = v
            if vmax is None or v > vmax:
                vmax = v
        nonnull = len(col) - nulls
        if ctype in ("int64", "float64"):
            width = 8.0
        elif ctype == "bool":
            width = 1.0
        else:
            width = (width_total / nonnull) if nonnull else 8.0
        out[cname] = ColumnStats(distinct_count=len(seen), null_count=nulls,
                                 width_bytes=width, min=vmin, max=vmax)
    return out


def dataset_stats(db: Mapping[str, Relation]) -> dict[str, RelationStats]:
    return {name: RelationStats(rel.row_count, compute_stats(rel))
            for name, rel in db.items()}


_TRUE = {"true", "1", "t", "yes"}
_FALSE = {"false", "0", "f", "no"}


def _parse_cell(text: str, ctype: str, row: int, column: str) -> Scalar:
    if text == "":
        return None
    if ctype == "int64":
        try:
            return int(text)
        except ValueError:
            raise ParseError(row, column, f"non-numeric value {text!r}")
    if ctype == "float64":
        try:
            return float(text)
        except ValueError:
            raise ParseError(row, column, f"non-numeric value {text!r}")
    if ctype == "bool":
        low = text.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ParseError(row, column, f"not a boolean: {text!r}")
    return text


def load_csv(path: str, name: str, schema: Sequence[tuple[str, str]]) -> Relation:
    """Load a UTF-8 CSV with a header row matching the declared schema."""
    declared = [c for c, _ in schema]
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file, expected header {declared}")
        if header != declared:
            raise SchemaMismatch(
                f"{path}: header {header} does not match declared {declared}")
        cols: list[list] = [[] for _ in schema]
        for rownum, record in enumerate(reader, start=1):
            if len(record) != len(schema):
                raise ParseError(rownum, "<row>",
                                 f"{len(record)} cells for {len(schema)} columns")
            for i, (cname, ctype) in enumerate(schema):
                cols[i].append(_parse_cell(record[i], ctype, rownum, cname))
    return Relation(name, schema, cols)


def write_csv(rel: Relation, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(rel.column_names())
        for row in rel.rows():
            writer.writerow(["" if v is None else v for v in row])


def relations_match(a: Relation, b: Relation, float_rtol: float = 1e-9) -> bool:
    """Value-wise equality: exact for int/string/bool, relative for floats.

    Row order matters; canonical ordering is the evaluator's contract.
    """
    if a.schema != b.schema or a.row_count != b.row_count:
        return False
    for (cname, ctype), ca, cb in zip(a.schema, a.columns, b.columns):
        if ctype == "float64":
            for x, y in zip(ca, cb):
                if x is None or y is None:
                    if x is not y:
                        return False
                    continue
                if x != y and abs(x - y) > float_rtol * max(abs(x), abs(y)) + 1e-12:
                    return False
        else:
            if ca != cb:
                return False
    return True
