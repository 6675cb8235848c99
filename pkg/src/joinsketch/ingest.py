"""CSV ingestion: filter-at-read, canonicalization, tuple-update streams.

Rows stream through exactly once.  Filter predicates apply before any
sketch work, rows with an empty (NULL) joined column never join and are
dropped, and raw cells canonicalize to 64-bit items: integers keep their
two's-complement bit pattern, strings map through a fixed FNV-1a hash so
equal strings always produce equal items without any cross-relation
dictionary.
"""

from __future__ import annotations

import csv
from typing import Iterator

import numpy as np

from .errors import DataError, QueryError
from .joingraph import FilterPredicate, JoinGraph
from .sketch import TupleUpdate

_MASK64 = (1 << 64) - 1

# FNV-1a 64-bit, seedless: offset basis and prime are fixed constants.
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

DELTA_COLUMN = "__delta"


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def canonicalize(text: str, col_type: str) -> int:
    """Map a raw cell to its 64-bit item value."""
    if col_type == "int":
        try:
            return int(text.strip()) & _MASK64
        except ValueError as exc:
            raise DataError(f"cannot parse {text!r} as int") from exc
    if col_type == "str":
        return fnv1a64(text.encode("utf-8"))
    raise QueryError(f"unknown column type {col_type!r}")


def apply_filters(row: dict[str, str], predicates: list[FilterPredicate]) -> bool:
    """Conjunction of all predicates; empty cells (NULL) satisfy none."""
    for p in predicates:
        cell = row.get(p.column)
        if cell is None:
            raise DataError(f"filter column {p.column!r} missing from row")
        if cell == "":
            return False
        if p.col_type == "int":
            try:
                left = int(cell.strip())
            except ValueError as exc:
                raise DataError(
                    f"cannot compare {cell!r} in column {p.column!r} as int"
                ) from exc
            right = p.value
        else:
            left = cell
            right = p.value
        if not _compare(left, p.op, right):
            return False
    return True


def _compare(left, op: str, right) -> bool:
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise QueryError(f"unknown operator {op!r}")


class StreamReader:
    """Single-pass reader producing one TupleUpdate per passing row.

    `rows_read` counts every data row seen, including filtered ones, for
    the single-pass instrumentation.
    """

    def __init__(self, graph: JoinGraph, relation: int, path: str | None = None):
        self.graph = graph
        self.relation = relation
        decl = graph.spec.relations[relation]
        self.decl = decl
        self.path = path if path is not None else decl.source
        self.rows_read = 0
        self.rows_emitted = 0
        self._attr_cols = [(graph.attr_id(relation, col), col) for col in decl.join_columns]

    def __iter__(self) -> Iterator[TupleUpdate]:
        decl = self.decl
        try:
            fh = open(self.path, "r", encoding="utf-8", newline="")
        except OSError as exc:
            raise DataError(f"cannot open {self.path!r}: {exc}") from exc
        with fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{self.path}: missing header row")
            header = set(reader.fieldnames)
            needed = set(decl.join_columns) | {p.column for p in decl.filters}
            missing = needed - header
            if missing:
                raise DataError(f"{self.path}: missing column(s) {sorted(missing)}")
            has_delta = DELTA_COLUMN in header

            for row in reader:
                self.rows_read += 1
                if not apply_filters(row, decl.filters):
                    continue
                values: dict[int, int] = {}
                null_join = False
                for attr, col in self._attr_cols:
                    cell = row[col]
                    if cell is None or cell == "":
                        null_join = True
                        break
                    values[attr] = canonicalize(cell, decl.column_types[col])
                if null_join:
                    continue
                delta = 1.0
                if has_delta:
                    try:
                        delta = float(int(row[DELTA_COLUMN].strip()))
                    except (ValueError, AttributeError) as exc:
                        raise DataError(
                            f"{self.path}: bad {DELTA_COLUMN} value {row[DELTA_COLUMN]!r} "
                            f"at data row {self.rows_read}"
                        ) from exc
                self.rows_emitted += 1
                yield TupleUpdate(relation=self.relation, values=values, delta=delta)


def read_stream(graph: JoinGraph, relation: int, path: str | None = None) -> StreamReader:
    """Open a relation's source for single-pass streaming ingestion."""
    return StreamReader(graph, relation, path)


def read_columns(
    graph: JoinGraph, relation: int, path: str | None = None
) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Materialize a relation's stream as column arrays for bulk updates."""
    reader = read_stream(graph, relation, path)
    omega = graph.omega[relation]
    cols: dict[int, list[int]] = {u: [] for u in omega}
    deltas: list[float] = []
    for t in reader:
        for u in omega:
            cols[u].append(t.values[u])
        deltas.append(t.delta)
    columns = {u: np.array(vals, dtype=np.uint64) for u, vals in cols.items()}
    return columns, np.array(deltas, dtype=np.float64)
