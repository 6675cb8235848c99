"""Per-relation convolution Count sketches with constant-time updates.

Each incoming tuple maps to a single (sign, bin) pair per repetition:
the sign is the product of the edge sign hashes over the tuple's joined
attributes, the bin is the sum of the component bin hashes modulo m.
Only l counters change per update, independent of the sketch size, and
the resulting single-tuple sketch equals the circular convolution of the
per-attribute single-item Count sketches.

Sketches are linear: update order never matters for integer frequency
deltas, and sketches built from split streams merge by addition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DataError, QueryError
from .hashing import HashSet, bin_eval, bin_eval_vec, sign_eval, sign_eval_vec
from .joingraph import JoinGraph

METHOD_CONV = "conv"
METHOD_AMS = "ams"


@dataclass(frozen=True)
class SketchConfig:
    """Sketch shape: m bins per repetition, l repetitions, master seed."""

    m: int
    l: int = 5
    seed: int = 0
    method: str = METHOD_CONV

    def __post_init__(self):
        if self.m < 1:
            raise QueryError(f"bin count m must be >= 1, got {self.m}")
        if self.l < 1:
            raise QueryError(f"repetition count l must be >= 1, got {self.l}")
        if self.method not in (METHOD_CONV, METHOD_AMS):
            raise QueryError(f"unknown sketch method {self.method!r}")


@dataclass
class TupleUpdate:
    """One stream element: a relation tuple and its frequency change."""

    relation: int
    values: dict[int, int]  # attribute id -> canonical 64-bit item
    delta: float = 1.0


class RelationSketch:
    """An l x m grid of real counters for one relation.

    Single-writer during ingestion; sketches sharing a config merge by
    counter addition.  `touched_cells` counts counter writes for the
    update-cost instrumentation.
    """

    def __init__(self, relation: int, config: SketchConfig, graph: JoinGraph, hashes):
        self.relation = relation
        self.config = config
        self.graph = graph
        self.hashes = hashes
        self.counters = np.zeros((config.l, config.m), dtype=np.float64)
        self.touched_cells = 0

    def copy(self) -> "RelationSketch":
        out = RelationSketch(self.relation, self.config, self.graph, self.hashes)
        out.counters = self.counters.copy()
        return out


def tuple_sign(graph: JoinGraph, hashes: HashSet, rep: int, t: TupleUpdate) -> int:
    """Product of edge sign hashes over the tuple's joined attributes."""
    sign = 1
    for u in graph.omega[t.relation]:
        try:
            x = t.values[u]
        except KeyError:
            raise DataError(f"tuple for relation {t.relation} misses attribute {u}") from None
        for v in graph.gamma[u]:
            sign *= sign_eval(hashes.sign_for(u, v, rep), x)
    return sign


def tuple_bin(graph: JoinGraph, hashes: HashSet, rep: int, t: TupleUpdate) -> int:
    """Sum of component bin hashes over the tuple's attributes, mod m."""
    total = 0
    m = 1
    for u in graph.omega[t.relation]:
        try:
            x = t.values[u]
        except KeyError:
            raise DataError(f"tuple for relation {t.relation} misses attribute {u}") from None
        h = hashes.bin_for(graph.psi[u], rep)
        m = h.m
        total += bin_eval(h, x)
    return total % m


def update(sk: RelationSketch, t: TupleUpdate) -> None:
    """Apply one tuple to a conv sketch; writes exactly l counters."""
    if sk.config.method != METHOD_CONV:
        raise QueryError("update() applies to conv sketches; use ams_update for ams")
    if t.relation != sk.relation:
        raise DataError(f"update for relation {t.relation} sent to sketch of {sk.relation}")
    needed = set(sk.graph.omega[sk.relation])
    if set(t.values) != needed:
        raise DataError(
            f"tuple values cover attributes {sorted(t.values)}, expected {sorted(needed)}"
        )
    for rep in range(sk.config.l):
        j = tuple_bin(sk.graph, sk.hashes, rep, t)
        s = tuple_sign(sk.graph, sk.hashes, rep, t)
        sk.counters[rep, j] += s * t.delta
    sk.touched_cells += sk.config.l


def merge(a: RelationSketch, b: RelationSketch) -> RelationSketch:
    """Sum two sketches of the same relation built under one config."""
    if a.config != b.config:
        raise QueryError(f"cannot merge sketches with configs {a.config} and {b.config}")
    if a.relation != b.relation:
        raise QueryError(f"cannot merge sketches of relations {a.relation} and {b.relation}")
    out = a.copy()
    out.counters += b.counters
    return out


def bulk_update(
    sk: RelationSketch,
    columns: dict[int, np.ndarray],
    deltas: np.ndarray,
) -> None:
    """Vectorized update for a batch of tuples (column arrays by attribute).

    Equivalent to calling update() per tuple: every partial counter sum
    of integer deltas is itself an integer, so the accumulation order
    cannot change the result.
    """
    graph, hashes, cfg = sk.graph, sk.hashes, sk.config
    n = len(deltas)
    if n == 0:
        return
    deltas = np.asarray(deltas, dtype=np.float64)
    for rep in range(cfg.l):
        bins = np.zeros(n, dtype=np.uint64)
        signs = np.ones(n, dtype=np.float64)
        for u in graph.omega[sk.relation]:
            x = columns[u]
            bins += bin_eval_vec(hashes.bin_for(graph.psi[u], rep), x)
            for v in graph.gamma[u]:
                signs *= sign_eval_vec(hashes.sign_for(u, v, rep), x)
        idx = (bins % np.uint64(cfg.m)).astype(np.int64)
        np.add.at(sk.counters[rep], idx, signs * deltas)
    sk.touched_cells += cfg.l * n


def build_sketch(
    updates: Iterable[TupleUpdate],
    graph: JoinGraph,
    hashes: HashSet,
    config: SketchConfig,
    relation: int,
) -> RelationSketch:
    """Fold a stream of updates for one relation into a fresh sketch."""
    sk = RelationSketch(relation, config, graph, hashes)
    omega = graph.omega[relation]
    cols: dict[int, list[int]] = {u: [] for u in omega}
    deltas: list[float] = []
    for t in updates:
        if t.relation != relation:
            raise DataError(
                f"stream for relation {relation} contains a tuple for relation {t.relation}"
            )
        if set(t.values) != set(omega):
            raise DataError(
                f"tuple values cover attributes {sorted(t.values)}, expected {sorted(omega)}"
            )
        for u in omega:
            cols[u].append(t.values[u] & 0xFFFFFFFFFFFFFFFF)
        deltas.append(t.delta)
    columns = {u: np.array(vals, dtype=np.uint64) for u, vals in cols.items()}
    bulk_update(sk, columns, np.array(deltas, dtype=np.float64))
    return sk
