"""Cardinality estimation from convolution sketches.

The estimate is a sum over all bin assignments of the graph components
of the product of relation counters, each relation indexed by the sum of
its components' bins mod m.  Evaluating that sum directly costs
m^(#components); the production path instead combines sketch vectors
along the rooted traversal plan with Hadamard products and FFT-based
circular cross-correlation, which is O(r * m log m) per repetition.
Both paths compute the same value and cross-check each other in tests.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import BudgetError, QueryError
from .joingraph import JoinGraph, PlanNode, PlanTree, traversal_plan
from .sketch import METHOD_CONV, RelationSketch

NAIVE_CELL_BUDGET = 10**7


@dataclass(frozen=True)
class EstimateReport:
    """Per-repetition estimates with their median and inference time."""

    method: str
    per_repetition: tuple[float, ...]
    median: float
    infer_ms: float
    path: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "path": self.path,
            "estimates": list(self.per_repetition),
            "median": self.median,
            "infer_ms": self.infer_ms,
        }


def circ_convolve(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Circular convolution: out[j] = sum_i x[i] * y[(j - i) mod m]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return np.real(np.fft.ifft(np.fft.fft(x) * np.fft.fft(y)))


def circ_cross_correlate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Circular cross-correlation: out[j] = sum_i x[i] * y[(j + i) mod m]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return np.real(np.fft.ifft(np.conj(np.fft.fft(x)) * np.fft.fft(y)))


def _check_sketches(sketches: list[RelationSketch], graph: JoinGraph) -> None:
    if len(sketches) != graph.r:
        raise QueryError(f"expected {graph.r} sketches, got {len(sketches)}")
    config = sketches[0].config
    for k, sk in enumerate(sketches):
        if sk.relation != k:
            raise QueryError(f"sketch at position {k} is for relation {sk.relation}")
        if sk.config != config:
            raise QueryError("sketches disagree on config")
    if config.method != METHOD_CONV:
        raise QueryError(f"conv estimator got sketches with method {config.method!r}")


def naive_estimate(sketches: list[RelationSketch], graph: JoinGraph, rep: int) -> float:
    """Direct evaluation of the estimate sum over all bin assignments.

    Cost grows as m^(#components); guarded, and intended as the
    cross-check path for small m.
    """
    _check_sketches(sketches, graph)
    m = sketches[0].config.m
    ncomp = graph.n_components
    if m**ncomp > NAIVE_CELL_BUDGET:
        raise BudgetError(
            f"naive evaluation needs m^components = {m}^{ncomp} cells, over {NAIVE_CELL_BUDGET}"
        )
    grids = np.indices((m,) * ncomp, dtype=np.int64)
    total = np.ones((m,) * ncomp, dtype=np.float64)
    for k in range(graph.r):
        idx = np.zeros((m,) * ncomp, dtype=np.int64)
        for u in graph.omega[k]:
            idx += grids[graph.psi[u]]
        total *= sketches[k].counters[rep][idx % m]
    return float(total.sum())


def combine_sketches(plan: PlanTree, sketches: list[RelationSketch], rep: int) -> np.ndarray:
    """Combine sketch vectors along the traversal plan.

    Sibling subtrees multiply element-wise; descending through a
    relation's other attribute cross-correlates the accumulated subtree
    vector into the relation's sketch.  The element sum of the returned
    vector is the repetition's estimate.
    """
    m = sketches[0].config.m

    def walk(node: PlanNode) -> np.ndarray:
        x = sketches[node.relation].counters[rep]
        for _, children in node.cross_groups:
            acc = np.ones(m, dtype=np.float64)
            for child in children:
                acc = walk(child) * acc
            x = circ_cross_correlate(acc, x)
        for child in node.hadamard_children:
            x = walk(child) * x
        return x

    out = walk(plan.root)
    if np.shares_memory(out, sketches[plan.root.relation].counters):
        out = out.copy()
    return out


def estimate(
    sketches: list[RelationSketch],
    graph: JoinGraph,
    plan: PlanTree | None = None,
    path: str = "fft",
) -> EstimateReport:
    """Estimate the query cardinality from conv sketches.

    Computes one estimate per repetition (FFT combination or the naive
    sum, per `path`) and reports their median; with an even repetition
    count the median is the mean of the two middle values.
    """
    _check_sketches(sketches, graph)
    if path not in ("fft", "naive"):
        raise QueryError(f"unknown inference path {path!r}")
    if plan is None:
        plan = traversal_plan(graph, "auto")

    config = sketches[0].config
    start = time.perf_counter()
    per_rep: list[float] = []
    for rep in range(config.l):
        if path == "fft":
            per_rep.append(float(combine_sketches(plan, sketches, rep).sum()))
        else:
            per_rep.append(naive_estimate(sketches, graph, rep))
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return EstimateReport(
        method=METHOD_CONV,
        per_repetition=tuple(per_rep),
        median=float(statistics.median(per_rep)),
        infer_ms=elapsed_ms,
        path=path,
    )


def required_bins(epsilon: float, r: int, norm_product: float) -> int:
    """Bin count that bounds the absolute error by epsilon (Chebyshev)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return ceil(3**r * epsilon**-2 * norm_product)
