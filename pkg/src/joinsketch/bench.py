"""Benchmark harness: repeated sketch-and-estimate trials with metrics.

Each trial owns a seed derived from (master seed, method, m, trial), so
every row is reproducible in isolation.  Trials run in a worker pool and
results are emitted in deterministic (method, m, trial) order.  Error
metrics follow the evaluation conventions: absolute relative error with
a max(y, 1) denominator, and q-error with infinity for non-positive
estimates.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ams import ams_bulk_update, ams_estimate, ams_sketch, warm_families
from .errors import QueryError
from .estimator import estimate
from .hashing import derive_hash_set
from .ingest import read_columns
from .joingraph import JoinGraph, traversal_plan
from .mersenne import mix64
from .oracle import exact_cardinality
from .sketch import METHOD_AMS, METHOD_CONV, RelationSketch, SketchConfig, bulk_update

BENCH_SCHEMA = "joinsketch-bench-v1"

_METHOD_CODES = {METHOD_CONV: 101, METHOD_AMS: 102}

Columns = tuple[dict[int, np.ndarray], np.ndarray]


def abs_rel_error(y: float, y_hat: float) -> float:
    """|y - y_hat| / max(y, 1)."""
    if y < 0:
        raise ValueError("true cardinality must be non-negative")
    return abs(y - y_hat) / max(y, 1.0)


def q_error(y: float, y_hat: float) -> float:
    """max(y/y_hat, y_hat/y); infinity when the estimate is not positive.

    A true cardinality of zero is clamped to one, mirroring the
    denominator guard of abs_rel_error.
    """
    if y_hat <= 0.0:
        return math.inf
    y = max(y, 1.0)
    return max(y / y_hat, y_hat / y)


def parse_m_sweep(text: str) -> list[int]:
    """Parse '2^A..2^B' (optionally '2^A..2^B:step') into bin counts."""
    spec = text.strip()
    step = 1
    if ":" in spec:
        spec, _, raw_step = spec.partition(":")
        try:
            step = int(raw_step)
        except ValueError as exc:
            raise QueryError(f"bad m-sweep step {raw_step!r}") from exc
        if step < 1:
            raise QueryError(f"m-sweep step must be >= 1, got {step}")
    lo, sep, hi = spec.partition("..")
    if not sep:
        raise QueryError(f"m-sweep must look like 2^A..2^B, got {text!r}")

    def parse_power(s: str) -> int:
        s = s.strip()
        if not s.startswith("2^"):
            raise QueryError(f"m-sweep bounds must be powers like 2^10, got {s!r}")
        try:
            return int(s[2:])
        except ValueError as exc:
            raise QueryError(f"bad m-sweep bound {s!r}") from exc

    a, b = parse_power(lo), parse_power(hi)
    if a > b:
        raise QueryError(f"m-sweep lower bound 2^{a} exceeds upper bound 2^{b}")
    return [2**e for e in range(a, b + 1, step)]


def trial_seed(master_seed: int, method: str, m: int, trial: int) -> int:
    """Deterministic per-trial seed; every bench row is reproducible."""
    s = mix64(master_seed ^ 0x6A5D39EAE116586D)
    for word in (_METHOD_CODES[method], m, trial):
        s = mix64(s ^ word)
    return s


@dataclass(frozen=True)
class BenchRow:
    method: str
    m: int
    trial: int
    seed: int
    estimate: float
    exact: float
    abs_rel_error: float
    q_error: float
    sketch_ms: float
    infer_ms: float


@dataclass(frozen=True)
class BenchSummary:
    method: str
    m: int
    median_are: float
    p95_are: float


def read_all_columns(graph: JoinGraph) -> list[Columns]:
    """Read every relation's source once, as bulk column arrays."""
    return [read_columns(graph, rel) for rel in range(graph.r)]


def build_sketches(
    graph: JoinGraph,
    config: SketchConfig,
    columns_by_relation: list[Columns],
) -> list[RelationSketch]:
    """Build one sketch per relation from pre-read column arrays."""
    sketches: list[RelationSketch] = []
    if config.method == METHOD_CONV:
        hashes = derive_hash_set(config, graph)
        for rel, (columns, deltas) in enumerate(columns_by_relation):
            sk = RelationSketch(rel, config, graph, hashes)
            bulk_update(sk, columns, deltas)
            sketches.append(sk)
    else:
        for rel, (columns, deltas) in enumerate(columns_by_relation):
            sk = ams_sketch(rel, config, graph)
            ams_bulk_update(sk, columns, deltas)
            sketches.append(sk)
    return sketches


def freqs_from_columns(graph: JoinGraph, columns_by_relation: list[Columns]):
    """Materialize frequency maps (for the exact oracle) from columns."""
    freqs = []
    for rel, (columns, deltas) in enumerate(columns_by_relation):
        omega = graph.omega[rel]
        freq: dict[tuple[int, ...], float] = {}
        for i in range(len(deltas)):
            key = tuple(int(columns[u][i]) for u in omega)
            freq[key] = freq.get(key, 0.0) + float(deltas[i])
        freqs.append({k: v for k, v in freq.items() if v != 0.0})
    return freqs


def run_trial(
    graph: JoinGraph,
    columns_by_relation: list[Columns],
    method: str,
    m: int,
    l: int,
    seed: int,
) -> tuple[float, float, float]:
    """One (method, m, seed) measurement: estimate, sketch_ms, infer_ms."""
    config = SketchConfig(m=m, l=l, seed=seed, method=method)
    start = time.perf_counter()
    sketches = build_sketches(graph, config, columns_by_relation)
    sketch_ms = (time.perf_counter() - start) * 1000.0
    if method == METHOD_CONV:
        report = estimate(sketches, graph, traversal_plan(graph, "auto"), path="fft")
    else:
        report = ams_estimate(sketches, graph)
    return report.median, sketch_ms, report.infer_ms


def run_bench(
    graph: JoinGraph,
    m_values: list[int],
    trials: int,
    master_seed: int,
    methods: list[str],
    l: int = 5,
    workers: int = 4,
    columns_by_relation: list[Columns] | None = None,
) -> tuple[list[BenchRow], list[BenchSummary], dict[str, float]]:
    """Full sweep: rows per (method, m, trial), summaries, log-log slopes."""
    for method in methods:
        if method not in (METHOD_CONV, METHOD_AMS):
            raise QueryError(f"unknown method {method!r}")
    if columns_by_relation is None:
        columns_by_relation = read_all_columns(graph)

    exact = exact_cardinality(freqs_from_columns(graph, columns_by_relation), graph, path="auto")

    tasks = [
        (method, m, trial)
        for method in methods
        for m in m_values
        for trial in range(trials)
    ]

    def run_one(task: tuple[str, int, int]) -> BenchRow:
        method, m, trial = task
        seed = trial_seed(master_seed, method, m, trial)
        est, sketch_ms, infer_ms = run_trial(graph, columns_by_relation, method, m, l, seed)
        return BenchRow(
            method=method,
            m=m,
            trial=trial,
            seed=seed,
            estimate=est,
            exact=exact,
            abs_rel_error=abs_rel_error(exact, est),
            q_error=q_error(exact, est),
            sketch_ms=sketch_ms,
            infer_ms=infer_ms,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, tasks))
    else:
        rows = [run_one(t) for t in tasks]
    rows.sort(key=lambda r: (r.method, r.m, r.trial))

    summaries: list[BenchSummary] = []
    for method in methods:
        for m in m_values:
            errs = [r.abs_rel_error for r in rows if r.method == method and r.m == m]
            summaries.append(
                BenchSummary(
                    method=method,
                    m=m,
                    median_are=float(np.median(errs)),
                    p95_are=float(np.percentile(errs, 95)),
                )
            )

    slopes = {
        method: (
            loglog_slope(
                [s.m for s in summaries if s.method == method],
                [s.median_are for s in summaries if s.method == method],
            )
            if len(m_values) >= 2
            else math.nan
        )
        for method in methods
    }
    return rows, summaries, slopes


def loglog_slope(xs: list[float], ys: list[float], floor: float = 1e-12) -> float:
    """Least-squares slope of log(y) against log(x); y clamped to floor."""
    if len(xs) < 2:
        raise ValueError("need at least two points for a slope")
    lx = np.log([float(x) for x in xs])
    ly = np.log([max(float(y), floor) for y in ys])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def write_bench_csv(
    path: str,
    rows: list[BenchRow],
    summaries: list[BenchSummary],
    slopes: dict[str, float],
) -> None:
    """Serialize bench output; the schema line versions the layout."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema={BENCH_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "row_type", "method", "m", "trial", "seed", "estimate", "exact",
                "abs_rel_error", "q_error", "sketch_ms", "infer_ms",
                "median_are", "p95_are", "slope",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    "row", r.method, r.m, r.trial, r.seed,
                    repr(r.estimate), repr(r.exact),
                    repr(r.abs_rel_error), repr(r.q_error),
                    f"{r.sketch_ms:.3f}", f"{r.infer_ms:.3f}",
                    "", "", "",
                ]
            )
        for s in summaries:
            writer.writerow(
                [
                    "summary", s.method, s.m, "", "", "", "", "", "", "", "",
                    repr(s.median_are), repr(s.p95_are), "",
                ]
            )
        for method, slope in slopes.items():
            writer.writerow(
                ["slope", method, "", "", "", "", "", "", "", "", "", "", "", repr(slope)]
            )


def run_throughput(
    graph: JoinGraph,
    m_values: list[int],
    methods: list[str],
    master_seed: int = 0,
    l: int = 5,
    columns_by_relation: list[Columns] | None = None,
) -> list[dict]:
    """Measured update rate per (method, m) on the query's largest relation.

    Hash-function setup happens outside the timed region; the timer
    covers only the update pass over the relation's tuples.
    """
    if columns_by_relation is None:
        columns_by_relation = read_all_columns(graph)
    sizes = [len(deltas) for _, deltas in columns_by_relation]
    largest = max(range(graph.r), key=lambda k: sizes[k])
    columns, deltas = columns_by_relation[largest]
    n = sizes[largest]

    results = []
    for method in methods:
        for m in m_values:
            config = SketchConfig(m=m, l=l, seed=master_seed, method=method)
            if method == METHOD_CONV:
                sk = RelationSketch(largest, config, graph, derive_hash_set(config, graph))
                start = time.perf_counter()
                bulk_update(sk, columns, deltas)
                elapsed = time.perf_counter() - start
            else:
                sk = ams_sketch(largest, config, graph)
                warm_families(sk)
                start = time.perf_counter()
                ams_bulk_update(sk, columns, deltas)
                elapsed = time.perf_counter() - start
            rate = (n / elapsed) if (n > 0 and elapsed > 0) else 0.0
            results.append(
                {
                    "method": method,
                    "m": m,
                    "relation": graph.spec.relations[largest].name,
                    "tuples": n,
                    "seconds": elapsed,
                    "tuples_per_sec": rate,
                }
            )
    return results
