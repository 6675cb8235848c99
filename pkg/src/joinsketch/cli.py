"""Command-line surface: sketch, estimate, exact, bench, throughput.

Every flag can also be supplied through an environment variable with the
JSK_ prefix (flag --m-sweep becomes JSK_M_SWEEP); explicit flags win.
Exit codes: 1 usage, 2 query document problems, 3 data problems.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .ams import ams_estimate, ams_sketch
from .bench import (
    build_sketches,
    parse_m_sweep,
    read_all_columns,
    run_bench,
    run_throughput,
    write_bench_csv,
)
from .errors import BudgetError, DataError, QueryError
from .estimator import estimate
from .hashing import derive_hash_set
from .ingest import read_stream
from .joingraph import build_join_graph, load_query, traversal_plan
from .oracle import exact_cardinality, materialize
from .sketch import METHOD_AMS, METHOD_CONV, RelationSketch, SketchConfig
from .sketchfile import load_sketch_file, save_sketch_file

logger = logging.getLogger("joinsketch")

EXIT_USAGE = 1
EXIT_QUERY = 2
EXIT_DATA = 3

# Below this measured ingestion rate (tuples/second) on a non-trivial
# stream, cmd_sketch logs a throughput warning.
SLOW_RATE_WARN = 100_000.0
_WARN_MIN_TUPLES = 1000


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env_default(flag: str):
    return os.environ.get("JSK_" + flag.upper().replace("-", "_"))


def _add(parser, flag: str, required: bool = False, **kwargs):
    env = _env_default(flag)
    if env is not None:
        kwargs["default"] = env
        required = False
    parser.add_argument(f"--{flag}", required=required, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="joinsketch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sketch = sub.add_parser("sketch", help="ingest relation sources and write a sketch file")
    _add(p_sketch, "query", required=True)
    _add(p_sketch, "m", required=True, type=int)
    _add(p_sketch, "reps", default=5, type=int)
    _add(p_sketch, "seed", default=0, type=int)
    _add(p_sketch, "out", required=True)
    _add(p_sketch, "method", default=METHOD_CONV, choices=[METHOD_CONV, METHOD_AMS])

    p_est = sub.add_parser("estimate", help="estimate cardinality from a sketch file")
    _add(p_est, "sketches", required=True)
    _add(p_est, "query", required=True)
    _add(p_est, "path", default="auto", choices=["auto", "fft", "naive"])

    p_exact = sub.add_parser("exact", help="exact cardinality via the oracle")
    _add(p_exact, "query", required=True)
    _add(p_exact, "path", default="auto", choices=["auto", "nested", "hash"])

    p_bench = sub.add_parser("bench", help="accuracy/timing sweep, CSV output")
    _add(p_bench, "query", required=True)
    _add(p_bench, "m-sweep", required=True)
    _add(p_bench, "trials", default=30, type=int)
    _add(p_bench, "seed", default=0, type=int)
    _add(p_bench, "out", required=True)
    _add(p_bench, "methods", default=f"{METHOD_CONV},{METHOD_AMS}")
    _add(p_bench, "reps", default=5, type=int)
    _add(p_bench, "workers", default=4, type=int)

    p_tp = sub.add_parser("throughput", help="tuples/second table per (method, m)")
    _add(p_tp, "query", required=True)
    _add(p_tp, "m-sweep", required=True)
    _add(p_tp, "methods", default=f"{METHOD_CONV},{METHOD_AMS}")
    _add(p_tp, "seed", default=0, type=int)
    _add(p_tp, "reps", default=5, type=int)

    return parser


def _load_graph(query_path: str):
    return build_join_graph(load_query(query_path))


def _parse_methods(text: str) -> list[str]:
    methods = [part.strip() for part in text.split(",") if part.strip()]
    for method in methods:
        if method not in (METHOD_CONV, METHOD_AMS):
            raise QueryError(f"unknown method {method!r}")
    if not methods:
        raise QueryError("no methods given")
    return methods


def cmd_sketch(args) -> int:
    graph = _load_graph(args.query)
    config = SketchConfig(m=args.m, l=args.reps, seed=args.seed, method=args.method)
    columns = read_all_columns(graph)
    n_tuples = sum(len(deltas) for _, deltas in columns)
    start = time.perf_counter()
    sketches = build_sketches(graph, config, columns)
    elapsed = time.perf_counter() - start
    if n_tuples >= _WARN_MIN_TUPLES and elapsed > 0 and n_tuples / elapsed < SLOW_RATE_WARN:
        logger.warning(
            "low sketch throughput: %.0f tuples/s over %d tuples (method=%s, m=%d)",
            n_tuples / elapsed, n_tuples, config.method, config.m,
        )
    relations = [
        (graph.spec.relations[k].name, sketches[k].counters) for k in range(graph.r)
    ]
    save_sketch_file(args.out, config, relations)
    logger.info("wrote %s (%d relations, m=%d, l=%d)", args.out, graph.r, config.m, config.l)
    return 0


def cmd_estimate(args) -> int:
    graph = _load_graph(args.query)
    config, stored = load_sketch_file(args.sketches)
    expected_names = [decl.name for decl in graph.spec.relations]
    stored_names = [name for name, _ in stored]
    if stored_names != expected_names:
        raise QueryError(
            f"sketch file relations {stored_names} do not match query relations {expected_names}"
        )

    path = args.path
    if config.method == METHOD_AMS:
        if path not in ("auto",):
            raise QueryError(f"inference path {path!r} applies to conv sketches, file is ams")
        sketches = _rebind(graph, config, stored, ams=True)
        report = ams_estimate(sketches, graph)
    else:
        if path == "auto":
            path = "fft"
        sketches = _rebind(graph, config, stored, ams=False)
        report = estimate(sketches, graph, traversal_plan(graph, "auto"), path=path)
    payload = report.to_dict()
    payload["m"] = config.m
    payload["l"] = config.l
    payload["seed"] = config.seed
    print(json.dumps(payload))
    return 0


def _rebind(graph, config, stored, ams: bool):
    sketches = []
    hashes = None if ams else derive_hash_set(config, graph)
    for rel, (name, counters) in enumerate(stored):
        sk = ams_sketch(rel, config, graph) if ams else RelationSketch(rel, config, graph, hashes)
        if counters.shape != sk.counters.shape:
            raise QueryError(
                f"sketch for {name!r} has shape {counters.shape}, expected {sk.counters.shape}"
            )
        sk.counters = counters.astype(np.float64, copy=True)
        sketches.append(sk)
    return sketches


def cmd_exact(args) -> int:
    graph = _load_graph(args.query)
    freqs = [materialize(read_stream(graph, rel), graph, rel) for rel in range(graph.r)]
    value = exact_cardinality(freqs, graph, path=args.path)
    print(int(value) if float(value).is_integer() else value)
    return 0


def cmd_bench(args) -> int:
    graph = _load_graph(args.query)
    m_values = parse_m_sweep(args.m_sweep)
    methods = _parse_methods(args.methods)
    rows, summaries, slopes = run_bench(
        graph,
        m_values=m_values,
        trials=args.trials,
        master_seed=args.seed,
        methods=methods,
        l=args.reps,
        workers=args.workers,
    )
    write_bench_csv(args.out, rows, summaries, slopes)
    logger.info("wrote %s (%d rows)", args.out, len(rows))
    return 0


def cmd_throughput(args) -> int:
    graph = _load_graph(args.query)
    m_values = parse_m_sweep(args.m_sweep)
    methods = _parse_methods(args.methods)
    results = run_throughput(graph, m_values, methods, master_seed=args.seed, l=args.reps)
    print("method,m,relation,tuples,seconds,tuples_per_sec")
    for row in results:
        print(
            f"{row['method']},{row['m']},{row['relation']},{row['tuples']},"
            f"{row['seconds']:.6f},{row['tuples_per_sec']:.1f}"
        )
    return 0


_COMMANDS = {
    "sketch": cmd_sketch,
    "estimate": cmd_estimate,
    "exact": cmd_exact,
    "bench": cmd_bench,
    "throughput": cmd_throughput,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except QueryError as exc:
        logger.error("query error: %s", exc)
        return EXIT_QUERY
    except (DataError, BudgetError) as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
