"""Cost model, instrumented counts and wall-clock benchmarks for GAO, hGAO and cGAO.

The closed forms describe a single attention layer on ``N`` nodes with ``d``
input and output channels, key and value transforms, and no query transform:

* GAO: ``2 N^2 d + 2 N d^2`` (two transforms, scores, weighted sum)
* cGAO: ``4 N d^2`` (two transforms, channel scores, weighted sum)
* hGAO: ``N^2 + 2 S d^2 + 2 S d + N d`` with ``S = sum_i |idx_i|`` (``N k`` when
  every node has at least ``k`` neighbors): dense masked ranking, per-node
  key/value transforms of the selected columns, per-node attention, projection.

The hGAO form models the per-node layer graph; this package's hGAO applies
the transforms to all of ``X`` once, which is cheaper, and its instrumented
count is :func:`implementation_madd`.

Memory is accounted as 4-byte entries of: the input, query/key/value copies,
the output (``5 N d``), the coefficient matrix (``N^2``, or ``d^2`` for cGAO)
and the two transform weights (``2 d^2``).  1 MB = 10^6 bytes.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ParameterError, UnknownOperatorError
from .graph import Graph, add_self_loops, random_graph
from .ops import HgaoParams, LinearWeights, cgao_forward, gao_forward, hgao_forward, select_neighbors, projection_scores
from .tensor import count_madds, make_rng

OPERATORS = ("gao", "hgao", "cgao")
BYTES_PER_ENTRY = 4
BENCH_AVG_DEGREE = 10

# published reference measurements at d=48, k=8:
# (MAdd in millions, memory in MB, CPU time in ms, cost saving %, memory saving %, speedup)
REFERENCE_COSTS = {
    1000: {
        "gao": (100.61, 4.98, 8.19, 0.00, 0.00, 1.0),
        "hgao": (37.89, 4.98, 5.61, 62.34, 0.00, 1.46),
        "cgao": (9.21, 0.99, 0.82, 90.84, 80.12, 9.99),
    },
    10000: {
        "gao": (9646.08, 409.6, 947.24, 0.00, 0.00, 1.0),
        "hgao": (468.96, 409.6, 371.12, 95.14, 0.00, 2.55),
        "cgao": (92.16, 9.61, 17.96, 99.04, 97.65, 52.74),
    },
    20000: {
        "gao": (38492.16, 1619.2, 12784.45, 0.00, 0.00, 1.0),
        "hgao": (1137.97, 1619.2, 4548.62, 97.04, 0.00, 2.81),
        "cgao": (184.32, 19.2, 29.71, 99.52, 98.81, 430.31),
    },
}


def _check_op(op: str) -> None:
    if op not in OPERATORS:
        raise UnknownOperatorError(f"unknown operator {op!r}; expected one of {OPERATORS}")


def _selected_total(n, k, selected_sizes) -> int:
    if selected_sizes is not None:
        return int(np.sum(selected_sizes))
    if k is None:
        raise ParameterError("hgao cost needs k or concrete selected sizes")
    return n * k


def count_madd(op: str, n: int, d: int, k: int | None = None, selected_sizes=None) -> int:
    """Closed-form MAdd count of one layer (see module docstring)."""
    _check_op(op)
    if n < 0 or d < 0:
        raise ParameterError("dimensions must be nonnegative")
    if op == "gao":
        return 2 * n * n * d + 2 * n * d * d
    if op == "cgao":
        return 4 * n * d * d
    s = _selected_total(n, k, selected_sizes)
    return n * n + 2 * s * d * d + 2 * s * d + n * d


def implementation_madd(op: str, n: int, d: int, k: int | None = None, selected_sizes=None) -> int:
    """MAdds the package's own forward pass performs (what the counters record)."""
    _check_op(op)
    if op != "hgao":
        return count_madd(op, n, d)
    s = _selected_total(n, k, selected_sizes)
    return n * d + 2 * n * d * d + 2 * s * d


def attention_buffer_entries(op: str, n: int, d: int) -> int:
    _check_op(op)
    return d * d if op == "cgao" else n * n


def model_memory(op: str, n: int, d: int) -> int:
    """Modeled peak bytes of one layer's materialized matrices."""
    return BYTES_PER_ENTRY * (5 * n * d + attention_buffer_entries(op, n, d) + 2 * d * d)


@dataclass
class BenchSetup:
    """Inputs and weights for benchmarking one operator on one graph."""

    x: np.ndarray
    graph: Graph
    transforms: LinearWeights
    p: np.ndarray
    k: int

    def run(self, op: str):
        _check_op(op)
        if op == "gao":
            return gao_forward(self.x, self.graph, self.transforms, keep_cache=False)[0]
        if op == "hgao":
            return hgao_forward(self.x, self.graph, HgaoParams(self.p, self.k, self.transforms))[0]
        return cgao_forward(self.x, self.transforms)[0]

    def selected_sizes(self) -> np.ndarray:
        _, y, _ = projection_scores(self.x, self.p)
        _, valid, _ = select_neighbors(self.graph, y, self.k)
        return valid.sum(axis=1)


def synthetic_setup(n: int, d: int, k: int = 8, seed: int = 0, avg_degree: float = BENCH_AVG_DEGREE) -> BenchSetup:
    """Random sparse graph (self-loops added) with standard normal ``d x n`` features."""
    rng = make_rng(seed)
    g = add_self_loops(random_graph(rng, n, avg_degree, channels=d))
    return setup_for_graph(g, k, rng)


def setup_for_graph(g: Graph, k: int, rng) -> BenchSetup:
    if not g.has_self_loops():
        g = add_self_loops(g)
    d = g.num_channels
    scale = 1.0 / np.sqrt(d)
    t = LinearWeights(w_k=rng.standard_normal((d, d)) * scale, w_v=rng.standard_normal((d, d)) * scale)
    return BenchSetup(g.features, g, t, rng.standard_normal(d), k)


def instrumented_madd(setup: BenchSetup, op: str) -> int:
    with count_madds() as counter:
        setup.run(op)
    return counter.total


def bench_wall_clock(fn, repeats: int = 3, warmup: int = 1) -> dict:
    """Time ``fn()`` single-threaded; warm-up runs are discarded."""
    if repeats < 3:
        raise ParameterError("repeats must be >= 3")
    with threadpool_limits(limits=1):
        for _ in range(warmup):
            fn()
        runs = []
        for _ in range(repeats):
            t0 = time.perf_counter_ns()
            fn()
            runs.append(time.perf_counter_ns() - t0)
    return {"median_ns": int(statistics.median(runs)), "best_ns": min(runs), "runs_ns": runs}


@dataclass
class ProfileReport:
    op: str
    n: int
    d: int
    k: int | None
    madd: int
    modeled_bytes: int
    wall_ns: int
    cost_saving_pct: float
    mem_saving_pct: float
    speedup: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _saving(value, baseline) -> float:
    return round(100.0 * (1.0 - value / baseline), 2) if baseline else 0.0


def profile_setup(setup: BenchSetup, ops=OPERATORS, *, skip_wall=False, repeats=3) -> list[ProfileReport]:
    """Profile the requested operators; savings and speedup are relative to GAO."""
    for op in ops:
        _check_op(op)
    n, d, k = setup.graph.num_nodes, setup.x.shape[0], setup.k
    sizes = setup.selected_sizes() if "hgao" in ops else None
    base_madd = count_madd("gao", n, d)
    base_mem = model_memory("gao", n, d)
    walls = {}
    if not skip_wall:
        needed = list(ops) if "gao" in ops else ["gao", *ops]
        for op in needed:
            walls[op] = bench_wall_clock(lambda op=op: setup.run(op), repeats)["median_ns"]
    reports = []
    for op in ops:
        madd = count_madd(op, n, d, k, sizes if op == "hgao" else None)
        mem = model_memory(op, n, d)
        wall = walls.get(op, 0)
        speedup = round(walls["gao"] / wall, 2) if walls else None
        reports.append(ProfileReport(op, n, d, k if op == "hgao" else None, madd, mem, wall,
                                     _saving(madd, base_madd), _saving(mem, base_mem), speedup))
    return reports


def comparison_report(sizes=(1000, 10000, 20000), d=48, k=8, seed=0, *, skip_wall=False, repeats=3) -> list[ProfileReport]:
    reports = []
    for n in sizes:
        reports.extend(profile_setup(synthetic_setup(n, d, k, seed), skip_wall=skip_wall, repeats=repeats))
    return reports


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


_NAMES = {"gao": "GAO", "hgao": "hGAO", "cgao": "cGAO"}


def format_table(reports, with_reference: bool = True) -> str:
    """Human-readable comparison table, reference values alongside when known."""
    head = ["Input", "Layer", "MAdd", "Cost Saving", "Memory", "Memory Saving", "Time", "Speedup"]
    if with_reference:
        head += ["ref MAdd", "ref Cost Saving", "ref Memory", "ref Mem Saving", "ref Speedup"]
    rows = [head]
    for r in reports:
        row = [
            f"{r.n}x{r.d}",
            _NAMES[r.op],
            f"{r.madd / 1e6:,.2f}m",
            f"{r.cost_saving_pct:.2f}%",
            f"{r.modeled_bytes / 1e6:,.2f}MB",
            f"{r.mem_saving_pct:.2f}%",
            f"{r.wall_ns / 1e6:,.2f}ms" if r.speedup is not None else "-",
            f"{r.speedup:.2f}x" if r.speedup is not None else "-",
        ]
        if with_reference:
            ref = REFERENCE_COSTS.get(r.n, {}).get(r.op) if r.d == 48 and r.k in (None, 8) else None
            if ref is None:
                row += ["-"] * 5
            else:
                row += [f"{ref[0]:,.2f}m", f"{ref[3]:.2f}%", f"{ref[1]:,.2f}MB", f"{ref[4]:.2f}%", f"{ref[5]:.2f}x"]
        rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
