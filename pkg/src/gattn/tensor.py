"""Dense linear-algebra substrate.

Matrices are plain 2-D ``float64`` numpy arrays laid out channels x nodes
(``d x N``): column ``j`` is the feature vector of node ``j``.  Every matmul
that goes through :func:`matmul` is charged to the active MAdd counters, which
is how the profiler obtains instrumented operation counts.
"""

from __future__ import annotations

import contextlib
import contextvars
from collections.abc import Iterator, Sequence

import numpy as np
from scipy.special import expit

from .errors import DegenerateColumnError, DegenerateNeighborhoodError, DimensionError, ParameterError

NEG_INF = -np.inf


class MaddCounter:
    """Accumulates multiply-add counts, optionally split by tag."""

    def __init__(self) -> None:
        self.total = 0
        self.by_tag: dict[str, int] = {}

    def add(self, n: int, tag: str | None = None) -> None:
        self.total += int(n)
        if tag is not None:
            self.by_tag[tag] = self.by_tag.get(tag, 0) + int(n)


_active_counters: contextvars.ContextVar[tuple[MaddCounter, ...]] = contextvars.ContextVar(
    "gattn_madd_counters", default=()
)


@contextlib.contextmanager
def count_madds() -> Iterator[MaddCounter]:
    """Count MAdds of every instrumented operation inside the block.

    Counters nest; an inner block's work is also charged to outer blocks.
    """
    counter = MaddCounter()
    token = _active_counters.set(_active_counters.get() + (counter,))
    try:
        yield counter
    finally:
        _active_counters.reset(token)


def record_madds(n: int, tag: str | None = None) -> None:
    for counter in _active_counters.get():
        counter.add(n, tag)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator (PCG64); the stream is fixed across platforms for a given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a: np.ndarray, b: np.ndarray, tag: str | None = None) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    record_madds(a.shape[0] * a.shape[1] * b.shape[1], tag)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]))
    return a @ b


def softmax_columns(e: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Column-wise softmax with max subtraction.

    Entries equal to ``-inf`` (or where ``mask`` is False) get weight exactly 0
    and are excluded from the normalizer.
    """
    if mask is not None:
        if mask.shape != e.shape:
            raise DimensionError(f"mask shape {mask.shape} does not match logits {e.shape}")
        e = np.where(mask, e, NEG_INF)
    if e.shape[1] == 0:
        return np.empty_like(e, dtype=np.float64)
    col_max = e.max(axis=0, keepdims=True) if e.shape[0] else np.full((1, e.shape[1]), NEG_INF)
    if np.any(np.isneginf(col_max)):
        bad = np.flatnonzero(np.isneginf(col_max[0]))
        raise DegenerateColumnError(f"columns {bad[:8].tolist()} have no admissible entry")
    ex = np.exp(e - col_max)
    return ex / ex.sum(axis=0, keepdims=True)


def softmax_columns_backward(s: np.ndarray, ds: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product of :func:`softmax_columns` given its output ``s``."""
    return s * (ds - np.sum(s * ds, axis=0, keepdims=True))


def sigmoid(v) -> np.ndarray:
    return expit(np.asarray(v, dtype=np.float64))


def top_k_indices(scores, mask: Sequence[int] | np.ndarray, k: int) -> np.ndarray:
    """Indices from ``mask`` with the ``k`` largest scores, best first.

    Ties are broken by ascending index.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    cand = np.unique(np.asarray(mask, dtype=np.int64))
    if cand.size == 0:
        raise DegenerateNeighborhoodError("empty candidate set")
    s = np.asarray(scores, dtype=np.float64)[cand]
    order = np.lexsort((cand, -s))
    return cand[order[:k]]


def concat_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"cannot stack {a.shape} on {b.shape}: column counts differ")
    return np.vstack((a, b))


def diag_scale_columns(m: np.ndarray, g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1 or g.shape[0] != m.shape[1]:
        raise DimensionError(f"gate length {g.shape} does not match {m.shape[1]} columns")
    return m * g[None, :]
