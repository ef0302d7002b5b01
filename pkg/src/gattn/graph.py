"""Graph data model, adjacency normalization, synthetic generators and JSON I/O."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DegreeZeroError, GraphFormatError, ParameterError

MASK_NAMES = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph in CSR form with node features stored ``d x N``.

    ``indptr``/``indices`` hold both directions of every edge; column indices
    are sorted within each row.  Use :meth:`from_edges` rather than building
    the CSR arrays by hand.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    masks: dict[str, np.ndarray] | None = None

    @classmethod
    def from_edges(cls, num_nodes, edges, features=None, labels=None, masks=None, *, warn_duplicates=False):
        """Build a graph from an undirected edge list.

        Edges are symmetrized and de-duplicated.  ``features`` defaults to an
        empty ``0 x N`` matrix.
        """
        n = int(num_nodes)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ParameterError(f"edge endpoint outside [0, {n})")
        both = np.concatenate((e, e[:, ::-1]), axis=0)
        keys = np.unique(both[:, 0] * n + both[:, 1]) if both.size else np.empty(0, np.int64)
        if warn_duplicates:
            undirected = {(min(u, v), max(u, v)) for u, v in e.tolist()}
            if len(undirected) < len(e):
                warnings.warn(f"{len(e) - len(undirected)} duplicate edge(s) removed", stacklevel=2)
        rows, cols = (keys // n, keys % n) if n else (keys, keys)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        feats = np.zeros((0, n)) if features is None else np.asarray(features, dtype=np.float64)
        lab = None if labels is None else np.asarray(labels, dtype=np.int64)
        msk = None if masks is None else {k: np.asarray(masks[k], dtype=np.int64) for k in MASK_NAMES}
        return cls(n, indptr, cols.astype(np.int64), feats, lab, msk)

    @property
    def edge_count(self) -> int:
        """Number of stored directed entries (C)."""
        return int(self.indptr[-1])

    @property
    def num_channels(self) -> int:
        return int(self.features.shape[0])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def has_self_loops(self) -> bool:
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        return int(np.count_nonzero(rows == self.indices)) == self.num_nodes

    def edge_list(self, include_self_loops: bool = False) -> list[tuple[int, int]]:
        """Undirected edges ``(u, v)`` with ``u < v`` (or ``u <= v``), sorted."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        keep = rows <= self.indices if include_self_loops else rows < self.indices
        return list(zip(rows[keep].tolist(), self.indices[keep].tolist()))

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(self.edge_count)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.num_nodes, self.num_nodes))

    def dense_adjacency(self) -> np.ndarray:
        return self.to_scipy().toarray().astype(bool)

    def with_features(self, features) -> Graph:
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.num_nodes:
            raise ParameterError(f"features must be d x {self.num_nodes}, got {feats.shape}")
        return Graph(self.num_nodes, self.indptr, self.indices, feats, self.labels, self.masks)

    def permuted(self, perm) -> Graph:
        """Relabel nodes so that new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        edges = [(inv[u], inv[v]) for u, v in self.edge_list(include_self_loops=True)]
        labels = None if self.labels is None else self.labels[perm]
        masks = None if self.masks is None else {k: np.sort(inv[v]) for k, v in self.masks.items()}
        return Graph.from_edges(self.num_nodes, edges, self.features[:, perm], labels, masks)

    def equals(self, other: Graph) -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        masks_same = (self.masks is None) == (other.masks is None) and (
            self.masks is None or all(same(self.masks[k], other.masks[k]) for k in MASK_NAMES)
        )
        return (
            self.num_nodes == other.num_nodes
            and same(self.indptr, other.indptr)
            and same(self.indices, other.indices)
            and same(self.features, other.features)
            and same(self.labels, other.labels)
            and masks_same
        )


def validate(g: Graph) -> None:
    """Raise ``ParameterError`` unless every structural invariant holds."""
    n = g.num_nodes
    if g.indptr.shape != (n + 1,) or g.indptr[0] != 0 or np.any(np.diff(g.indptr) < 0):
        raise ParameterError("CSR offsets must start at 0 and be nondecreasing")
    if g.indptr[-1] != g.indices.size:
        raise ParameterError("CSR offsets must end at the number of stored entries")
    if g.indices.size and (g.indices.min() < 0 or g.indices.max() >= n):
        raise ParameterError("column index out of range")
    a = g.to_scipy()
    if a.nnz != g.edge_count or (a != a.T).nnz:
        raise ParameterError("adjacency must be symmetric without duplicate entries")
    if g.features.ndim != 2 or g.features.shape[1] != n:
        raise ParameterError(f"features must have {n} columns, got shape {g.features.shape}")
    if g.labels is not None and g.labels.shape != (n,):
        raise ParameterError("labels must have one entry per node")
    if g.masks is not None:
        seen = np.zeros(n, dtype=bool)
        for name in MASK_NAMES:
            m = g.masks[name]
            if m.size and (m.min() < 0 or m.max() >= n):
                raise ParameterError(f"mask {name!r} has an out-of-range node")
            if np.any(seen[m]) or np.unique(m).size != m.size:
                raise ParameterError("masks must be pairwise disjoint")
            seen[m] = True


def add_self_loops(g: Graph) -> Graph:
    """Return ``g`` with exactly one self-loop per node (idempotent)."""
    loops = np.repeat(np.arange(g.num_nodes), 2).reshape(-1, 2)
    edges = np.concatenate((np.asarray(g.edge_list(include_self_loops=True), dtype=np.int64).reshape(-1, 2), loops))
    return Graph.from_edges(g.num_nodes, edges, g.features, g.labels, g.masks)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Per-edge weights aligned with a graph's CSR structure.

    Row ``i`` holds the weights node ``i`` uses to aggregate its neighbors.
    """

    mode: str
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.indptr.size - 1

    def to_scipy(self) -> sp.csr_matrix:
        if self._csr is None:
            n = self.num_nodes
            object.__setattr__(self, "_csr", sp.csr_matrix((self.values, self.indices, self.indptr), shape=(n, n)))
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def normalize_adjacency(g: Graph, mode: str = "symmetric") -> NormalizedAdjacency:
    deg = g.degrees().astype(np.float64)
    rows = np.repeat(np.arange(g.num_nodes), g.degrees())
    if mode == "binary":
        values = np.ones(g.edge_count)
    elif mode in ("symmetric", "row_mean"):
        if np.any(deg == 0):
            bad = np.flatnonzero(deg == 0)
            raise DegreeZeroError(f"nodes {bad[:8].tolist()} have degree zero; add self-loops first")
        if mode == "symmetric":
            inv_sqrt = 1.0 / np.sqrt(deg)
            values = inv_sqrt[rows] * inv_sqrt[g.indices]
        else:
            values = 1.0 / deg[rows]
    else:
        raise ParameterError(f"unknown normalization mode {mode!r}")
    return NormalizedAdjacency(mode, g.indptr, g.indices, values)


def _random_masks(rng: np.random.Generator, n: int, split) -> dict[str, np.ndarray]:
    perm = rng.permutation(n)
    n_train = int(round(split[0] * n))
    n_val = int(round(split[1] * n))
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return {name: np.sort(p) for name, p in zip(MASK_NAMES, parts)}


def generate_sbm(rng, nodes_per_block, p_in, p_out, feature_noise=0.0, split=(0.1, 0.2, 0.7)) -> Graph:
    """Stochastic block model graph with noisy one-hot block features.

    Features are ``num_blocks x N``; masks are a random 10/20/70 split by
    default.  Self-loops are not added.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ParameterError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_noise < 0:
        raise ParameterError("feature_noise must be nonnegative")
    sizes = [int(s) for s in nodes_per_block]
    if not sizes or min(sizes) < 1:
        raise ParameterError("every block needs at least one node")
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = labels.size
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draw = rng.random((n, n))
    u, v = np.nonzero(np.triu(draw < prob, k=1))
    features = np.zeros((len(sizes), n))
    features[labels, np.arange(n)] = 1.0
    if feature_noise > 0:
        features = features + rng.normal(0.0, feature_noise, size=features.shape)
    masks = _random_masks(rng, n, split)
    return Graph.from_edges(n, np.stack((u, v), axis=1), features, labels, masks)


def random_graph(rng, num_nodes: int, avg_degree: float, channels: int = 0) -> Graph:
    """Sparse random undirected graph with roughly the given average degree.

    Features are standard normal, ``channels x N``.
    """
    n = int(num_nodes)
    m = int(round(n * avg_degree / 2))
    u = rng.integers(0, n, size=m)
    v = rng.integers(0, n - 1, size=m)
    v = v + (v >= u)
    features = rng.standard_normal((channels, n))
    return Graph.from_edges(n, np.stack((u, v), axis=1), features)


_FIELDS = {"num_nodes", "edges", "channels", "features", "labels", "masks"}


def _field_error(path, name, msg) -> GraphFormatError:
    return GraphFormatError(f"{path}: field {name!r}: {msg}")


def save_graph(g: Graph, path) -> None:
    """Write ``g`` as JSON; self-loops are not serialized."""
    doc = {
        "num_nodes": g.num_nodes,
        "edges": [list(e) for e in g.edge_list()],
        "channels": g.num_channels,
        "features": g.features.tolist(),
        "labels": None if g.labels is None else g.labels.tolist(),
        "masks": None if g.masks is None else {k: g.masks[k].tolist() for k in MASK_NAMES},
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_graph(path) -> Graph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise GraphFormatError(f"{path}: top level must be an object")
    unknown = set(doc) - _FIELDS
    if unknown:
        raise GraphFormatError(f"{path}: unknown field(s) {sorted(unknown)}")
    for name in ("num_nodes", "edges", "channels", "features"):
        if name not in doc:
            raise _field_error(path, name, "missing")

    n = doc["num_nodes"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise _field_error(path, "num_nodes", "must be a nonnegative integer")
    edges = doc["edges"]
    if not isinstance(edges, list):
        raise _field_error(path, "edges", "must be a list of [u, v] pairs")
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            raise _field_error(path, "edges", f"entry {i} is not an integer pair")
        if not (0 <= e[0] < n and 0 <= e[1] < n):
            raise _field_error(path, "edges", f"entry {i} references a node outside [0, {n})")
        if e[0] == e[1]:
            raise _field_error(path, "edges", f"entry {i} is a self-loop")

    d = doc["channels"]
    if not isinstance(d, int) or d < 0:
        raise _field_error(path, "channels", "must be a nonnegative integer")
    try:
        feats = np.asarray(doc["features"], dtype=np.float64).reshape(-1, n) if n else np.zeros((d, 0))
    except (TypeError, ValueError):
        raise _field_error(path, "features", "must be rows of numbers") from None
    if feats.shape != (d, n) or not np.all(np.isfinite(feats)):
        raise _field_error(path, "features", f"expected {d} finite rows of length {n}")

    labels = doc.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != n):
        raise _field_error(path, "labels", f"expected {n} class ids")
    masks = doc.get("masks")
    if masks is not None:
        if not isinstance(masks, dict) or set(masks) != set(MASK_NAMES):
            raise _field_error(path, "masks", f"expected keys {list(MASK_NAMES)}")

    g = Graph.from_edges(n, edges, feats, labels, masks, warn_duplicates=True)
    try:
        validate(g)
    except ParameterError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None
    return g

