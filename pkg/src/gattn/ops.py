"""Forward and backward passes of the attention operators and the GCN layer.

Every ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes that cache and the upstream gradient (same shape as the output) and
returns a dict of gradients keyed by input/parameter name.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateNeighborhoodError,
    DegenerateProjectionError,
    DimensionError,
    NondifferentiablePointWarning,
    ParameterError,
)
from .graph import Graph, NormalizedAdjacency
from .tensor import NEG_INF, matmul, record_madds, sigmoid, softmax_columns, softmax_columns_backward

PROJECTION_TOL = 1e-12
GAO_BLOCK = 1024


@dataclass
class LinearWeights:
    """Optional query/key/value transforms; ``None`` means identity."""

    w_q: np.ndarray | None = None
    w_k: np.ndarray | None = None
    w_v: np.ndarray | None = None

    def __post_init__(self):
        dq = None if self.w_q is None else self.w_q.shape[0]
        dk = None if self.w_k is None else self.w_k.shape[0]
        if dq is not None and dk is not None and dq != dk:
            raise DimensionError(f"query transform {self.w_q.shape} and key transform {self.w_k.shape} disagree")


_NO_TRANSFORM = LinearWeights()


def _transform(w, x, tag):
    return x if w is None else matmul(w, x, tag)


def _untransform(grads, name, w, raw, d_out):
    """Route a gradient w.r.t. a transformed input back to the raw input and weight."""
    if w is None:
        grads[name] = d_out
    else:
        grads[name] = w.T @ d_out
        grads["w_" + name] = d_out @ raw.T


def _check_upstream(upstream, shape):
    if upstream.shape != shape:
        raise DimensionError(f"upstream gradient {upstream.shape} does not match output {shape}")


# -- plain attention -------------------------------------------------------


@dataclass
class AttnCache:
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    qt: np.ndarray
    kt: np.ndarray
    vt: np.ndarray
    s: np.ndarray
    t: LinearWeights


def attn(q, k, v, t: LinearWeights | None = None, mask: np.ndarray | None = None):
    """Dot-product attention ``O = (W^V V) softmax((W^K K)^T W^Q Q)``.

    ``mask`` (keys x queries, boolean) removes entries from each column's
    softmax.
    """
    t = t or _NO_TRANSFORM
    qt = _transform(t.w_q, q, "attn.transform")
    kt = _transform(t.w_k, k, "attn.transform")
    vt = _transform(t.w_v, v, "attn.transform")
    if qt.shape[0] != kt.shape[0]:
        raise DimensionError(f"query dim {qt.shape} and key dim {kt.shape} disagree")
    if kt.shape[1] != vt.shape[1]:
        raise DimensionError(f"{kt.shape[1]} keys but {vt.shape[1]} values")
    e = matmul(kt.T, qt, "attn.scores")
    s = softmax_columns(e, mask)
    o = matmul(vt, s, "attn.combine")
    return o, AttnCache(q, k, v, qt, kt, vt, s, t)


def attn_backward(cache: AttnCache, upstream: np.ndarray) -> dict[str, np.ndarray]:
    _check_upstream(upstream, (cache.vt.shape[0], cache.qt.shape[1]))
    d_vt = upstream @ cache.s.T
    d_e = softmax_columns_backward(cache.s, cache.vt.T @ upstream)
    d_kt = cache.qt @ d_e.T
    d_qt = cache.kt @ d_e
    grads: dict[str, np.ndarray] = {}
    _untransform(grads, "q", cache.t.w_q, cache.q, d_qt)
    _untransform(grads, "k", cache.t.w_k, cache.k, d_kt)
    _untransform(grads, "v", cache.t.w_v, cache.v, d_vt)
    return grads


# -- GAO -------------------------------------------------------------------


@dataclass
class GaoCache:
    inner: AttnCache


def _mask_block(g: Graph, start: int, stop: int) -> np.ndarray:
    """Neighbor mask for query columns ``start:stop`` (rows are key nodes)."""
    lo, hi = g.indptr[start], g.indptr[stop]
    cols = np.repeat(np.arange(stop - start), np.diff(g.indptr[start:stop + 1]))
    mask = np.zeros((g.num_nodes, stop - start), dtype=bool)
    mask[g.indices[lo:hi], cols] = True
    return mask


def gao_forward(x, g: Graph, t: LinearWeights | None = None, *, keep_cache: bool = True):
    """Soft graph attention: every node attends over its neighborhood.

    Scores are computed for all node pairs and non-neighbors are masked out
    before the column softmax.  With ``keep_cache=False`` the score matrix is
    processed in column blocks to bound memory and no cache is returned.
    """
    if x.shape[1] != g.num_nodes:
        raise DimensionError(f"features have {x.shape[1]} columns but graph has {g.num_nodes} nodes")
    if keep_cache:
        o, inner = attn(x, x, x, t, mask=g.dense_adjacency())
        return o, GaoCache(inner)

    t = t or _NO_TRANSFORM
    qt = _transform(t.w_q, x, "attn.transform")
    kt = _transform(t.w_k, x, "attn.transform")
    vt = _transform(t.w_v, x, "attn.transform")
    if qt.shape[0] != kt.shape[0]:
        raise DimensionError(f"query dim {qt.shape} and key dim {kt.shape} disagree")
    n = g.num_nodes
    o = np.empty((vt.shape[0], n))
    kt_t = np.ascontiguousarray(kt.T)
    for start in range(0, n, GAO_BLOCK):
        stop = min(n, start + GAO_BLOCK)
        e = matmul(kt_t, qt[:, start:stop], "attn.scores")
        s = softmax_columns(e, _mask_block(g, start, stop))
        o[:, start:stop] = matmul(vt, s, "attn.combine")
    return o, None


def gao_backward(cache: GaoCache, upstream) -> dict[str, np.ndarray]:
    grads = attn_backward(cache.inner, upstream)
    out = {"x": grads.pop("q") + grads.pop("k") + grads.pop("v")}
    out.update(grads)
    return out


# -- hGAO ------------------------------------------------------------------


@dataclass
class HgaoParams:
    p: np.ndarray
    k: int
    transforms: LinearWeights | None = None


@dataclass
class HgaoCache:
    x: np.ndarray
    p: np.ndarray
    p_norm: float
    u: np.ndarray
    y: np.ndarray
    idx: np.ndarray
    valid: np.ndarray
    gate: np.ndarray
    qt: np.ndarray
    kt: np.ndarray
    vt: np.ndarray
    s: np.ndarray
    t: LinearWeights
    at_kink: bool
    tied: bool


def projection_scores(x, p) -> tuple[np.ndarray, np.ndarray, float]:
    """Return ``(x^T p, |x^T p| / ||p||, ||p||)``."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape[0] != x.shape[0]:
        raise DimensionError(f"projection vector has length {p.shape[0]}, features have {x.shape[0]} channels")
    p_norm = float(np.linalg.norm(p))
    if p_norm <= PROJECTION_TOL:
        raise DegenerateProjectionError(f"projection vector norm {p_norm:g} is too small")
    u = matmul(x.T, p[:, None], "hgao.project")[:, 0]
    return u, np.abs(u) / p_norm, p_norm


def select_neighbors(g: Graph, y: np.ndarray, k: int):
    """Per-node top-``k`` neighbors by score.

    Returns ``(idx, valid, tied)``: ``idx`` is ``N x kk`` (``kk = min(k, max
    degree)``) ordered best first with ties going to the lower node index,
    ``valid`` flags real entries for nodes with fewer than ``kk`` neighbors,
    and ``tied`` reports a tie straddling the selection boundary.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    deg = g.degrees()
    if g.num_nodes and deg.min() == 0:
        bad = np.flatnonzero(deg == 0)
        raise DegenerateNeighborhoodError(f"nodes {bad[:8].tolist()} have no neighbors")
    n = g.num_nodes
    width = int(deg.max()) if n else 0
    rows = np.repeat(np.arange(n), deg)
    pos = np.arange(g.edge_count) - np.repeat(g.indptr[:-1], deg)
    nbr = np.zeros((n, width), dtype=np.int64)
    scores = np.full((n, width), NEG_INF)
    nbr[rows, pos] = g.indices
    scores[rows, pos] = y[g.indices]
    # stable sort on CSR order (ascending node id) gives the index tie-break
    order = np.argsort(-scores, axis=1, kind="stable")
    kk = min(k, width)
    sel = order[:, :kk]
    idx = np.take_along_axis(nbr, sel, axis=1)
    valid = np.take_along_axis(scores, sel, axis=1) > NEG_INF
    tied = False
    if width > kk:
        ranked = np.take_along_axis(scores, order[:, kk - 1:kk + 1], axis=1)
        tied = bool(np.any((deg > kk) & (ranked[:, 0] == ranked[:, 1])))
    return idx, valid, tied


def hgao_forward(x, g: Graph, hp: HgaoParams):
    """Hard graph attention.

    Each node ranks its neighbors (itself included) by projection score,
    keeps the ``k`` best, gates them by the sigmoid of their score and attends
    over the gated set.  Transforms are applied once to all of ``x``.
    """
    if x.shape[1] != g.num_nodes:
        raise DimensionError(f"features have {x.shape[1]} columns but graph has {g.num_nodes} nodes")
    t = hp.transforms or _NO_TRANSFORM
    u, y, p_norm = projection_scores(x, hp.p)
    idx, valid, tied = select_neighbors(g, y, hp.k)
    qt = _transform(t.w_q, x, "hgao.transform")
    kt = _transform(t.w_k, x, "hgao.transform")
    vt = _transform(t.w_v, x, "hgao.transform")
    if qt.shape[0] != kt.shape[0]:
        raise DimensionError(f"query dim {qt.shape} and key dim {kt.shape} disagree")

    gate = sigmoid(y[idx]) * valid
    kg = kt[:, idx] * gate
    vg = vt[:, idx] * gate
    e = np.einsum("cnj,cn->nj", kg, qt)
    s = softmax_columns(e.T, valid.T).T
    z = np.einsum("cnj,nj->cn", vg, s)
    n_sel = int(valid.sum())
    record_madds(n_sel * qt.shape[0], "hgao.scores")
    record_madds(n_sel * vt.shape[0], "hgao.combine")

    at_kink = bool(np.any(y[idx][valid] == 0.0))
    cache = HgaoCache(x, np.asarray(hp.p, dtype=np.float64).reshape(-1), p_norm, u, y, idx, valid, gate,
                      qt, kt, vt, s, t, at_kink, tied)
    return z, cache


def hgao_backward(cache: HgaoCache, upstream) -> dict[str, np.ndarray]:
    """Exact VJP with the selection held fixed.

    ``p`` gets gradient through the gates only; the |.| kink uses subgradient 0.
    """
    c = cache
    _check_upstream(upstream, (c.vt.shape[0], c.x.shape[1]))
    if c.at_kink or c.tied:
        what = "a selected score of exactly 0" if c.at_kink else "a tie at the top-k boundary"
        warnings.warn(f"hgao backward evaluated at {what}; gradient is a subgradient",
                      NondifferentiablePointWarning, stacklevel=2)
    k_raw = c.kt[:, c.idx]
    v_raw = c.vt[:, c.idx]
    d_vg = upstream[:, :, None] * c.s[None]
    d_s = np.einsum("cnj,cn->nj", v_raw * c.gate, upstream)
    d_e = c.s * (d_s - np.sum(c.s * d_s, axis=1, keepdims=True))
    d_kg = d_e[None] * c.qt[:, :, None]
    d_qt = np.einsum("cnj,nj->cn", k_raw * c.gate, d_e)

    d_gate = (np.sum(d_kg * k_raw, axis=0) + np.sum(d_vg * v_raw, axis=0)) * c.valid
    sel = c.idx[c.valid]
    d_kt = np.zeros_like(c.kt)
    d_vt = np.zeros_like(c.vt)
    np.add.at(d_kt, (slice(None), sel), (d_kg * c.gate)[:, c.valid])
    np.add.at(d_vt, (slice(None), sel), (d_vg * c.gate)[:, c.valid])

    d_y = np.zeros_like(c.y)
    np.add.at(d_y, sel, (d_gate * c.gate * (1.0 - c.gate))[c.valid])
    d_u = d_y * np.sign(c.u) / c.p_norm
    d_p = c.x @ d_u - float(d_y @ c.y) * c.p / c.p_norm**2

    grads: dict[str, np.ndarray] = {"p": d_p}
    parts = {}
    _untransform(parts, "q", c.t.w_q, c.x, d_qt)
    _untransform(parts, "k", c.t.w_k, c.x, d_kt)
    _untransform(parts, "v", c.t.w_v, c.x, d_vt)
    grads["x"] = parts.pop("q") + parts.pop("k") + parts.pop("v") + c.p[:, None] * d_u[None, :]
    grads.update(parts)
    return grads


# -- cGAO ------------------------------------------------------------------


@dataclass
class CgaoCache:
    x: np.ndarray
    qc: np.ndarray
    kc: np.ndarray
    vc: np.ndarray
    s: np.ndarray
    t: LinearWeights


def cgao_forward(x, t: LinearWeights | None = None):
    """Channel-wise attention: channels attend to channels, no adjacency.

    ``E = K_c Q_c^T`` (source x output channels) is normalized over source
    channels and ``O = softmax(E)^T V_c``.  Without transforms
    ``Q_c = K_c = V_c = x``.
    """
    t = t or _NO_TRANSFORM
    if x.shape[0] < 1:
        raise DimensionError("cgao needs at least one channel")
    qc = _transform(t.w_q, x, "cgao.transform")
    kc = _transform(t.w_k, x, "cgao.transform")
    vc = _transform(t.w_v, x, "cgao.transform")
    if kc.shape[0] != vc.shape[0]:
        raise DimensionError(f"{kc.shape[0]} key channels but {vc.shape[0]} value channels")
    e = matmul(kc, qc.T, "cgao.scores")
    s = softmax_columns(e)
    o = matmul(s.T, vc, "cgao.combine")
    return o, CgaoCache(x, qc, kc, vc, s, t)


def cgao_backward(cache: CgaoCache, upstream) -> dict[str, np.ndarray]:
    c = cache
    _check_upstream(upstream, (c.qc.shape[0], c.x.shape[1]))
    d_vc = c.s @ upstream
    d_e = softmax_columns_backward(c.s, c.vc @ upstream.T)
    d_kc = d_e @ c.qc
    d_qc = d_e.T @ c.kc
    parts: dict[str, np.ndarray] = {}
    _untransform(parts, "q", c.t.w_q, c.x, d_qc)
    _untransform(parts, "k", c.t.w_k, c.x, d_kc)
    _untransform(parts, "v", c.t.w_v, c.x, d_vc)
    grads = {"x": parts.pop("q") + parts.pop("k") + parts.pop("v")}
    grads.update(parts)
    return grads


# -- GCN -------------------------------------------------------------------

ACTIVATIONS = ("identity", "relu")


@dataclass
class GcnWeights:
    w: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")


@dataclass
class GcnCache:
    x: np.ndarray
    a_hat: NormalizedAdjacency
    w: GcnWeights
    pre: np.ndarray


def aggregate(a_hat: NormalizedAdjacency, h: np.ndarray) -> np.ndarray:
    """Column ``i`` of the result is ``sum_j a_hat[i, j] * h[:, j]``."""
    record_madds(a_hat.values.size * h.shape[0], "gcn.aggregate")
    return np.asarray((a_hat.to_scipy() @ h.T).T)


def gcn_forward(x, a_hat: NormalizedAdjacency, w: GcnWeights):
    if w.w.shape[1] != x.shape[0]:
        raise DimensionError(f"weight {w.w.shape} cannot act on {x.shape[0]} input channels")
    if a_hat.num_nodes != x.shape[1]:
        raise DimensionError(f"adjacency over {a_hat.num_nodes} nodes, features have {x.shape[1]} columns")
    pre = aggregate(a_hat, matmul(w.w, x, "gcn.weight"))
    o = np.maximum(pre, 0.0) if w.activation == "relu" else pre
    return o, GcnCache(x, a_hat, w, pre)


def gcn_backward(cache: GcnCache, upstream) -> dict[str, np.ndarray]:
    _check_upstream(upstream, cache.pre.shape)
    d_pre = upstream * (cache.pre > 0) if cache.w.activation == "relu" else upstream
    d_h = np.asarray((cache.a_hat.to_scipy().T @ d_pre.T).T)
    return {"x": cache.w.w.T @ d_h, "w": d_h @ cache.x.T}
