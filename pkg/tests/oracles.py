"""Slow reference implementations used to check the vectorized code.

Everything here works from plain Python adjacency sets and explicit loops,
and imports nothing from ``gattn`` so that a shared bug cannot cancel out.
"""

import math

import numpy as np


def naive_matmul(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for t in range(a.shape[1]):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def adjacency_sets(n, edges, self_loops=True):
    nbrs = [set() for _ in range(n)]
    for u, v in edges:
        nbrs[u].add(v)
        nbrs[v].add(u)
    if self_loops:
        for i in range(n):
            nbrs[i].add(i)
    return [sorted(s) for s in nbrs]


def _softmax(logits):
    m = max(logits)
    ex = [math.exp(z - m) for z in logits]
    total = sum(ex)
    return [z / total for z in ex]


def _apply(w, x):
    return x if w is None else np.asarray(w) @ x


def naive_attention_column(q, keys, values):
    """One query vector against a list of key/value column vectors."""
    logits = [float(np.dot(k, q)) for k in keys]
    weights = _softmax(logits)
    out = np.zeros_like(values[0], dtype=float)
    for w, v in zip(weights, values):
        out = out + w * v
    return out


def naive_gao(x, nbrs, w_q=None, w_k=None, w_v=None):
    q, k, v = _apply(w_q, x), _apply(w_k, x), _apply(w_v, x)
    out = np.zeros((v.shape[0], x.shape[1]))
    for i in range(x.shape[1]):
        out[:, i] = naive_attention_column(q[:, i], [k[:, j] for j in nbrs[i]], [v[:, j] for j in nbrs[i]])
    return out


def projection(x, p):
    norm = math.sqrt(sum(float(c) ** 2 for c in p))
    return [abs(sum(float(x[c, j]) * float(p[c]) for c in range(x.shape[0]))) / norm for j in range(x.shape[1])]


def naive_select(y, candidates, k):
    return sorted(candidates, key=lambda j: (-y[j], j))[:k]


def naive_hgao(x, nbrs, p, k, w_q=None, w_k=None, w_v=None):
    y = projection(x, p)
    q, kt, vt = _apply(w_q, x), _apply(w_k, x), _apply(w_v, x)
    out = np.zeros((vt.shape[0], x.shape[1]))
    for i in range(x.shape[1]):
        sel = naive_select(y, nbrs[i], k)
        gates = [1.0 / (1.0 + math.exp(-y[j])) for j in sel]
        keys = [g * kt[:, j] for g, j in zip(gates, sel)]
        values = [g * vt[:, j] for g, j in zip(gates, sel)]
        out[:, i] = naive_attention_column(q[:, i], keys, values)
    return out


def naive_cgao(x, w_q=None, w_k=None, w_v=None):
    """Each output channel is a softmax-weighted mix of source channels."""
    qc, kc, vc = _apply(w_q, x), _apply(w_k, x), _apply(w_v, x)
    out = np.zeros((qc.shape[0], x.shape[1]))
    for c in range(qc.shape[0]):
        logits = [float(np.dot(kc[s], qc[c])) for s in range(kc.shape[0])]
        weights = _softmax(logits)
        for s, w in enumerate(weights):
            out[c] += w * vc[s]
    return out


def dense_symmetric_adjacency(nbrs):
    n = len(nbrs)
    a = np.zeros((n, n))
    for i in range(n):
        for j in nbrs[i]:
            a[i, j] = 1.0 / math.sqrt(len(nbrs[i]) * len(nbrs[j]))
    return a


def naive_gcn(x, a_dense, w, relu=False):
    out = w @ x @ a_dense.T
    return np.maximum(out, 0.0) if relu else out
