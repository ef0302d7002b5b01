"""Operator invariants as plain assertion functions of a seed.

The property tests drive these through hypothesis; the acceptance suite runs
them over a fixed seed range.
"""

import numpy as np

from gattn.ops import (
    HgaoParams,
    LinearWeights,
    attn,
    cgao_forward,
    gao_forward,
    hgao_forward,
    projection_scores,
    select_neighbors,
)
import oracles
from helpers import graph_with_loops, random_edges


def instance(seed, max_n=20, max_d=6):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    x = rng.standard_normal((d, n))
    g = graph_with_loops(n, random_edges(rng, n, rng.uniform(0.1, 0.6)), x)
    t = LinearWeights(None, rng.standard_normal((d, d)), rng.standard_normal((max(1, d - 1), d)))
    p = rng.standard_normal(d)
    return rng, g, x, t, p


def distinct_scores(x, p):
    y = projection_scores(x, p)[1]
    return np.unique(y).size == y.size


def check_normalization(seed):
    rng, g, x, t, p = instance(seed)
    k = int(rng.integers(1, 5))
    s_gao = gao_forward(x, g, t)[1].inner.s
    np.testing.assert_allclose(s_gao.sum(axis=0), 1.0, rtol=0, atol=1e-12)
    s_h = hgao_forward(x, g, HgaoParams(p, k, t))[1].s
    np.testing.assert_allclose(s_h.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    s_c = cgao_forward(x, LinearWeights(rng.standard_normal((3, x.shape[0])), None, None))[1].s
    np.testing.assert_allclose(s_c.sum(axis=0), 1.0, rtol=0, atol=1e-12)


def check_locality(seed):
    """Finite differences w.r.t. nodes outside a node's (selected) neighborhood are exactly zero.

    A node's own features always enter through its query, so ``j == i`` is
    exempt from the hGAO selection check.
    """
    rng, g, x, t, p = instance(seed, max_n=12)
    k = int(rng.integers(1, 4))
    adj = g.dense_adjacency()
    hp = HgaoParams(p, k, t)
    idx, valid, _ = select_neighbors(g, projection_scores(x, p)[1], k)
    base_gao = gao_forward(x, g, t)[0]
    base_h = hgao_forward(x, g, hp)[0]
    for j in range(g.num_nodes):
        for c in range(x.shape[0]):
            xp = x.copy()
            xp[c, j] += 1e-6
            d_gao = gao_forward(xp, g, t)[0] - base_gao
            d_h = hgao_forward(xp, g, hp)[0] - base_h
            for i in range(g.num_nodes):
                if not adj[j, i]:
                    assert not d_gao[:, i].any()
                    assert not d_h[:, i].any()
                elif j != i and j not in idx[i][valid[i]] and _selection_stable(xp, g, p, k, idx, valid):
                    assert not d_h[:, i].any()


def _selection_stable(xp, g, p, k, idx, valid):
    idx2, valid2, _ = select_neighbors(g, projection_scores(xp, p)[1], k)
    return np.array_equal(idx2[valid2], idx[valid])


def check_permutation(seed):
    rng, g, x, t, p = instance(seed)
    perm = rng.permutation(g.num_nodes)
    gp = g.permuted(perm)
    xp = x[:, perm]
    np.testing.assert_allclose(gao_forward(xp, gp, t)[0], gao_forward(x, g, t)[0][:, perm], rtol=0, atol=1e-12)
    tc = LinearWeights(rng.standard_normal((2, x.shape[0])), None, None)
    np.testing.assert_allclose(cgao_forward(xp, tc)[0], cgao_forward(x, tc)[0][:, perm], rtol=0, atol=1e-12)
    if distinct_scores(x, p):
        hp = HgaoParams(p, int(rng.integers(1, 5)), t)
        np.testing.assert_allclose(hgao_forward(xp, gp, hp)[0], hgao_forward(x, g, hp)[0][:, perm],
                                   rtol=0, atol=1e-12)


def check_projection_scale(seed):
    rng, g, x, t, p = instance(seed)
    k = int(rng.integers(1, 5))
    c = float(rng.choice([-1.0, 1.0]) * rng.uniform(1e-3, 1e3))
    a, ca = hgao_forward(x, g, HgaoParams(p, k, t))
    b, cb = hgao_forward(x, g, HgaoParams(c * p, k, t))
    np.testing.assert_allclose(ca.y, cb.y, rtol=0, atol=1e-12)
    if distinct_scores(x, p):
        np.testing.assert_array_equal(ca.idx, cb.idx)
    np.testing.assert_allclose(ca.gate, cb.gate, rtol=0, atol=1e-12)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def check_nesting(seed):
    rng, g, x, _, p = instance(seed)
    y = projection_scores(x, p)[1]
    if not distinct_scores(x, p):
        return
    prev = None
    for k in range(1, int(g.degrees().max()) + 2):
        idx, valid, _ = select_neighbors(g, y, k)
        sets = [set(idx[i][valid[i]].tolist()) for i in range(g.num_nodes)]
        if prev is not None:
            assert all(a <= b for a, b in zip(prev, sets))
        prev = sets


def check_full_budget_is_soft(seed):
    """With k at least the max degree, hGAO is masked soft attention over gated features."""
    rng, g, x, t, p = instance(seed)
    k = int(g.degrees().max()) + int(rng.integers(0, 3))
    z = hgao_forward(x, g, HgaoParams(p, k, t))[0]
    y = projection_scores(x, p)[1]
    xg = x * (1.0 / (1.0 + np.exp(-y)))[None, :]
    ref = attn(x, xg, xg, t, mask=g.dense_adjacency())[0]
    np.testing.assert_allclose(z, ref, rtol=0, atol=1e-12)


ALL_CHECKS = {
    "softmax normalization": check_normalization,
    "masked locality": check_locality,
    "permutation equivariance": check_permutation,
    "projection-scale invariance": check_projection_scale,
    "selection nesting": check_nesting,
    "full-budget hGAO equals gated soft attention": check_full_budget_is_soft,
}



def check_oracle_equivalence(seed):
    """Vectorized GAO/hGAO/cGAO against the loop oracles on one random graph."""
    rng = np.random.default_rng(10_000 + seed)
    n = int(rng.integers(1, 65))
    d = int(rng.integers(1, 17))
    x = rng.standard_normal((d, n))
    edges = random_edges(rng, n, rng.uniform(0.0, 0.5))
    g = graph_with_loops(n, edges, x)
    nbrs = oracles.adjacency_sets(n, edges)
    w_k = rng.standard_normal((d, d)) / np.sqrt(d)
    w_v = rng.standard_normal((int(rng.integers(1, 17)), d)) / np.sqrt(d)
    t = LinearWeights(None, w_k, w_v)
    p = rng.standard_normal(d)

    np.testing.assert_allclose(gao_forward(x, g, t)[0], oracles.naive_gao(x, nbrs, None, w_k, w_v),
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(gao_forward(x, g, t, keep_cache=False)[0], oracles.naive_gao(x, nbrs, None, w_k, w_v),
                               rtol=0, atol=1e-12)
    for k in (1, 2, 4, n):
        np.testing.assert_allclose(hgao_forward(x, g, HgaoParams(p, k, t))[0],
                                   oracles.naive_hgao(x, nbrs, p, k, None, w_k, w_v), rtol=0, atol=1e-12)
    w_q = rng.standard_normal((int(rng.integers(1, 17)), d)) / np.sqrt(d)
    w_s = rng.standard_normal((d, d)) / np.sqrt(d)
    np.testing.assert_allclose(cgao_forward(x, LinearWeights(w_q, None, w_s))[0],
                               oracles.naive_cgao(x, w_q, None, w_s), rtol=0, atol=1e-12)
    np.testing.assert_allclose(cgao_forward(x, LinearWeights(w_s, w_k, w_s))[0],
                               oracles.naive_cgao(x, w_s, w_k, w_s), rtol=0, atol=1e-12)
    np.testing.assert_allclose(cgao_forward(x)[0], oracles.naive_cgao(x), rtol=0, atol=1e-12)
