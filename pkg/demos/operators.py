"""Run the three attention operators on a small graph and check one gradient.

    python3 demos/operators.py
"""

import numpy as np

from gattn import (
    Graph,
    HgaoParams,
    LinearWeights,
    add_self_loops,
    cgao_forward,
    gao_backward,
    gao_forward,
    hgao_backward,
    hgao_forward,
    make_rng,
)
from gattn.gradcheck import check_op
from gattn.ops import projection_scores, select_neighbors

rng = make_rng(0)
edges = [(0, 1), (0, 2), (0, 3), (1, 2), (3, 4), (4, 5), (2, 5)]
x = rng.standard_normal((4, 6))
g = add_self_loops(Graph.from_edges(6, edges, features=x))

# soft attention over each node's neighborhood
z_gao, cache = gao_forward(x, g)
print("GAO output shape:", z_gao.shape)
grads = gao_backward(cache, np.ones_like(z_gao))
print("GAO gradient keys:", sorted(grads))

# hard attention: rank neighbors by a projection score and keep the best k
p = rng.standard_normal(4)
_, y, _ = projection_scores(x, p)
idx, valid, tied = select_neighbors(g, y, k=2)
print("projection scores:", np.round(y, 3))
for i in range(g.num_nodes):
    print(f"  node {i}: neighbors {g.neighbors(i).tolist()} -> keeps {idx[i][valid[i]].tolist()}")
z_h, h_cache = hgao_forward(x, g, HgaoParams(p, k=2))
grads = hgao_backward(h_cache, np.ones_like(z_h))
print("hGAO gradient keys:", sorted(grads))

# channel-wise attention never forms an N x N matrix
t = LinearWeights(w_q=rng.standard_normal((4, 4)), w_v=rng.standard_normal((4, 4)))
z_c, _ = cgao_forward(x, t)
print("cGAO output shape:", z_c.shape)

# finite-difference check of the exact backward passes
for op in ("gao", "hgao", "cgao"):
    res = check_op(op, seed=0, n=6)
    print(f"gradcheck {op}: max relative error {res.max_error:.1e}")
