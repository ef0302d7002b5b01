"""Train GANet with each attention kind on a two-block synthetic graph.

    python3 demos/training.py
"""

from gattn import TrainConfig, generate_sbm, make_rng, train_node_classifier
from gattn.net import uniform_config

g = generate_sbm(make_rng(7), [100, 100], 0.9, 0.05, 0.5)
print(f"graph: {g.num_nodes} nodes, {g.edge_count // 2} edges, {g.num_channels} feature channels")
for kind in ("hgao", "cgao", "gao"):
    cfg = uniform_config(g.num_channels, 2, kind, gams=2, hidden=16, k=8, dropout_keep=0.5)
    res = train_node_classifier(g, cfg, TrainConfig(epochs=200, seed=0))
    print(f"{kind:>5}: {len(res.history)} epochs, best val {res.best_val_acc:.3f} at epoch {res.best_epoch}, "
          f"test {res.test_acc:.3f}")
