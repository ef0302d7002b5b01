"""Small graph builders shared by the test modules."""

from gattn.graph import Graph, add_self_loops


def random_edges(rng, n, density):
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < density]


def graph_with_loops(n, edges, x):
    return add_self_loops(Graph.from_edges(n, edges, x))
