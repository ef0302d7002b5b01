"""Soft, hard and channel-wise graph attention operators in numpy, with exact gradients."""

from .graph import Graph, NormalizedAdjacency, add_self_loops, generate_sbm, load_graph, normalize_adjacency, save_graph
from .net import GamConfig, GanetConfig, ParamStore, ganet_backward, ganet_forward, init_params
from .ops import (
    HgaoParams,
    LinearWeights,
    attn,
    attn_backward,
    cgao_backward,
    cgao_forward,
    gao_backward,
    gao_forward,
    gcn_backward,
    gcn_forward,
    hgao_backward,
    hgao_forward,
)
from .tensor import make_rng
from .train import TrainConfig, train_node_classifier

__version__ = "0.1.0"
