"""GAM blocks and the GANet stack: embedding GCN, GAMs with skip concatenation, output GCN."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError
from .graph import Graph, NormalizedAdjacency, normalize_adjacency
from .ops import (
    ACTIVATIONS,
    GcnWeights,
    HgaoParams,
    LinearWeights,
    cgao_backward,
    cgao_forward,
    gao_backward,
    gao_forward,
    gcn_backward,
    gcn_forward,
    hgao_backward,
    hgao_forward,
)
from .tensor import concat_rows

ATTENTION_KINDS = ("gao", "hgao", "cgao")
READOUTS = ("none", "mean_pool")


class ParamStore:
    """Ordered named parameters with one gradient slot each.

    ``kind`` is ``"weight"`` for matrices that take L2 regularization and
    ``"projection"`` for hGAO projection vectors.  Frozen parameters always
    receive a zero gradient.
    """

    def __init__(self):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.kinds: dict[str, str] = {}
        self.frozen: set[str] = set()

    def add(self, name: str, value, kind: str = "weight") -> None:
        if name in self.values:
            raise ParameterError(f"duplicate parameter {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.values[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.kinds[name] = kind

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.values.items()}

    def weight_names(self) -> list[str]:
        return [k for k in self.values if self.kinds[k] == "weight"]

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def set_grad(self, name: str, grad) -> None:
        if grad.shape != self.values[name].shape:
            raise DimensionError(f"gradient for {name!r} has shape {grad.shape}, expected {self.values[name].shape}")
        if name in self.frozen:
            self.grads[name].fill(0.0)
        else:
            self.grads[name][...] = grad

    def freeze(self, names) -> None:
        self.frozen |= set(names)

    def copy(self) -> ParamStore:
        out = ParamStore()
        for k, v in self.values.items():
            out.add(k, v, self.kinds[k])
        out.frozen = set(self.frozen)
        return out


@dataclass
class GamConfig:
    """One attention operator followed by a GCN layer.

    For ``cgao`` the attention output width is set by a query-channel
    transform; ``k`` only matters for ``hgao``.
    """

    attention_kind: str
    attn_out_channels: int
    gcn_out_channels: int
    k: int = 8
    dropout_keep: float = 1.0

    def __post_init__(self):
        if self.attention_kind not in ATTENTION_KINDS:
            raise ParameterError(f"unknown attention kind {self.attention_kind!r}")
        if self.attn_out_channels < 1 or self.gcn_out_channels < 1:
            raise ParameterError("channel counts must be >= 1")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ParameterError("dropout_keep must be in (0, 1]")


@dataclass
class GanetConfig:
    in_channels: int
    embed_channels: int
    gam_configs: list[GamConfig]
    out_channels: int
    readout: str = "none"
    dropout_keep: float = 1.0  # embedding and output GCN inputs
    activation: str = "identity"

    def __post_init__(self):
        self.gam_configs = [c if isinstance(c, GamConfig) else GamConfig(**c) for c in self.gam_configs]
        if not self.gam_configs:
            raise ParameterError("GANet needs at least one GAM")
        if min(self.in_channels, self.embed_channels, self.out_channels) < 1:
            raise ParameterError("channel counts must be >= 1")
        if self.readout not in READOUTS:
            raise ParameterError(f"unknown readout {self.readout!r}")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ParameterError("dropout_keep must be in (0, 1]")

    def stack_width(self) -> int:
        """Channels leaving the last GAM."""
        return self.embed_channels + sum(c.gcn_out_channels for c in self.gam_configs)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> GanetConfig:
        return cls(**json.loads(text))


def uniform_config(in_channels, out_channels, attention_kind="hgao", gams=2, hidden=16, k=8,
                   dropout_keep=1.0) -> GanetConfig:
    """Config with every layer ``hidden`` wide, as used by the CLI."""
    gam = [GamConfig(attention_kind, hidden, hidden, k, dropout_keep) for _ in range(gams)]
    return GanetConfig(in_channels, hidden, gam, out_channels, dropout_keep=dropout_keep)


def init_params(cfg: GanetConfig, rng) -> ParamStore:
    from .train import glorot_init

    ps = ParamStore()
    ps.add("embed.w", glorot_init(rng, cfg.embed_channels, cfg.in_channels))
    width = cfg.embed_channels
    for i, gc in enumerate(cfg.gam_configs):
        pre = f"gam{i}"
        if gc.attention_kind == "cgao":
            ps.add(f"{pre}.attn.w_q", glorot_init(rng, gc.attn_out_channels, width))
            ps.add(f"{pre}.attn.w_v", glorot_init(rng, width, width))
        else:
            ps.add(f"{pre}.attn.w_k", glorot_init(rng, width, width))
            ps.add(f"{pre}.attn.w_v", glorot_init(rng, gc.attn_out_channels, width))
            if gc.attention_kind == "hgao":
                ps.add(f"{pre}.attn.p", glorot_init(rng, width, 1)[:, 0], kind="projection")
        ps.add(f"{pre}.gcn.w", glorot_init(rng, gc.gcn_out_channels, gc.attn_out_channels))
        width += gc.gcn_out_channels
    ps.add("out.w", glorot_init(rng, cfg.out_channels, width))
    return ps


def _transforms(params: ParamStore, pre: str) -> LinearWeights:
    return LinearWeights(*(params.values.get(f"{pre}.attn.{w}") for w in ("w_q", "w_k", "w_v")))


def _dropout(x, keep, mode, rng):
    if mode != "train" or keep >= 1.0:
        return x, None
    mask = (rng.random(x.shape) < keep) / keep
    return x * mask, mask


@dataclass
class GamCache:
    name: str
    kind: str
    in_channels: int
    attn_cache: object
    drop_mask: np.ndarray | None
    gcn_cache: object


def gam_forward(x, g: Graph, a_hat: NormalizedAdjacency, cfg: GamConfig, params: ParamStore,
                mode="eval", rng=None, *, name="gam0", activation="identity"):
    """``[x ; gcn(dropout(attention(x)))]``; the skip rows are ``x`` unchanged."""
    t = _transforms(params, name)
    if cfg.attention_kind == "gao":
        a, ac = gao_forward(x, g, t)
    elif cfg.attention_kind == "hgao":
        a, ac = hgao_forward(x, g, HgaoParams(params[f"{name}.attn.p"], cfg.k, t))
    else:
        a, ac = cgao_forward(x, t)
    if a.shape[0] != cfg.attn_out_channels:
        raise DimensionError(f"{name}: attention produced {a.shape[0]} channels, config says {cfg.attn_out_channels}")
    a_in, mask = _dropout(a, cfg.dropout_keep, mode, rng)
    h, gcache = gcn_forward(a_in, a_hat, GcnWeights(params[f"{name}.gcn.w"], activation))
    return concat_rows(x, h), GamCache(name, cfg.attention_kind, x.shape[0], ac, mask, gcache)


_ATTN_BACKWARD = {"gao": gao_backward, "hgao": hgao_backward, "cgao": cgao_backward}


def gam_backward(cache: GamCache, upstream, params: ParamStore) -> np.ndarray:
    """Write parameter gradients into ``params`` and return d(input)."""
    d_skip, d_h = upstream[:cache.in_channels], upstream[cache.in_channels:]
    gg = gcn_backward(cache.gcn_cache, d_h)
    params.set_grad(f"{cache.name}.gcn.w", gg["w"])
    d_a = gg["x"] if cache.drop_mask is None else gg["x"] * cache.drop_mask
    ag = _ATTN_BACKWARD[cache.kind](cache.attn_cache, d_a)
    for key, val in ag.items():
        if key != "x":
            params.set_grad(f"{cache.name}.attn.{key}", val)
    return d_skip + ag["x"]


@dataclass
class GanetCache:
    cfg: GanetConfig
    num_nodes: int
    embed_mask: np.ndarray | None
    embed_cache: object
    gam_caches: list[GamCache] = field(default_factory=list)
    out_mask: np.ndarray | None = None
    out_cache: object = None


def ganet_forward(g: Graph, cfg: GanetConfig, params: ParamStore, mode="eval", rng=None,
                  a_hat: NormalizedAdjacency | None = None):
    """Per-node logits (``out_channels x N``) or pooled logits (``out_channels x 1``).

    ``g`` must already carry self-loops.  ``a_hat`` defaults to the symmetric
    normalization of ``g``.
    """
    if mode not in ("train", "eval"):
        raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and rng is None:
        raise ParameterError("train mode needs an rng for dropout")
    if g.num_channels != cfg.in_channels:
        raise DimensionError(f"graph has {g.num_channels} feature channels, config expects {cfg.in_channels}")
    if not g.has_self_loops():
        raise ParameterError("ganet_forward expects a graph with self-loops")
    a_hat = a_hat if a_hat is not None else normalize_adjacency(g, "symmetric")

    x, m0 = _dropout(g.features, cfg.dropout_keep, mode, rng)
    h, c0 = gcn_forward(x, a_hat, GcnWeights(params["embed.w"], cfg.activation))
    cache = GanetCache(cfg, g.num_nodes, m0, c0)
    for i, gc in enumerate(cfg.gam_configs):
        h, gcache = gam_forward(h, g, a_hat, gc, params, mode, rng, name=f"gam{i}", activation=cfg.activation)
        cache.gam_caches.append(gcache)
    h, cache.out_mask = _dropout(h, cfg.dropout_keep, mode, rng)
    logits, cache.out_cache = gcn_forward(h, a_hat, GcnWeights(params["out.w"], cfg.activation))
    if cfg.readout == "mean_pool":
        logits = logits.mean(axis=1, keepdims=True)
    return logits, cache


def ganet_backward(cache: GanetCache, upstream, params: ParamStore) -> dict[str, np.ndarray]:
    """Fill ``params.grads`` by the chain rule and return it."""
    if not isinstance(cache, GanetCache):
        raise ParameterError("ganet_backward needs the cache returned by ganet_forward")
    expected = (cache.cfg.out_channels, 1 if cache.cfg.readout == "mean_pool" else cache.num_nodes)
    if upstream.shape != expected:
        raise DimensionError(f"upstream gradient {upstream.shape} does not match output {expected}")
    if cache.cfg.readout == "mean_pool":
        upstream = np.repeat(upstream / cache.num_nodes, cache.num_nodes, axis=1)
    og = gcn_backward(cache.out_cache, upstream)
    params.set_grad("out.w", og["w"])
    d = og["x"] if cache.out_mask is None else og["x"] * cache.out_mask
    for gcache in reversed(cache.gam_caches):
        d = gam_backward(gcache, d, params)
    eg = gcn_backward(cache.embed_cache, d)
    params.set_grad("embed.w", eg["w"])
    return params.grads
