"""Central finite-difference checks for every operator and for the whole network."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NondifferentiablePointWarning, UnknownOperatorError
from .graph import Graph, add_self_loops, normalize_adjacency, random_graph
from .net import GamConfig, GanetConfig, ganet_backward, ganet_forward, init_params
from .ops import (
    GcnWeights,
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
    projection_scores,
)
from .tensor import make_rng

CHECKABLE = ("attn", "gao", "hgao", "cgao", "gcn", "ganet")
FD_STEP = 1e-6


def numeric_gradient(f, x: np.ndarray, eps: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. every entry of ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        orig = x[i]
        x[i] = orig + eps
        hi = f()
        x[i] = orig - eps
        lo = f()
        x[i] = orig
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad


def relative_error(analytic, numeric) -> float:
    """``max|a - n| / max(max|a|, max|n|)``, scale-relative so near-zero entries don't dominate."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0))
    err = np.abs(a - n).max(initial=0.0)
    return 0.0 if scale == 0.0 else float(err / scale)


@dataclass
class CheckResult:
    op: str
    errors: dict[str, float] = field(default_factory=dict)
    skipped: str | None = None

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def passed(self, tol: float) -> bool:
        return self.skipped is None and self.max_error < tol


def _check(op, inputs: dict[str, np.ndarray], forward, backward, upstream_shape, rng) -> CheckResult:
    """``forward()`` reads the arrays in ``inputs``; ``backward(cache, up)`` returns a grad dict."""
    out, cache = forward()
    up = rng.standard_normal(out.shape if upstream_shape is None else upstream_shape)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NondifferentiablePointWarning)
        try:
            grads = backward(cache, up)
        except NondifferentiablePointWarning as w:
            return CheckResult(op, skipped=str(w))
    res = CheckResult(op)
    for name, arr in inputs.items():
        num = numeric_gradient(lambda: float(np.sum(forward()[0] * up)), arr)
        res.errors[name] = relative_error(grads[name], num)
    return res


def well_separated_projection(x: np.ndarray, rng, min_gap: float = 1e-4, tries: int = 200) -> np.ndarray:
    """A projection vector whose scores are pairwise separated and away from the |.| kink."""
    for _ in range(tries):
        p = rng.standard_normal(x.shape[0])
        _, y, _ = projection_scores(x, p)
        ys = np.sort(y)
        if ys[0] > min_gap and (ys.size < 2 or np.diff(ys).min() > min_gap):
            return p
    raise RuntimeError("could not draw a well-separated projection vector")


def small_graph(rng, n: int, d: int, avg_degree: float = 2.5) -> Graph:
    return add_self_loops(random_graph(rng, n, avg_degree, channels=d))


def check_op(op: str, seed: int = 0, n: int = 6, d: int = 4, k: int = 2, tied: bool = False) -> CheckResult:
    """Gradient check of one operator on a random instance.

    ``tied=True`` duplicates a node's features so hGAO's selection has a tie.
    """
    if op not in CHECKABLE:
        raise UnknownOperatorError(f"unknown operator {op!r}; expected one of {CHECKABLE}")
    rng = make_rng(seed)
    if op == "ganet":
        return _check_ganet(rng, n, d, k)
    g = small_graph(rng, n, d)
    x = g.features.copy()
    dv = max(1, d - 1)
    if op == "attn":
        m = max(1, n - 2)
        ins = {"q": rng.standard_normal((d, m)), "k": rng.standard_normal((d, n)), "v": rng.standard_normal((d, n)),
               "w_q": rng.standard_normal((d, d)), "w_k": rng.standard_normal((d, d)),
               "w_v": rng.standard_normal((dv, d))}
        fwd = lambda: attn(ins["q"], ins["k"], ins["v"], LinearWeights(ins["w_q"], ins["w_k"], ins["w_v"]))
        return _check(op, ins, fwd, attn_backward, None, rng)
    if op == "gao":
        ins = {"x": x, "w_k": rng.standard_normal((d, d)) * 0.5, "w_v": rng.standard_normal((dv, d))}
        fwd = lambda: gao_forward(ins["x"], g, LinearWeights(None, ins["w_k"], ins["w_v"]))
        return _check(op, ins, fwd, gao_backward, None, rng)
    if op == "hgao":
        if tied:
            # two identical, dominant nodes in a complete graph: ranks 1 and 2 tie at k=1
            x[:, 0] *= 10.0
            x[:, 1] = x[:, 0]
            g = Graph.from_edges(n, np.argwhere(np.ones((n, n), dtype=bool)), x)
            k = 1
            p = x[:, 0].copy()
        else:
            p = well_separated_projection(x, rng)
        ins = {"x": x, "p": p, "w_k": rng.standard_normal((d, d)) * 0.5, "w_v": rng.standard_normal((dv, d))}
        fwd = lambda: hgao_forward(ins["x"], g, HgaoParams(ins["p"], k, LinearWeights(None, ins["w_k"], ins["w_v"])))
        return _check(op, ins, fwd, hgao_backward, None, rng)
    if op == "cgao":
        ins = {"x": x, "w_q": rng.standard_normal((d, d)) * 0.5, "w_k": rng.standard_normal((d, d)) * 0.5,
               "w_v": rng.standard_normal((d, d))}
        fwd = lambda: cgao_forward(ins["x"], LinearWeights(ins["w_q"], ins["w_k"], ins["w_v"]))
        return _check(op, ins, fwd, cgao_backward, None, rng)
    a_hat = normalize_adjacency(g, "symmetric")
    ins = {"x": x, "w": rng.standard_normal((dv, d))}
    fwd = lambda: gcn_forward(ins["x"], a_hat, GcnWeights(ins["w"], "relu"))
    return _check(op, ins, fwd, gcn_backward, None, rng)


def _check_ganet(rng, n, d, k) -> CheckResult:
    gams = [GamConfig("hgao", 3, 2, k), GamConfig("cgao", 3, 2), GamConfig("gao", 2, 2)]
    cfg = GanetConfig(d, 3, gams, 2)
    for _ in range(50):
        # redraw until the hGAO scores can be made tie-free (twin nodes embed identically)
        g = small_graph(rng, n, d)
        params = init_params(cfg, rng)
        h = (normalize_adjacency(g).to_dense() @ (params["embed.w"] @ g.features).T).T
        try:
            params.values["gam0.attn.p"][...] = well_separated_projection(h, rng)
        except RuntimeError:
            continue
        break
    else:
        raise RuntimeError("could not draw a tie-free network instance")
    up = rng.standard_normal((cfg.out_channels, n))
    logits, cache = ganet_forward(g, cfg, params, "eval")
    grads = ganet_backward(cache, up, params)
    res = CheckResult("ganet")
    for name in params:
        num = numeric_gradient(lambda: float(np.sum(ganet_forward(g, cfg, params, "eval")[0] * up)),
                               params.values[name])
        res.errors[name] = relative_error(grads[name], num)
    return res
