"""Initialization, loss, Adam and the full-batch node-classification loop."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError
from .graph import Graph, add_self_loops, normalize_adjacency
from .net import GanetConfig, ParamStore, ganet_backward, ganet_forward, init_params
from .tensor import make_rng


def glorot_init(rng, rows: int, cols: int) -> np.ndarray:
    """Uniform on ``[-a, a]`` with ``a = sqrt(6 / (rows + cols))``."""
    if rows < 1 or cols < 1:
        raise ParameterError(f"glorot_init needs positive dims, got {rows}x{cols}")
    a = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-a, a, size=(rows, cols))


def softmax_cross_entropy(logits: np.ndarray, labels, mask):
    """Mean negative log-likelihood over the masked nodes (columns).

    Returns ``(loss, grad)`` with ``grad`` zero outside the mask.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ParameterError("cross-entropy over an empty mask")
    labels = np.asarray(labels, dtype=np.int64)
    z = logits[:, mask]
    z = z - z.max(axis=0, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=0, keepdims=True))
    y = labels[mask]
    loss = -float(np.mean(log_p[y, np.arange(mask.size)]))
    probs = np.exp(log_p)
    probs[y, np.arange(mask.size)] -= 1.0
    grad = np.zeros_like(logits)
    grad[:, mask] = probs / mask.size
    return loss, grad


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient for {name!r} has shape {g.shape}, parameter {params[name].shape}")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    l2_lambda: float = 1e-4
    epochs: int = 200
    dropout_keep: float | None = None  # overrides every layer of the model config when set
    seed: int = 0
    early_stop_patience: int | None = 50

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be nonnegative")
        if self.l2_lambda < 0:
            raise ParameterError("l2_lambda must be nonnegative")
        if self.epochs < 0:
            raise ParameterError("epochs must be nonnegative")
        if self.dropout_keep is not None and not 0.0 < self.dropout_keep <= 1.0:
            raise ParameterError("dropout_keep must be in (0, 1]")


@dataclass
class TrainResult:
    history: list[dict]
    params: ParamStore
    best_epoch: int
    best_val_acc: float
    test_acc: float


def l2_penalty(params: ParamStore, lam: float) -> float:
    return lam * float(sum(np.sum(params[k] ** 2) for k in params.weight_names()))


def accuracy(logits, labels, mask) -> float:
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        return 0.0
    return float(np.mean(np.argmax(logits[:, mask], axis=0) == np.asarray(labels)[mask]))


def with_dropout(cfg: GanetConfig, keep: float) -> GanetConfig:
    gams = [dataclasses.replace(c, dropout_keep=keep) for c in cfg.gam_configs]
    return dataclasses.replace(cfg, gam_configs=gams, dropout_keep=keep)


def train_node_classifier(g: Graph, model_cfg: GanetConfig, cfg: TrainConfig, params: ParamStore | None = None,
                          on_epoch=None) -> TrainResult:
    """Full-batch training with Adam, L2 on weight matrices and best-validation retention.

    ``history[e]["loss"]`` is the training objective (cross-entropy plus L2)
    evaluated before the update of epoch ``e``; accuracies are measured in
    eval mode after it.  The returned parameters are those of the last epoch
    that reached the best validation accuracy.
    """
    if g.labels is None or g.masks is None:
        raise ParameterError("training needs a graph with labels and train/val/test masks")
    if g.masks["train"].size == 0:
        raise ParameterError("training mask is empty")
    if model_cfg.readout != "none":
        raise ParameterError("node classification needs readout='none'")
    if cfg.dropout_keep is not None:
        model_cfg = with_dropout(model_cfg, cfg.dropout_keep)
    if not g.has_self_loops():
        g = add_self_loops(g)
    a_hat = normalize_adjacency(g, "symmetric")
    rng = make_rng(cfg.seed)
    params = params.copy() if params is not None else init_params(model_cfg, rng)
    state = AdamState()
    weights = set(params.weight_names()) - params.frozen

    def evaluate(ps):
        logits, _ = ganet_forward(g, model_cfg, ps, "eval", a_hat=a_hat)
        return accuracy(logits, g.labels, g.masks["val"]), accuracy(logits, g.labels, g.masks["test"])

    best_val, best_epoch = -1.0, -1
    best_params = params.copy()
    history: list[dict] = []
    since_best = 0
    for epoch in range(cfg.epochs):
        logits, cache = ganet_forward(g, model_cfg, params, "train", rng, a_hat=a_hat)
        loss, d_logits = softmax_cross_entropy(logits, g.labels, g.masks["train"])
        loss += l2_penalty(params, cfg.l2_lambda)
        grads = ganet_backward(cache, d_logits, params)
        for name in weights:
            grads[name] += 2.0 * cfg.l2_lambda * params[name]
        adam_step(params.values, grads, state, cfg.learning_rate)

        val_acc, test_acc = evaluate(params)
        row = {"epoch": epoch, "loss": loss, "val_acc": val_acc, "test_acc": test_acc}
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        # ties keep the later parameters but do not reset patience
        since_best = 0 if val_acc > best_val else since_best + 1
        if val_acc >= best_val:
            best_val, best_epoch = val_acc, epoch
            best_params = params.copy()
        if cfg.early_stop_patience is not None and since_best >= cfg.early_stop_patience:
            break

    test_acc = evaluate(best_params)[1]
    return TrainResult(history, best_params, best_epoch, best_val, test_acc)


def history_to_jsonl(history) -> str:
    return "".join(json.dumps(row) + "\n" for row in history)
