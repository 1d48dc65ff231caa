"""Backpropagation baseline: K-layer GCN with a manual reverse pass and a
full-batch Adam training loop with validation-based model selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gpcn.graph import Graph, NormalizedAdjacency, normalize_adjacency, propagate
from gpcn.nn import (AdamState, ModelParams, adam_step, cross_entropy_masked,
                     init_params, relu, relu_prime, softmax_rows)


@dataclass
class ForwardCache:
    """Pre-activations Z^(k) and activations H^(k); H^(0) is the input."""

    pre: list[np.ndarray]          # Z^(1) .. Z^(K)
    act: list[np.ndarray]          # H^(0) .. H^(K); H^(K) = Z^(K) (linear out)

    @property
    def logits(self) -> np.ndarray:
        return self.act[-1]


@dataclass
class TrainConfig:
    epochs: int = 300
    weight_lr: float = 0.001
    seed: int = 0
    hidden_dims: tuple[int, ...] = (16,)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if any(d < 1 for d in self.hidden_dims):
            raise ValueError("hidden dims must be positive")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)  # PC backend only
    selected_epoch: int = 0


def gcn_forward(adj: NormalizedAdjacency, x: np.ndarray,
                params: ModelParams) -> ForwardCache:
    """Hidden layers ReLU(A_hat H W); output layer linear (logits)."""
    pre, act = [], [np.asarray(x, dtype=np.float64)]
    h = act[0]
    K = params.num_layers
    for k, w in enumerate(params.weights, start=1):
        z = propagate(adj, h) @ w
        pre.append(z)
        h = z if k == K else relu(z)
        act.append(h)
    return ForwardCache(pre=pre, act=act)


def gcn_backward(adj: NormalizedAdjacency, cache: ForwardCache,
                 grad_logits: np.ndarray, params: ModelParams):
    """Reverse pass; returns per-layer weight gradients.

    A_hat is symmetric, so propagate serves as its own transpose.
    """
    K = params.num_layers
    grads = [None] * K
    g = grad_logits
    for k in range(K, 0, -1):
        grads[k - 1] = propagate(adj, cache.act[k - 1]).T @ g
        if k > 1:
            g = propagate(adj, g @ params.weights[k - 1].T)
            g = g * relu_prime(cache.pre[k - 2])
    return grads


def accuracy(probs_or_logits, labels, mask) -> float:
    sel = np.flatnonzero(mask)
    if sel.size == 0:
        return float("nan")
    pred = np.argmax(probs_or_logits[sel], axis=1)
    return float(np.mean(pred == labels[sel]))


def train_bp(graph: Graph, config: TrainConfig):
    """Full-batch Adam training; returns the snapshot with best val accuracy
    (ties broken by earliest epoch) together with the epoch history."""
    train_mask = graph.mask("train")
    val_mask = graph.mask("val")
    if not train_mask.any() or not val_mask.any():
        raise ValueError("graph needs nonempty train and val splits")
    test_mask = graph.mask("test")

    adj = normalize_adjacency(graph)
    rng = np.random.default_rng(config.seed)
    dims = [graph.num_features, *config.hidden_dims, graph.num_classes]
    params = init_params(dims, rng)
    opt = AdamState.for_params(params, config.weight_lr)

    history = TrainHistory()
    best = (-1.0, None)
    for epoch in range(config.epochs):
        cache = gcn_forward(adj, graph.features, params)
        loss, grad = cross_entropy_masked(cache.logits, graph.labels,
                                          train_mask)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        grads = gcn_backward(adj, cache, grad, params)
        adam_step(params, grads, opt)

        eval_cache = gcn_forward(adj, graph.features, params)
        history.train_loss.append(loss)
        history.train_acc.append(accuracy(eval_cache.logits, graph.labels,
                                          train_mask))
        val = accuracy(eval_cache.logits, graph.labels, val_mask)
        history.val_acc.append(val)
        history.test_acc.append(accuracy(eval_cache.logits, graph.labels,
                                         test_mask))
        if val > best[0]:
            best = (val, params.copy())
            history.selected_epoch = epoch
    return best[1], history


def predict(adj: NormalizedAdjacency, x: np.ndarray,
            params: ModelParams) -> np.ndarray:
    """Class probabilities: softmax of the forward-pass logits."""
    return softmax_rows(gcn_forward(adj, x, params).logits)
