"""Predictive-coding backend: layered value-node state, energy, inference
dynamics, and local weight updates.

Each layer k >= 1 holds value nodes h^(k), a prediction mu^(k) computed from
the layer below through the graph propagation operator, and an error
eps^(k) = h^(k) - mu^(k). The scalar energy is half the squared error sum;
inference moves unclamped value nodes down the energy gradient while weights
are fixed, and weight updates descend the same energy with values fixed.

Two modes are supported. "inter_layer" predicts across consecutive layers
only. "intra_layer" additionally gives the neighborhood-aggregation stage its
own value nodes h_agg^(k), predicted by the aggregation of the layer below,
extending the energy with the aggregation errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gpcn.graph import Graph, NormalizedAdjacency, normalize_adjacency, propagate
from gpcn.nn import (AdamState, ModelParams, adam_step, init_params, relu,
                     relu_prime, softmax_rows)
from gpcn.bp import TrainHistory, accuracy

INFERENCE_STEP_GRID = (12, 32, 50, 100)
VALUE_RATE_GRID = (0.05, 0.1, 0.5, 1.0)


@dataclass
class PCConfig:
    inference_steps: int = 12
    value_update_rate: float = 0.1
    weight_lr: float = 0.001
    weight_update_timing: str = "end_of_T"   # or "every_step"
    epochs: int = 300
    seed: int = 0
    hidden_dims: tuple[int, ...] = (16,)
    mode: str = "inter_layer"                # or "intra_layer"

    def __post_init__(self):
        if self.inference_steps < 1:
            raise ValueError("inference_steps must be >= 1")
        if self.value_update_rate <= 0:
            raise ValueError("value_update_rate must be positive")
        if self.weight_update_timing not in ("end_of_T", "every_step"):
            raise ValueError(f"bad timing {self.weight_update_timing!r}")
        if self.mode not in ("inter_layer", "intra_layer"):
            raise ValueError(f"bad mode {self.mode!r}")


@dataclass
class PCState:
    """Value nodes, predictions, and errors of a K-layer network.

    h[0] is the clamped input; h[1..K] are free unless clamped. When
    output_mask is set (training), output-layer errors count only on masked
    rows and those rows of h[K] are clamped to one-hot targets.
    """

    h: list[np.ndarray]                # layers 0..K
    mu: list[np.ndarray]               # layers 1..K
    eps: list[np.ndarray]              # layers 1..K
    mode: str = "inter_layer"
    output_mask: np.ndarray | None = None
    t: int = 0
    # intra_layer only: aggregated-state value nodes and their errors,
    # one per layer 1..K, shape (num_nodes, d_{k-1})
    h_agg: list[np.ndarray] = field(default_factory=list)
    mu_agg: list[np.ndarray] = field(default_factory=list)
    eps_agg: list[np.ndarray] = field(default_factory=list)

    @property
    def num_layers(self) -> int:
        return len(self.mu)


def _layer_input(state: PCState, k: int) -> np.ndarray:
    """Activation of layer k-1 as seen by layer k's prediction (raw input
    features at the first layer, ReLU above)."""
    below = state.h[k - 1]
    return below if k == 1 else relu(below)


def _masked_output_eps(state: PCState) -> np.ndarray:
    """Output-layer errors with unclamped rows zeroed during training."""
    eps_k = state.eps[-1]
    if state.output_mask is None:
        return eps_k
    out = np.zeros_like(eps_k)
    out[state.output_mask] = eps_k[state.output_mask]
    return out


def _effective_eps(state: PCState, k: int) -> np.ndarray:
    """eps of layer k as it appears in the energy (1-indexed layer)."""
    if k == state.num_layers:
        return _masked_output_eps(state)
    return state.eps[k - 1]


def pc_predictions(adj: NormalizedAdjacency, state: PCState,
                   params: ModelParams) -> None:
    """Recompute all predictions and errors in place from current values."""
    K = params.num_layers
    if state.mode == "intra_layer":
        for k in range(1, K + 1):
            state.mu_agg[k - 1] = propagate(adj, _layer_input(state, k))
            state.eps_agg[k - 1] = state.h_agg[k - 1] - state.mu_agg[k - 1]
            state.mu[k - 1] = state.h_agg[k - 1] @ params.weights[k - 1]
            state.eps[k - 1] = state.h[k] - state.mu[k - 1]
    else:
        for k in range(1, K + 1):
            state.mu[k - 1] = (propagate(adj, _layer_input(state, k))
                               @ params.weights[k - 1])
            state.eps[k - 1] = state.h[k] - state.mu[k - 1]


def pc_init_feedforward(adj: NormalizedAdjacency, x: np.ndarray,
                        params: ModelParams,
                        mode: str = "inter_layer") -> PCState:
    """Fresh state with every value node set to its prediction (zero energy)."""
    state = PCState(h=[np.asarray(x, dtype=np.float64)], mu=[], eps=[],
                    mode=mode)
    K = params.num_layers
    for k in range(1, K + 1):
        agg = propagate(adj, _layer_input(state, k))
        mu = agg @ params.weights[k - 1]
        if mode == "intra_layer":
            state.h_agg.append(agg.copy())
            state.mu_agg.append(agg)
            state.eps_agg.append(np.zeros_like(agg))
        state.h.append(mu.copy())
        state.mu.append(mu)
        state.eps.append(np.zeros_like(mu))
    return state


def clamp_targets(state: PCState, labels: np.ndarray,
                  train_mask: np.ndarray) -> PCState:
    """Fix train-mask output rows to one-hot targets; other output rows stay
    free and are excluded from the energy."""
    train_mask = np.asarray(train_mask, dtype=bool)
    num_classes = state.h[-1].shape[1]
    onehot = np.zeros((train_mask.sum(), num_classes))
    onehot[np.arange(onehot.shape[0]), labels[train_mask]] = 1.0
    state.h[-1][train_mask] = onehot
    state.output_mask = train_mask
    state.eps[-1] = state.h[-1] - state.mu[-1]
    return state


def compute_energy(state: PCState) -> float:
    """F = half the squared error sum, output layer masked during training."""
    total = 0.0
    for k in range(1, state.num_layers + 1):
        e = _effective_eps(state, k)
        total += float(np.sum(e * e))
    for e in state.eps_agg:
        total += float(np.sum(e * e))
    return 0.5 * total


def inference_step(adj: NormalizedAdjacency, state: PCState,
                   params: ModelParams, gamma: float) -> PCState:
    """One gradient-descent step on the energy over unclamped value nodes
    (inter-layer mode); predictions and errors are recomputed afterwards."""
    K = params.num_layers
    deltas = []
    for k in range(1, K + 1):
        d = -_effective_eps(state, k)
        if k < K:
            back = propagate(adj, _effective_eps(state, k + 1)
                             @ params.weights[k].T)
            d = d + relu_prime(state.h[k]) * back
        deltas.append(gamma * d)
    for k in range(1, K + 1):
        d = deltas[k - 1]
        if k == K and state.output_mask is not None:
            d = d.copy()
            d[state.output_mask] = 0.0     # clamped targets never move
        state.h[k] = state.h[k] + d
    pc_predictions(adj, state, params)
    state.t += 1
    return state


def intra_layer_step(adj: NormalizedAdjacency, state: PCState,
                     params: ModelParams, gamma: float) -> PCState:
    """One descent step on the extended energy, updating both the layer value
    nodes and the aggregated-state value nodes (intra-layer mode)."""
    if state.mode != "intra_layer":
        raise ValueError("state is not in intra_layer mode")
    K = params.num_layers
    h_deltas, agg_deltas = [], []
    for k in range(1, K + 1):
        eps_k = _effective_eps(state, k)
        agg_deltas.append(gamma * (-state.eps_agg[k - 1]
                                   + eps_k @ params.weights[k - 1].T))
        d = -eps_k
        if k < K:
            d = d + relu_prime(state.h[k]) * propagate(adj, state.eps_agg[k])
        h_deltas.append(gamma * d)
    for k in range(1, K + 1):
        state.h_agg[k - 1] = state.h_agg[k - 1] + agg_deltas[k - 1]
        d = h_deltas[k - 1]
        if k == K and state.output_mask is not None:
            d = d.copy()
            d[state.output_mask] = 0.0
        state.h[k] = state.h[k] + d
    pc_predictions(adj, state, params)
    state.t += 1
    return state


def pc_weight_gradients(adj: NormalizedAdjacency, state: PCState,
                        params: ModelParams):
    """Energy gradients w.r.t. weights with values fixed (loss-style, so a
    descent step on them reduces the energy)."""
    grads = []
    for k in range(1, state.num_layers + 1):
        eps_k = _effective_eps(state, k)
        if state.mode == "intra_layer":
            pre = state.h_agg[k - 1]
        else:
            pre = propagate(adj, _layer_input(state, k))
        grads.append(-pre.T @ eps_k)
    return grads


def _step_fn(mode: str):
    return intra_layer_step if mode == "intra_layer" else inference_step


def train_pc(graph: Graph, config: PCConfig):
    """Inference/weight-update training loop.

    Each epoch: feedforward init, clamp targets, T inference steps, weight
    update(s) through Adam. Snapshot selection is best validation accuracy,
    ties broken by lowest training energy, then earliest epoch.
    """
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
    step = _step_fn(config.mode)

    history = TrainHistory()
    best_key = None
    best_params = None
    for epoch in range(config.epochs):
        state = pc_init_feedforward(adj, graph.features, params, config.mode)
        clamp_targets(state, graph.labels, train_mask)
        for _ in range(config.inference_steps):
            step(adj, state, params, config.value_update_rate)
            if config.weight_update_timing == "every_step":
                adam_step(params, pc_weight_gradients(adj, state, params), opt)
                pc_predictions(adj, state, params)
        if config.weight_update_timing == "end_of_T":
            adam_step(params, pc_weight_gradients(adj, state, params), opt)
            pc_predictions(adj, state, params)
        energy = compute_energy(state)
        if not np.isfinite(energy):
            raise FloatingPointError(f"non-finite energy at epoch {epoch}")

        logits = pc_init_feedforward(adj, graph.features, params,
                                     config.mode).h[-1]
        history.train_loss.append(energy)
        history.energy.append(energy)
        history.train_acc.append(accuracy(logits, graph.labels, train_mask))
        val = accuracy(logits, graph.labels, val_mask)
        history.val_acc.append(val)
        history.test_acc.append(accuracy(logits, graph.labels, test_mask))
        # maximize val accuracy, then minimize energy, then earliest epoch
        key = (val, -energy)
        if best_key is None or key > best_key:
            best_key = key
            best_params = params.copy()
            history.selected_epoch = epoch
    return best_params, history


def pc_predict(adj: NormalizedAdjacency, x: np.ndarray, params: ModelParams,
               mode: str = "inter_layer") -> np.ndarray:
    """Feedforward probabilities: softmax of the output-layer values."""
    state = pc_init_feedforward(adj, x, params, mode)
    return softmax_rows(state.h[-1])
