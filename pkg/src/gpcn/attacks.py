"""Adversarial perturbation generation and robustness evaluation.

Covers random global edge insertion, greedy gradient-based targeted attacks
on structure and/or binary features (direct and indirect), evasion and
poisoning protocols, victim selection, and the per-budget robustness summary
with its holistic metric sum(q * p_q).

Both backends share the same feedforward composition, so attack gradients are
computed once against the plain forward pass. The gradient through the
normalized adjacency is linearized: normalization coefficients are frozen at
the current degrees while scoring moves, and the adjacency is fully
re-normalized after every applied edit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gpcn.graph import (EdgeEdit, Graph, apply_edits, make_graph,
                        normalize_adjacency, propagate)
from gpcn.nn import ModelParams, relu, relu_prime, softmax_rows
from gpcn.bp import gcn_forward
from gpcn.calibration import classification_margins

ATTACK_KINDS = ("random_global", "fga_structure", "fga_feature", "fga_both",
                "fga_indirect")


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    mode: str = "evasion"              # or "poisoning"
    budget: int | None = None          # edit count for targeted attacks
    ptb_rate: float | None = None      # edge fraction for random_global
    influencer_count: int = 5          # indirect attacks only
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.mode not in ("evasion", "poisoning"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.ptb_rate is not None and not 0.0 <= self.ptb_rate:
            raise ValueError("ptb_rate must be nonnegative")
        if self.influencer_count < 1:
            raise ValueError("influencer_count must be >= 1")


@dataclass
class VictimSet:
    nodes: np.ndarray                  # unique node ids
    provenance: np.ndarray             # per-node tag

    def __len__(self):
        return self.nodes.shape[0]


@dataclass
class RobustnessReport:
    budgets: list
    accuracy: dict                     # budget -> accuracy over victims
    holistic: float | None
    margins_before: list               # MarginRecord per victim
    margins_after: dict                # budget -> list of MarginRecord


def holistic_metric(accuracy: dict) -> float | None:
    """sum(q * p_q) over integer budgets; None when budgets are rates."""
    if not all(isinstance(q, (int, np.integer)) for q in accuracy):
        return None
    return float(sum(q * p for q, p in accuracy.items()))


def select_victims(graph: Graph, probs: np.ndarray, strategy: str,
                   seed: int) -> VictimSet:
    """Pick victim nodes from the evaluation splits.

    "nettack_style": 10 highest-margin plus 10 lowest-margin correctly
    classified test nodes plus 20 random test nodes. "random_1000": up to
    1000 nodes uniform without replacement from val and test.
    """
    rng = np.random.default_rng(seed)
    if strategy == "random_1000":
        pool = np.flatnonzero(graph.mask("val") | graph.mask("test"))
        if pool.size == 0:
            raise ValueError("empty candidate pool")
        take = min(1000, pool.size)
        nodes = np.sort(rng.choice(pool, size=take, replace=False))
        return VictimSet(nodes=nodes,
                         provenance=np.full(take, "random_valtest"))
    if strategy != "nettack_style":
        raise ValueError(f"unknown strategy {strategy!r}")

    test_mask = graph.mask("test")
    if not test_mask.any():
        raise ValueError("empty candidate pool")
    records = classification_margins(probs, graph.labels, test_mask)
    by_margin = sorted(records, key=lambda r: -r.margin)
    chosen: list[int] = []
    tags: list[str] = []
    for r in by_margin[:10]:
        chosen.append(r.node)
        tags.append("high_margin")
    correct_asc = [r for r in sorted(records, key=lambda r: r.margin)
                   if r.correct and r.node not in chosen]
    for r in correct_asc[:10]:
        chosen.append(r.node)
        tags.append("low_margin")
    remaining = np.array([r.node for r in records if r.node not in chosen])
    take = min(20, remaining.size)
    if take:
        for node in rng.choice(remaining, size=take, replace=False):
            chosen.append(int(node))
            tags.append("random")
    return VictimSet(nodes=np.array(chosen), provenance=np.array(tags))


def random_global_poison(graph: Graph, ptb_rate: float, seed: int) -> Graph:
    """Insert floor(ptb_rate * |E|) uniformly random absent edges."""
    if ptb_rate < 0:
        raise ValueError("ptb_rate must be nonnegative")
    k = int(ptb_rate * graph.num_edges)
    if k == 0:
        return graph
    n = graph.num_nodes
    total_pairs = n * (n - 1) // 2
    if total_pairs - graph.num_edges < k:
        raise ValueError("not enough absent node pairs")
    rng = np.random.default_rng(seed)
    present = {(int(u), int(v)) for u, v in graph.edges}
    new_edges: list[tuple[int, int]] = []
    while len(new_edges) < k:
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        pair = (min(int(u), int(v)), max(int(u), int(v)))
        if pair in present:
            continue
        present.add(pair)
        new_edges.append(pair)
    return apply_edits(graph, [EdgeEdit("add", u, v) for u, v in new_edges])


def loss_gradient_wrt_inputs(params: ModelParams, graph: Graph,
                             target_node: int):
    """Gradient of the target node's cross-entropy w.r.t. the dense adjacency
    and the feature matrix, with normalization coefficients frozen at the
    current degrees. Symmetric adjacency pairs share one gradient value.
    """
    adj = normalize_adjacency(graph)
    cache = gcn_forward(adj, graph.features, params)
    K = params.num_layers
    probs = softmax_rows(cache.logits[target_node:target_node + 1])
    g = np.zeros_like(cache.logits)
    g[target_node] = probs[0]
    g[target_node, graph.labels[target_node]] -= 1.0

    n = graph.num_nodes
    grad_norm_adj = np.zeros((n, n))
    for k in range(K, 0, -1):
        downstream = cache.act[k - 1] @ params.weights[k - 1]
        grad_norm_adj += g @ downstream.T
        if k > 1:
            g = propagate(adj, g @ params.weights[k - 1].T)
            g = g * relu_prime(cache.pre[k - 2])
    grad_features = propagate(adj, g @ params.weights[0].T)

    # chain through the frozen normalization: d(norm_adj)_uv/dA_uv =
    # 1/sqrt(deg_u * deg_v) with self-loop degrees at current structure
    deg = np.asarray(graph.csr.sum(axis=1)).ravel() + 1.0
    coeff = 1.0 / np.sqrt(np.outer(deg, deg))
    grad_adj = (grad_norm_adj + grad_norm_adj.T) * coeff
    np.fill_diagonal(grad_adj, 0.0)
    return grad_adj, grad_features


def _structure_candidates(graph: Graph, grad_adj: np.ndarray, victim: int,
                          allowed_nodes: np.ndarray | None):
    """Score every legal edge toggle; returns (score, EdgeEdit) generator data."""
    n = graph.num_nodes
    dense = graph.csr.toarray()
    # toggling from a to 1-a changes loss by roughly grad * (1 - 2a)
    scores = grad_adj * (1.0 - 2.0 * dense)
    iu, iv = np.triu_indices(n, k=1)
    sc = scores[iu, iv]
    if allowed_nodes is not None:
        allow = np.zeros(n, dtype=bool)
        allow[allowed_nodes] = True
        legal = ((allow[iu] | allow[iv]) & (iu != victim) & (iv != victim))
        sc = np.where(legal, sc, -np.inf)
    return iu, iv, sc, dense


def fga_attack(params: ModelParams, graph: Graph, victim: int,
               spec: AttackSpec) -> list[EdgeEdit]:
    """Greedy gradient attack: per iteration, recompute gradients and apply
    the legal edge toggle / feature flip with the largest loss-increasing
    score. Indirect attacks only touch edges that avoid the victim and have
    an endpoint among the top-gradient influencer neighbors."""
    if spec.budget is None:
        raise ValueError("targeted attack needs a budget")
    use_structure = spec.kind in ("fga_structure", "fga_both", "fga_indirect")
    use_features = spec.kind in ("fga_feature", "fga_both")
    if not (use_structure or use_features):
        raise ValueError(f"{spec.kind!r} is not a targeted attack kind")

    current = graph
    edits: list[EdgeEdit] = []
    for _ in range(spec.budget):
        grad_adj, grad_x = loss_gradient_wrt_inputs(params, current, victim)
        best_score = 0.0
        best_edit = None
        if use_structure:
            allowed = None
            if spec.kind == "fga_indirect":
                neigh = current.neighbors(victim)
                if neigh.size == 0:
                    break
                strength = np.abs(grad_adj[neigh]).sum(axis=1)
                order = np.argsort(-strength, kind="stable")
                allowed = neigh[order[:spec.influencer_count]]
            iu, iv, sc, dense = _structure_candidates(current, grad_adj,
                                                      victim, allowed)
            i = int(np.argmax(sc))
            if sc[i] > best_score:
                u, v = int(iu[i]), int(iv[i])
                kind = "remove" if dense[u, v] else "add"
                best_score = float(sc[i])
                best_edit = EdgeEdit(kind, u, v)
        if use_features:
            x = current.features
            if not np.isin(x, (0.0, 1.0)).all():
                raise ValueError("feature attacks require binary features")
            fsc = grad_x * (1.0 - 2.0 * x)
            node, fidx = np.unravel_index(np.argmax(fsc), fsc.shape)
            if fsc[node, fidx] > best_score:
                best_score = float(fsc[node, fidx])
                best_edit = EdgeEdit("feature_flip", int(node), int(fidx))
        if best_edit is None:
            break           # no loss-increasing legal move remains
        edits.append(best_edit)
        current = apply_edits(current, [best_edit])
    return edits


def evaluate_attack(trainer, graph: Graph, victims: VictimSet,
                    spec: AttackSpec, budgets) -> RobustnessReport:
    """Run the evasion or poisoning protocol over a budget sweep.

    ``trainer`` must expose train(graph) -> params and
    predict(graph, params) -> probabilities. Evasion trains once on the clean
    graph and re-predicts on perturbed copies; poisoning retrains from
    scratch on each perturbed graph.
    """
    budgets = list(budgets)
    if not budgets:
        raise ValueError("budget sweep is empty")
    clean_params = trainer.train(graph)
    clean_probs = trainer.predict(graph, clean_params)
    vmask = np.zeros(graph.num_nodes, dtype=bool)
    vmask[victims.nodes] = True
    margins_before = classification_margins(clean_probs, graph.labels, vmask)

    accuracy: dict = {}
    margins_after: dict = {}
    if spec.kind == "random_global":
        for rate in budgets:
            poisoned = random_global_poison(graph, rate, spec.seed)
            if spec.mode == "poisoning":
                p = trainer.train(poisoned)
            else:
                p = clean_params
            probs = trainer.predict(poisoned, p)
            recs = classification_margins(probs, graph.labels, vmask)
            accuracy[rate] = float(np.mean([r.correct for r in recs]))
            margins_after[rate] = recs
    else:
        max_budget = max(budgets)
        per_victim_edits = {}
        for victim in victims.nodes:
            vspec = AttackSpec(kind=spec.kind, mode=spec.mode,
                               budget=max_budget,
                               influencer_count=spec.influencer_count,
                               seed=spec.seed)
            per_victim_edits[int(victim)] = fga_attack(
                clean_params, graph, int(victim), vspec)
        for q in budgets:
            correct = []
            recs = []
            for victim in victims.nodes:
                victim = int(victim)
                edits = per_victim_edits[victim][:q]
                perturbed = apply_edits(graph, edits)
                if spec.mode == "poisoning":
                    p = trainer.train(perturbed)
                else:
                    p = clean_params
                probs = trainer.predict(perturbed, p)
                one = np.zeros(graph.num_nodes, dtype=bool)
                one[victim] = True
                rec = classification_margins(probs, graph.labels, one)[0]
                recs.append(rec)
                correct.append(rec.correct)
            accuracy[q] = float(np.mean(correct))
            margins_after[q] = recs

    return RobustnessReport(budgets=budgets, accuracy=accuracy,
                            holistic=holistic_metric(accuracy),
                            margins_before=margins_before,
                            margins_after=margins_after)


def margin_shift_export(before, after, condition: dict) -> list[dict]:
    """Flatten matched before/after margin records into CSV-ready rows."""
    if len(before) != len(after):
        raise ValueError("victim sets do not match")
    rows = []
    for b, a in zip(before, after):
        if b.node != a.node:
            raise ValueError("victim sets do not match")
        rows.append({"node": b.node, "margin_before": b.margin,
                     "margin_after": a.margin, **condition})
    return rows
