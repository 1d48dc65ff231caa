"""Experiment orchestration: multi-seed sweeps, calibration and energy
studies, attack protocols, checkpoints, and CSV/JSON report emission.

Every number in every emitted file is a pure function of the experiment
config and seeds; timing is kept in memory only so repeated invocations are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gpcn.graph import (Graph, SyntheticSpec, generate_synthetic,
                        largest_connected_component, load_dataset,
                        normalize_adjacency, save_dataset)
from gpcn.nn import ModelParams
from gpcn.bp import TrainConfig, predict, train_bp
from gpcn.pc import PCConfig, pc_predict, train_pc
from gpcn.calibration import (classification_margins, confidence_histogram,
                              expected_calibration_error)
from gpcn.attacks import AttackSpec, evaluate_attack, select_victims

DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass
class ExperimentConfig:
    """One experiment: a dataset, a model backend, and its hyperparameters."""

    dataset: str | None = None                 # dataset directory
    synthetic: dict | None = None              # SyntheticSpec fields + "seed"
    model: str = "gcn"                         # or "gpcn"
    epochs: int = 300
    weight_lr: float = 0.001
    hidden_dims: tuple[int, ...] = (16,)
    pc: dict = field(default_factory=dict)     # PCConfig overrides
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    bins: int = 10
    victim_strategy: str = "random_1000"
    dataset_name: str = "dataset"

    def __post_init__(self):
        if self.model not in ("gcn", "gpcn"):
            raise ValueError(f"unknown model {self.model!r}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be nonempty and distinct")

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "hidden_dims" in data:
            data["hidden_dims"] = tuple(data["hidden_dims"])
        if "seeds" in data:
            data["seeds"] = tuple(data["seeds"])
        return cls(**data)

    def config_hash(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def load_graph(self) -> Graph:
        if self.dataset is not None:
            return load_dataset(self.dataset)
        if self.synthetic is not None:
            fields = dict(self.synthetic)
            seed = fields.pop("seed", 0)
            if "split_fractions" in fields:
                fields["split_fractions"] = tuple(fields["split_fractions"])
            return generate_synthetic(SyntheticSpec(**fields), seed)
        raise ValueError("config needs either a dataset path or a synthetic spec")

    def train_config(self, seed: int):
        if self.model == "gcn":
            return TrainConfig(epochs=self.epochs, weight_lr=self.weight_lr,
                               seed=seed, hidden_dims=self.hidden_dims)
        return PCConfig(epochs=self.epochs, weight_lr=self.weight_lr,
                        seed=seed, hidden_dims=self.hidden_dims, **self.pc)


@dataclass
class RunRecord:
    config_hash: str
    model: str
    seed: int
    metrics: dict
    wall_clock: float
    checkpoint_path: str | None = None


class GCNTrainer:
    """Backprop backend behind the attack-protocol trainer interface."""

    def __init__(self, config: TrainConfig):
        self.config = config

    def train(self, graph: Graph) -> ModelParams:
        params, _ = train_bp(graph, self.config)
        return params

    def predict(self, graph: Graph, params: ModelParams) -> np.ndarray:
        return predict(normalize_adjacency(graph), graph.features, params)


class GPCNTrainer:
    """Predictive-coding backend behind the attack-protocol trainer interface."""

    def __init__(self, config: PCConfig):
        self.config = config

    def train(self, graph: Graph) -> ModelParams:
        params, _ = train_pc(graph, self.config)
        return params

    def predict(self, graph: Graph, params: ModelParams) -> np.ndarray:
        return pc_predict(normalize_adjacency(graph), graph.features, params,
                          self.config.mode)


def make_trainer(config: ExperimentConfig, seed: int):
    tc = config.train_config(seed)
    return GCNTrainer(tc) if config.model == "gcn" else GPCNTrainer(tc)


def _max_workers() -> int:
    return max(1, int(os.environ.get("GPCN_THREADS", "1")))


def _write_csv(path: Path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def checkpoint_dict(config: ExperimentConfig, seed: int, params: ModelParams,
                    history) -> dict:
    data = {
        "model": config.model,
        "layer_dims": list(params.layer_dims),
        "weights": [w.reshape(-1).tolist() for w in params.weights],
        "config": {"epochs": config.epochs, "weight_lr": config.weight_lr,
                   "hidden_dims": list(config.hidden_dims)},
        "seed": seed,
        "selected_epoch": history.selected_epoch,
    }
    if config.model == "gpcn":
        data["pc_config"] = dict(config.pc)
        data["final_energy"] = history.energy[-1]
    return data


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    data = json.loads(Path(path).read_text())
    dims = data["layer_dims"]
    weights = [np.array(flat, dtype=np.float64).reshape(dims[k], dims[k + 1])
               for k, flat in enumerate(data["weights"])]
    return ModelParams(dims, weights), data


def _train_one(config: ExperimentConfig, graph: Graph,
               seed: int) -> tuple[RunRecord, ModelParams, object]:
    start = time.perf_counter()
    tc = config.train_config(seed)
    if config.model == "gcn":
        params, history = train_bp(graph, tc)
    else:
        params, history = train_pc(graph, tc)
    adj = normalize_adjacency(graph)
    if config.model == "gcn":
        probs = predict(adj, graph.features, params)
    else:
        probs = pc_predict(adj, graph.features, params, tc.mode)
    test_mask = graph.mask("test")
    cal = expected_calibration_error(probs, graph.labels, test_mask,
                                     config.bins)
    sel = history.selected_epoch
    metrics = {
        "train_acc": history.train_acc[sel],
        "val_acc": history.val_acc[sel],
        "test_acc": history.test_acc[sel],
        "ece": cal.ece,
        "mce": cal.mce,
        "final_energy": (history.energy[-1] if history.energy else 0.0),
        "selected_epoch": sel,
    }
    record = RunRecord(config_hash=config.config_hash(), model=config.model,
                       seed=seed, metrics=metrics,
                       wall_clock=time.perf_counter() - start)
    return record, params, history


def cmd_train(config: ExperimentConfig, out_dir) -> list[RunRecord]:
    """Train every seed; write checkpoints and runs.csv with mean and
    population std per metric."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = config.load_graph()
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(lambda s: _train_one(config, graph, s),
                                config.seeds))
    records = []
    for record, params, history in results:
        ckpt = out / f"checkpoint_{config.model}_seed{record.seed}.json"
        ckpt.write_text(json.dumps(
            checkpoint_dict(config, record.seed, params, history),
            sort_keys=True))
        record.checkpoint_path = str(ckpt)
        records.append(record)

    metric_names = ["train_acc", "val_acc", "test_acc", "ece", "mce",
                    "final_energy", "selected_epoch"]
    rows = [{"model": r.model, "seed": r.seed,
             **{m: r.metrics[m] for m in metric_names}} for r in records]
    values = {m: np.array([r.metrics[m] for r in records])
              for m in metric_names}
    rows.append({"model": config.model, "seed": "mean",
                 **{m: float(values[m].mean()) for m in metric_names}})
    rows.append({"model": config.model, "seed": "std",
                 **{m: float(values[m].std()) for m in metric_names}})
    _write_csv(out / "runs.csv", ["model", "seed", *metric_names], rows)
    return records


def cmd_calibrate(checkpoint, data_dir, out_dir, bins: int = 10,
                  probs_override: np.ndarray | None = None) -> dict:
    """Emit bins.csv, histogram.csv, and report.json for one checkpoint.

    ``probs_override`` is a test hook that bypasses the model and scores the
    given probability rows directly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = load_dataset(data_dir)
    if probs_override is not None:
        probs = probs_override
    else:
        params, meta = load_checkpoint(checkpoint)
        if params.layer_dims[0] != graph.num_features:
            raise ValueError("checkpoint input width does not match dataset")
        adj = normalize_adjacency(graph)
        if meta["model"] == "gpcn":
            mode = meta.get("pc_config", {}).get("mode", "inter_layer")
            probs = pc_predict(adj, graph.features, params, mode)
        else:
            probs = predict(adj, graph.features, params)
    test_mask = graph.mask("test")
    report = expected_calibration_error(probs, graph.labels, test_mask, bins)
    hist = confidence_histogram(probs, test_mask, bins)

    bin_rows = []
    for b in range(bins):
        bin_rows.append({
            "bin_lo": report.bins.lo[b], "bin_hi": report.bins.hi[b],
            "count": int(report.bins.count[b]),
            "mean_conf": report.bins.mean_conf[b],
            "mean_acc": report.bins.mean_acc[b]})
    _write_csv(out / "bins.csv",
               ["bin_lo", "bin_hi", "count", "mean_conf", "mean_acc"],
               bin_rows)
    _write_csv(out / "histogram.csv", ["bin_lo", "bin_hi", "count"],
               [{"bin_lo": report.bins.lo[b], "bin_hi": report.bins.hi[b],
                 "count": int(hist[b])} for b in range(bins)])
    payload = {"ece": report.ece, "mce": report.mce, "bins": bins}
    (out / "report.json").write_text(json.dumps(payload, sort_keys=True))
    return payload


def cmd_attack(config: ExperimentConfig, spec: AttackSpec, budgets,
               out_dir) -> None:
    """Run the attack protocol for every seed; emit robustness.csv and
    margins.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = config.load_graph()

    def run_seed(seed):
        trainer = make_trainer(config, seed)
        clean_params = trainer.train(graph)
        probs = trainer.predict(graph, clean_params)
        victims = select_victims(graph, probs, config.victim_strategy, seed)
        seeded = AttackSpec(kind=spec.kind, mode=spec.mode,
                            budget=spec.budget, ptb_rate=spec.ptb_rate,
                            influencer_count=spec.influencer_count, seed=seed)
        return seed, evaluate_attack(trainer, graph, victims, seeded, budgets)

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(run_seed, config.seeds))

    rob_rows, margin_rows = [], []
    for seed, report in results:
        for q in report.budgets:
            rob_rows.append({
                "dataset": config.dataset_name, "model": config.model,
                "attack_kind": spec.kind, "mode": spec.mode, "budget": q,
                "seed": seed, "accuracy": report.accuracy[q],
                "holistic_metric": ("" if report.holistic is None
                                    else report.holistic)})
            for rec in report.margins_after[q]:
                margin_rows.append({
                    "node": rec.node, "margin": rec.margin,
                    "correct": rec.correct, "seed": seed,
                    "condition": "after", "budget": q,
                    "attack_kind": spec.kind})
        for rec in report.margins_before:
            margin_rows.append({
                "node": rec.node, "margin": rec.margin,
                "correct": rec.correct, "seed": seed, "condition": "before",
                "budget": 0, "attack_kind": spec.kind})
    _write_csv(out / "robustness.csv",
               ["dataset", "model", "attack_kind", "mode", "budget", "seed",
                "accuracy", "holistic_metric"], rob_rows)
    _write_csv(out / "margins.csv",
               ["node", "margin", "correct", "seed", "condition", "budget",
                "attack_kind"], margin_rows)


def cmd_energy_study(config: ExperimentConfig, t_grid, out_dir) -> None:
    """Per (inference-step count, seed): final training energy, ECE, MCE."""
    if config.model != "gpcn":
        raise ValueError("the energy study applies to the gpcn model only")
    if not t_grid:
        raise ValueError("empty inference-step grid")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = config.load_graph()

    jobs = [(t, seed) for t in t_grid for seed in config.seeds]

    def run(job):
        t, seed = job
        cfg = ExperimentConfig(**{**config.__dict__,
                                  "pc": {**config.pc, "inference_steps": t}})
        record, _, _ = _train_one(cfg, graph, seed)
        return {"T": t, "seed": seed,
                "final_energy": record.metrics["final_energy"],
                "ece": record.metrics["ece"], "mce": record.metrics["mce"]}

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        rows = list(pool.map(run, jobs))
    _write_csv(out / "study.csv", ["T", "seed", "final_energy", "ece", "mce"],
               rows)


def cmd_dataset_gen(spec_path, seed: int, out_dir) -> Graph:
    fields = json.loads(Path(spec_path).read_text())
    if "split_fractions" in fields:
        fields["split_fractions"] = tuple(fields["split_fractions"])
    g = generate_synthetic(SyntheticSpec(**fields), seed)
    save_dataset(g, out_dir, name=f"sbm_seed{seed}")
    return g


def cmd_dataset_inspect(data_dir) -> dict:
    g = load_dataset(data_dir)
    counts = {tag: int(g.mask(tag).sum())
              for tag in ("train", "val", "test", "none")}
    return {"num_nodes": g.num_nodes, "num_edges": g.num_edges,
            "num_features": g.num_features, "num_classes": g.num_classes,
            "splits": counts}


def cmd_dataset_lcc(data_dir, out_dir) -> Graph:
    g = largest_connected_component(load_dataset(data_dir))
    save_dataset(g, out_dir, name="lcc")
    return g
