"""Relate the model's settled free energy to its calibration error.

The energy-based model exposes a scalar the backprop baseline does not
have: the free energy its value nodes settle into after inference.
When weights update at every inference step, running more inference
steps per epoch (larger T) drives the energy lower. This script trains
across a T grid, records final energy and test-set ECE per seed, and
checks two things: energy falls with T, and lower energy lines up with
lower calibration error (positive rank correlation between the two).
"""

import csv

import numpy as np
from scipy.stats import spearmanr

from gpcn.harness import ExperimentConfig, cmd_energy_study


def main(out_dir="out/energy_study"):
    config = ExperimentConfig(
        model="gpcn", epochs=40, seeds=(0, 1, 2, 3, 4),
        synthetic={"num_blocks": 2, "nodes_per_block": 150,
                   "intra_block_edge_prob": 0.10,
                   "inter_block_edge_prob": 0.02,
                   "feature_dim": 12, "feature_noise_std": 0.5,
                   "split_fractions": [0.1, 0.2, 0.7], "seed": 42},
        pc={"weight_update_timing": "every_step", "value_update_rate": 0.1})

    cmd_energy_study(config, [12, 36], out_dir)
    with open(f"{out_dir}/study.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    energy = np.array([float(r["final_energy"]) for r in rows])
    ece = np.array([float(r["ece"]) for r in rows])
    t = np.array([int(r["T"]) for r in rows])

    for val in (12, 36):
        sel = t == val
        print(f"T={val}: energy {energy[sel].mean():.4f} "
              f"+- {energy[sel].std():.4f}, ece {ece[sel].mean():.4f}")
    rho = spearmanr(energy, ece).statistic
    print(f"spearman(energy, ece) = {rho:+.3f}")
    print(f"rows written to {out_dir}/study.csv")


if __name__ == "__main__":
    main()
