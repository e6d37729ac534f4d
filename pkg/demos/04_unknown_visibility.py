"""Estimating the visibility alongside the state.

With only Z measurements on a diagonal state, the data identify the product
eta (2p - 1) and nothing else, so the joint (p, eta) posterior is a curved
ridge. The script prints joint and marginal coverage for a narrow and a
wide visibility prior, then repeats the wide case on a full qubit, where
the extra directions let the ridge bend enough to fool the PCE.

    python3 demos/04_unknown_visibility.py [trials]
"""
import sys

from hpdregions.harness import ExperimentConfig, run_experiment
from hpdregions.models import diagonal_model, qubit_model

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 30


def show(title, cfg):
    summary, _ = run_experiment(cfg)
    print(title)
    for e in summary.coverage:
        print(f"  {e.kind:<16s} {e.coverage:.2f} [{e.beta_lo:.3f}, {e.beta_hi:.3f}]")


for lo in (0.9, 0.5):
    show(f"diagonal model, eta ~ U[{lo}, 1], 1000 Z measurements",
         ExperimentConfig(model=diagonal_model(visibility_interval=(lo, 1.0)), particles=2000,
                          measurements=1000, trials=trials, kinds=("pce", "mvee"),
                          checkpoints=(1000,), seed=1))

show("qubit, eta ~ U[0.5, 1], 1000 Pauli measurements",
     ExperimentConfig(model=qubit_model(1, visibility_interval=(0.5, 1.0)), particles=2000,
                      measurements=1000, trials=trials, kinds=("pce", "mvee"),
                      checkpoints=(1000,), seed=1))
