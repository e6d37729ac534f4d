"""Do 95% regions contain the truth 95% of the time?

Each trial draws a fresh state from the prior, so the frequency with which
the region contains it is a direct check of Bayesian calibration. The
interval printed next to each coverage is the 95% HPD interval of a
Beta(s + 1, T - s + 1) posterior on the coverage probability.

    python3 demos/03_coverage.py [trials]
"""
import sys

from hpdregions.harness import ExperimentConfig, run_experiment
from hpdregions.models import qubit_model

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 50

for eta in (1.0, 0.9):
    model = qubit_model(1, visibility=None if eta == 1.0 else eta)
    cfg = ExperimentConfig(model=model, particles=5000, measurements=100, trials=trials,
                           checkpoints=(10, 100), seed=1)
    summary, _ = run_experiment(cfg)
    print(f"visibility {eta}:")
    for e in summary.coverage:
        print(f"  N={e.checkpoint:<4d} {e.kind:<5s} {e.successes}/{e.trials} = {e.coverage:.2f} "
              f"[{e.beta_lo:.3f}, {e.beta_hi:.3f}]")
