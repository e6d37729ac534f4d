"""How fast do the regions shrink, and how do PCE and MVEE compare?

Runs a modest single-qubit experiment and prints mean region volume at
logarithmically spaced checkpoints, plus the per-trial relative size
|Vol(PCE) - Vol(MVEE)| / Vol(MVEE). Volumes should fall roughly like N^(-3/2)
in three dimensions once the data dominate the prior.

    python3 demos/02_volume_curves.py [out_dir]
"""
import sys

import numpy as np

from hpdregions.export import export_records
from hpdregions.harness import ExperimentConfig, run_experiment
from hpdregions.models import qubit_model

out = sys.argv[1] if len(sys.argv) > 1 else "demo_volumes"

cfg = ExperimentConfig(model=qubit_model(1), particles=3000, measurements=200, trials=20, seed=5)
summary, records = run_experiment(cfg)

print(" N      Vol(PCE)    Vol(MVEE)   mean|dV|/V  signed")
rel = {r.checkpoint: r for r in summary.relative_size}
for cp in cfg.checkpoints:
    p, m = summary.entry(cp, "pce"), summary.entry(cp, "mvee")
    r = rel[cp]
    print(f"{cp:4d}  {p.vol_mean:10.3e}  {m.vol_mean:10.3e}  {r.mean:9.3f}  {r.signed_mean:+7.3f}")

# slope of log volume against log N over the last decade
cps = np.array([c for c in cfg.checkpoints if c >= 20])
vols = np.array([summary.entry(c, "pce").vol_mean for c in cps])
slope = np.polyfit(np.log(cps), np.log(vols), 1)[0]
print(f"PCE volume scales like N^{slope:.2f} for N >= 20")

export_records(records, summary, out)
print(f"curves.csv and friends written to {out}/")
