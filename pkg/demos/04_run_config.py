"""Run a JSON experiment config programmatically and summarize the aggregate table."""

import sys
from pathlib import Path

from ioctomo import ExperimentConfig, run_experiment

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "configs" / "fig1_small.json"
cfg = ExperimentConfig.from_json(path)
res = run_experiment(cfg)
for row in res.aggregate:
    if row["figure"] in ("mse", "pairwise_mse"):
        print(f"N={row['N']:>6}  {row['estimator']:<24s} {row['figure']:<13s} {row['mean']:.4f} +- {row['stderr']:.4f}")
