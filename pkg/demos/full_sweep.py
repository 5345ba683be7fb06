"""Full-scale coverage and rejection sweep (offline; takes hours).

Runs 500 replicates at n = 50, 100, 500, 1000 for the four-ordinal truth and
the boundary truth at every ladder degree, writing one CSV and one text
table per scenario into ``sweep_out/``.  Use ``--replicates`` and
``--sizes`` for a shorter run.
"""

import argparse
from pathlib import Path

from poclm.simulation import (
    ExperimentConfig,
    boundary_truth,
    coverage_experiment,
    four_ordinal_truth,
    rejection_experiment,
)

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--replicates", type=int, default=500)
parser.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 500, 1000])
parser.add_argument("--seed", type=int, default=2024)
parser.add_argument("--out", default="sweep_out")
args = parser.parse_args()

out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
for make in (four_ordinal_truth, boundary_truth):
    for degree in ("small", "medium", "large"):
        truth = make(degree)
        name = truth.label.replace("/", "_")
        cfg = ExperimentConfig(truth, tuple(args.sizes), args.replicates, seed=args.seed, name=name,
                               kinds=("ucr", "uccr", "ccr", "acr"))
        reports = [coverage_experiment(cfg)]
        if make is boundary_truth:
            reports.append(rejection_experiment(cfg))
        for rep in reports:
            stem = out / f"{name}_{rep.experiment}"
            stem.with_suffix(".csv").write_text(rep.to_csv())
            stem.with_suffix(".txt").write_text(rep.to_text())
            print(rep.to_text())
