"""Count acquired eh_analogue designs that land in the top decile of the objective.

    python scripts/eh_clustering.py --seeds 20
"""

import argparse
from dataclasses import replace

import numpy as np

from mfloop.bench import eh_analogue
from mfloop.config import load_config, shipped_configs
from mfloop.driver import run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--grid", type=int, default=401, help="grid points per axis for the decile threshold")
    ap.add_argument("--noise-floor", type=float, default=None)
    args = ap.parse_args()

    problem = eh_analogue()
    g = np.linspace(0, 1, args.grid)
    grid = np.stack([a.ravel() for a in np.meshgrid(g, g, indexing="ij")], axis=1)
    threshold = np.quantile(problem.value(grid, 0), 0.9)
    base = load_config(shipped_configs()["eh_analogue"])
    if args.noise_floor is not None:
        base = replace(base, noise_floor=args.noise_floor)

    hits = []
    for seed in range(args.seeds):
        hist = run_campaign(replace(base, seed=seed)).state.history
        acquired = np.array([h["observation"]["point"] for h in hist if h["iteration"] > 0])
        hits.append(int(np.sum(problem.value(acquired, 0) >= threshold)))
        print(f"seed {seed:>3}: {hits[-1]} of {len(acquired)} in top decile")
    print(f"threshold {threshold:.6f}; seeds with >= 4 hits: {sum(h >= 4 for h in hits)}/{len(hits)}")


if __name__ == "__main__":
    main()
