"""Median simple regret of the two-level Forrester campaign against its hf-only twin.

    python scripts/mf_vs_hf.py --seeds 20
"""

import argparse
from dataclasses import replace

import numpy as np

from mfloop.config import load_config, shipped_configs
from mfloop.driver import run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    args = ap.parse_args()

    configs = shipped_configs()
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    results = {}
    for name in ("forrester_pair", "forrester_hf_only"):
        base = load_config(configs[name])
        results[name] = np.array([run_campaign(replace(base, seed=s)).regret for s in seeds])
    print(f"{'seed':>4}  {'mf':>10}  {'hf-only':>10}")
    for k, s in enumerate(seeds):
        print(f"{s:>4}  {results['forrester_pair'][k]:>10.4f}  {results['forrester_hf_only'][k]:>10.4f}")
    print(f"median  mf {np.median(results['forrester_pair']):.4f}  "
          f"hf-only {np.median(results['forrester_hf_only']):.4f}")


if __name__ == "__main__":
    main()
