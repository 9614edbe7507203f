"""Mean grid variance per iteration for reduce_variance campaigns.

    python scripts/variance_trace.py --seeds 10
"""

import argparse
from dataclasses import replace

import numpy as np

from mfloop.config import load_config, shipped_configs
from mfloop.driver import run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="stochastic_micro")
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    base = load_config(shipped_configs()[args.config])
    for seed in range(args.seeds):
        trace = [it["mean_variance"] for it in run_campaign(replace(base, seed=seed)).iterations]
        rise = max(np.diff(trace), default=0.0)
        print(f"seed {seed:>3}: " + " ".join(f"{v:.4g}" for v in trace) + f"   largest rise {rise:.3g}")


if __name__ == "__main__":
    main()
