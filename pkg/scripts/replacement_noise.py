#!/usr/bin/env python3
"""Causal drift vs. shuffling work_interfere in the same fraction of rows."""

import argparse

import numpy as np

from causal_twin.drift import replacement_noise_baseline
from causal_twin.experiments import SELF_HELP, osmi_twin


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--fractions", type=float, nargs="*", default=[0.1, 0.25, 0.5, 0.75, 1.0])
    ap.add_argument("--feature", default="work_interfere")
    args = ap.parse_args()

    setup = osmi_twin()
    table = np.array([[r.delta_precision for r in replacement_noise_baseline(
        setup.scm, setup.model, args.fractions, args.feature, seed, scenario=SELF_HELP)]
        for seed in range(args.seeds)])
    print(f"{'fraction':>8} {'mean dPrec':>10} {'min':>7} {'max':>7} {'>= 0.05':>8}")
    for j, f in enumerate(args.fractions):
        col = table[:, j]
        print(f"{f:>8.2f} {col.mean():>10.3f} {col.min():>7.3f} {col.max():>7.3f} "
              f"{int((col >= 0.05).sum()):>5}/{args.seeds}")


if __name__ == "__main__":
    main()
