"""Decide between the two candidate variance constants for variance-gamma noise by simulation."""

import argparse
import math

import numpy as np

from levyspde import rng
from levyspde.noise import VarianceGamma, moment_mp, sample_cells


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=202)
    args = ap.parse_args()
    print(f"{'theta':>6} {'sigma':>6} {'nu':>5} {'empirical':>10} {'stderr':>8} {'th2nu+s2':>9} {'5/8 var.':>9}")
    for i, (th, s, nu) in enumerate([(1.0, 1.0, 1.0), (2.0, 0.5, 0.5), (-0.5, 0.3, 2.0)]):
        m = VarianceGamma(th, s, nu)
        x = sample_cells(m, 1.0, args.samples, rng.stream(args.seed, i, 0, rng.PROBE))
        c = x - x.mean()
        v = float(np.mean(c * c))
        se = math.sqrt((float(np.mean(c**4)) - v * v) / len(x))
        print(f"{th:6.2f} {s:6.2f} {nu:5.2f} {v:10.5f} {se:8.5f} {moment_mp(m, 2):9.5f} {0.625 * th * th * nu + s * s:9.5f}")


if __name__ == "__main__":
    main()
