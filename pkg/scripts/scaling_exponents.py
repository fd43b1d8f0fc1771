"""Log-log slopes of j_p(t) against the self-similar exponents, plus the wave-Bessel large-t regime."""

import argparse

import numpy as np

from levyspde.bounds import fit_loglog, green_norm_bound, j_p_bound, j_p_numeric
from levyspde.green import OperatorSpec
from levyspde.kernels import BesselKernel, RieszKernel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5, help="Riesz order")
    ap.add_argument("--wave-numeric", action="store_true", help="also fit the (slow) numeric wave-Bessel j_p")
    args = ap.parse_args()

    heat, wave = OperatorSpec("heat", 1), OperatorSpec("wave", 1)
    k = RieszKernel(args.alpha)
    ts = np.logspace(-2, 1, 12)
    print("heat + Riesz")
    for p in (2, 3, 4, 6):
        slope, se = fit_loglog(ts, [j_p_numeric(heat, k, t, p) for t in ts])
        print(f"  p={p}: fitted {slope:+.5f} +- {se:.1e}   predicted {j_p_bound(heat, k, 1.0, p).exponent:+.5f}")

    print("wave + Bessel(1.5)")
    tw = np.logspace(0, 2, 12)
    for p in (2, 4):
        slope, _ = fit_loglog(tw, [green_norm_bound(wave, t, p) for t in tw])
        print(f"  p={p}: Green-norm bound slope {slope:.5f}   predicted {2 / p:.5f}")
    if args.wave_numeric:
        # only asymptotic: kernel smoothing bends the curve at moderate t
        tl = np.logspace(np.log10(30), np.log10(300), 8)
        kb = BesselKernel(1.5)
        for p in (2, 4):
            slope, se = fit_loglog(tl, [j_p_numeric(wave, kb, t, p) for t in tl])
            print(f"  p={p}: numeric j_p slope on [30, 300] {slope:.4f} +- {se:.1e}")


if __name__ == "__main__":
    main()
