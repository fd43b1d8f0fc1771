"""Run the CLI over every shipped config with its natural subcommand and print exit codes."""

import argparse
import sys
import time
from pathlib import Path

from levyspde.cli import main as cli

PLAN = {
    "noise_gamma": ["noise-check"],
    "isometry_heat": ["moments"],
    "bounds_heat_riesz": ["bounds"],
    "dalang_fail_riesz_d3": ["bounds"],
    "anderson_heat": ["anderson-series", "intermittency", "moments"],
    "nonlinear_wave": ["simulate"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--only", nargs="*")
    args = ap.parse_args()
    root = Path(__file__).resolve().parent.parent / "configs"
    for stem, cmds in PLAN.items():
        if args.only and stem not in args.only:
            continue
        for cmd in cmds:
            t0 = time.perf_counter()
            code = cli([cmd, "--config", str(root / f"{stem}.json"), "--out", f"{args.out}/{stem}/{cmd}"])
            print(f"{stem:22s} {cmd:16s} exit {code}  {time.perf_counter() - t0:6.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
