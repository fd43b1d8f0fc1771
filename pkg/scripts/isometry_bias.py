"""Time-step bias of the scheme's linear variance against the continuum isometry."""

import argparse

from levyspde.bounds import m_p
from levyspde.green import OperatorSpec
from levyspde.grid import SimGrid
from levyspde.kernels import HeatKernel
from levyspde.simulate import linear_variance_discrete


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=float, default=1.0)
    args = ap.parse_args()
    op, k = OperatorSpec("heat", 1), HeatKernel(1.0)
    exact = m_p(op, k, args.t, 2)
    print(f"continuum {exact:.8f}")
    for dt in (0.1, 0.05, 0.02, 0.01, 0.005):
        g = SimGrid(1, 16.0, 256, dt, args.t)
        v = linear_variance_discrete(op, k, 1.0, g, args.t)
        print(f"dt={dt:<6} scheme {v:.8f}  rel. bias {(v - exact) / exact:+.2e}")


if __name__ == "__main__":
    main()
