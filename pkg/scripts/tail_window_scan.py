#!/usr/bin/env python3
"""Axis tail exponents of one self-similar profile for several fit windows.

Shows how far out each axis must be sampled before the local slope settles
near -2 mu_i. Uses a single profile solve, then refits on sub-windows.

    python scripts/tail_window_scan.py --extent 240 64 --cells 512 128
"""

import argparse

import numpy as np

from afde.grid import TensorGrid
from afde.solver import SolverConfig, solve_profile
from afde.verify import FitError, _axis_row, _exponents, fit_power_law


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=float, nargs="+", default=[0.8, 0.4])
    ap.add_argument("--extent", type=float, nargs="+", default=[240.0, 64.0])
    ap.add_argument("--cells", type=int, nargs="+", default=[512, 128])
    ap.add_argument("--floor", type=float, default=1e-26)
    args = ap.parse_args()

    me, se = _exponents(args.m)
    grid = TensorGrid(tuple(args.extent), tuple(args.cells))
    res = solve_profile(1.0, me, se, SolverConfig(bc="reflecting", floor=args.floor, steady_tol=1e-4, max_steps=5000), grid)
    print(f"profile: {res.iterations} iterations, residual {res.residual:.2e}, mass {res.mass:.6f}")
    for i in range(me.N):
        y, f = _axis_row(res.profile, i)
        L = grid.half_extent[i]
        print(f"axis {i + 1}: target {-2 * se.mu[i]:.4f}")
        for lo in (0.05, 0.1, 0.2, 0.3):
            for hi in (0.6, 0.9, 1.0):
                try:
                    fit = fit_power_law(y, f, (max(2.0, lo * L), hi * L))
                except FitError as e:
                    print(f"  [{lo:.2f}, {hi:.2f}] L  {e}")
                    continue
                print(f"  [{lo:.2f}, {hi:.2f}] L  exponent {fit.exponent:8.4f}  rel err {abs(fit.exponent / (2 * se.mu[i]) + 1):.4f}")
        # local slopes from neighbouring cells
        ly, lf = np.log(y), np.log(f)
        slope = np.diff(lf) / np.diff(ly)
        pick = np.unique(np.linspace(0, len(slope) - 1, 8).astype(int))
        print("  local slope: " + ", ".join(f"y={np.exp(0.5 * (ly[k] + ly[k + 1])):.3g}:{slope[k]:.3f}" for k in pick))


if __name__ == "__main__":
    main()
