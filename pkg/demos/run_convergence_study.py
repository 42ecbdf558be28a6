#!/usr/bin/env python3
"""Empirical convergence orders: randomized gain over the deterministic scheme.

Fits log(error) against log(h) for the max-over-grid L2-over-paths error.
On the smooth test equation the deterministic midpoint scheme is order 2,
while the randomized implicit pair sits near 1.5 (the random evaluation
point adds a stratified-sampling fluctuation of order h^1.5).  On the
kinked-forcing problem the fluctuation term dominates everywhere.
"""

import time

import numpy as np

from randrk import SchemeId, convergence_order, dahlquist, holder_problem

H = [2.0 ** -k for k in range(4, 10)]
PATHS = 500  # enough for ~0.05 slope noise; raise for tighter estimates


def show(name, ivp, scheme, paths, seed=101):
    t0 = time.time()
    fit = convergence_order(ivp, scheme, H, paths, p=2.0, seed=seed)
    print(f"\n{name}: slope {fit.slope:.3f}  (r2 = {fit.r2:.5f}, {time.time()-t0:.1f}s)")
    print("      h        error       std err")
    for h, est in fit.levels:
        print(f"  2^{int(np.log2(h)):+d}   {est.value:.4e}   {est.std_error:.1e}")
    return fit


print(f"levels h = 2^-4 .. 2^-9, {PATHS} paths, p = 2")
show("det-s2 on x' = -2x (order 2)", dahlquist(-2.0), SchemeId.DET_S2, paths=1)
show("s2 on x' = -2x (noise-limited, ~1.5)", dahlquist(-2.0), SchemeId.S2, PATHS)
show("s1 on x' = -2x + |t-1/2|^(1/2) (fluctuation-dominated)",
     holder_problem(lam=-2.0, exponent=0.5), SchemeId.S1, PATHS)
