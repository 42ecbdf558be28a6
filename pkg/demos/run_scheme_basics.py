#!/usr/bin/env python3
"""Tour of the six one-step schemes on the linear test equation x' = lam*x.

Shows the shared per-step multiplier of the two implicit randomized schemes,
the specialization tau = 1/2 -> deterministic, and what a single random path
looks like next to the exact exponential.
"""

import numpy as np

from randrk import (AFFINE, FixedTau, SchemeId, StageSolverConfig, amplification,
                    dahlquist, integrate, make_grid, step_s1, step_s2, tau_stream)

cfg = StageSolverConfig(method=AFFINE)

print("=== per-step multiplier on x' = -x, h = 1 ===")
print("both implicit schemes map V to V * (1 + z/(1 - z*tau)), z = lam*h")
ivp = dahlquist(-1.0)
for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
    s1 = step_s1(ivp, 0.0, np.array([1.0]), 1.0, tau, cfg).state[0]
    s2 = step_s2(ivp, 0.0, np.array([1.0]), 1.0, tau, cfg).state[0]
    print(f"  tau={tau:.1f}: s1 -> {s1:+.6f}   s2 -> {s2:+.6f}   "
          f"formula -> {amplification(-1, tau).real:+.6f}")

print()
print("=== tau pinned to 1/2 reproduces the deterministic midpoint scheme ===")
grid = make_grid(0.0, 1.0, 16)
forced = integrate(ivp, SchemeId.S2, grid, FixedTau(0.5), cfg)
plain = integrate(ivp, SchemeId.DET_S2, grid, None, cfg)
print(f"  max |forced - deterministic| = {np.max(np.abs(forced.states - plain.states)):.1e}"
      f"  (bitwise: {np.array_equal(forced.states, plain.states)})")

print()
print("=== one random path vs the exact exponential ===")
traj = integrate(ivp, SchemeId.S2, grid, tau_stream(seed=7), cfg)
print("    t      V (s2 path)   exp(-t)      error")
for j in range(0, grid.n + 1, 4):
    t = grid.times()[j]
    v = traj.states[j, 0]
    e = np.exp(-t)
    print(f"  {t:5.2f}   {v:+.6f}    {e:+.6f}   {v - e:+.2e}")
print(f"  stage iterations per step: min {traj.stage_iters.min()}, max {traj.stage_iters.max()}")
