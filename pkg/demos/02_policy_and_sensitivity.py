"""
The smoothed MPC policy and its exact parameter gradient
========================================================

Builds the receding-horizon storage controller, queries the first action
at a few states, and verifies the tau-exact theta-gradient returned by
the implicit-function sensitivity against central finite differences of
the whole solve.  Lowering tau sharpens the action toward its bang-bang
envelope while the gradient stays exact at every level.
"""

import numpy as np

from smoothmpc.mpc import MpcConfig, build_nlp, default_options, evaluate

cfg = MpcConfig()
nlp = build_nlp(cfg)
theta = np.array([6.0, 6.0])

# --- Action band across the state space -------------------------------
# Below the target band the controller buys hard (u near +1), inside it
# the action is small, above it the controller sells hard (u near -1).
print("First action u0 = pi(s) at theta = (6, 6):")
print(f"{'s':>6}  {'u0 @ tau=1e-2':>14}  {'u0 @ tau=1e-3':>14}  {'u0 @ tau=1e-4':>14}")
for s in (-0.15, 0.10, 0.35, 0.60, 0.90, 1.15):
    row = [evaluate(nlp, cfg, s, theta, tau).u0 for tau in (1e-2, 1e-3, 1e-4)]
    print(f"{s:6.2f}  {row[0]:14.6f}  {row[1]:14.6f}  {row[2]:14.6f}")
print("Smaller tau pushes the extreme actions closer to the +-1 bounds.\n")

# --- Exact gradient vs finite differences -----------------------------
# The gradient is exact for the relaxed problem, so it must match central
# differences of u0 itself (same tau, tight solver tolerance) to O(h^2).
print("theta-gradient check against central finite differences (tau = 1e-3):")
h = 1e-5
opts = default_options(1e-3, tol=1e-11)
print(f"{'s':>6}  {'analytic grad':>28}  {'fd grad':>28}  {'max rel err':>12}")
for s in (0.05, 0.45, 0.62):
    ev = evaluate(nlp, cfg, s, theta, 1e-3, opts=opts)
    fd = np.empty(2)
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        up = evaluate(nlp, cfg, s, theta + step, 1e-3, opts=opts).u0
        dn = evaluate(nlp, cfg, s, theta - step, 1e-3, opts=opts).u0
        fd[j] = (up - dn) / (2 * h)
    rel = np.max(np.abs(ev.grad_theta - fd) / (1.0 + np.abs(fd)))
    ga = np.array2string(ev.grad_theta, precision=6, suppress_small=True)
    gf = np.array2string(fd, precision=6, suppress_small=True)
    print(f"{s:6.2f}  {ga:>28}  {gf:>28}  {rel:12.2e}")
print("\nOn the saturated plateaus the gradient is tiny; near the band")
print("edges it is large -- exactly the structure the learner exploits.")
