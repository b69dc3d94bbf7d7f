"""
A dynamic-programming yardstick for the storage task
====================================================

Discretizes the scalar storage MDP, runs value iteration to a tight
Bellman residual, and inspects the optimal policy: a buy region at low
charge, a do-nothing band around the target, and a sell region above it.
The resulting policy also gives the Monte-Carlo performance target that
learned policies are judged against.
"""

import numpy as np

from smoothmpc.battery import EnvParams
from smoothmpc.dp import DpGrid, policy_performance, value_iteration

env = EnvParams()
grid = DpGrid.build(env)
sol = value_iteration(env, grid)
print(
    f"value iteration: {sol.sweeps} sweeps, "
    f"Bellman residual {sol.bellman_residual:.2e} on {grid.s_nodes.size} nodes"
)

# --- The three-region structure ---------------------------------------
a = sol.pi
s = grid.s_nodes
buy = s[a > 1e-9]
zero = s[np.abs(a) <= 1e-9]
sell = s[a < -1e-9]
print("\noptimal action regions:")
print(f"  buy  (a > 0): s in [{buy.min():.4f}, {buy.max():.4f}]")
print(f"  hold (a = 0): s in [{zero.min():.4f}, {zero.max():.4f}]")
print(f"  sell (a < 0): s in [{sell.min():.4f}, {sell.max():.4f}]")
frac_bang = np.mean(np.abs(a) > 0.5 * env.u_max)
print(f"  fraction of states commanding |a| > u_max/2: {frac_bang:.3f}")

# --- Point lookups -----------------------------------------------------
print("\npolicy and value at sample states:")
print(f"{'s':>6}  {'action':>8}  {'value':>10}")
for x in (-0.1, 0.02, 0.3, 0.5, 0.58, 0.8, 1.2):
    print(f"{x:6.2f}  {sol.action(x):8.3f}  {sol.value(x):10.3f}")

# --- Monte-Carlo performance target ------------------------------------
J, se = policy_performance(
    sol.action, env, grid.gamma, n_rollouts=256, horizon=1000, seed=0
)
print(f"\ndiscounted cost of the DP policy: J = {J:.3f} +- {se:.3f} (256 rollouts)")
print("This J is the quality bar for the learned smoothed-MPC policies.")
