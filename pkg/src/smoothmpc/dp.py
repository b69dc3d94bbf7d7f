"""Discounted value iteration baseline for the battery MDP.

Discretizes the charge state on a uniform grid that strictly contains the
feasible band [0, 1], the action on a uniform grid over [-u_max, u_max],
and the inflow disturbance by Gauss-Hermite quadrature. The value function
is piecewise-linear in the state; quadrature points that fall outside the
grid are handled by extending the edge segments linearly, which matches the
penalty-dominated growth of the value function out there.

Because interpolation and expectation are both linear in V, each action's
Bellman expectation is one sparse matrix-vector product; the whole sweep is
a handful of them. Ties in the action minimization are broken toward the
smallest |a| and then toward selling, so the do-nothing plateau of the
optimal policy comes out as exact zeros.

`policy_performance` estimates the discounted closed-loop cost of any
state-to-action map by seeded Monte-Carlo rollouts from uniform initial
charge, which is the common yardstick for the learned and baseline
policies.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .battery import EnvParams

__all__ = [
    "DpGrid",
    "DpSolution",
    "value_iteration",
    "optimal_action",
    "policy_performance",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DpGrid:
    """State/action/quadrature discretization plus the discount factor."""

    s_nodes: np.ndarray
    a_nodes: np.ndarray
    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    gamma: float

    @staticmethod
    def build(
        env: EnvParams,
        s_lo: float = -0.25,
        s_hi: float = 1.25,
        n_states: int = 401,
        n_actions: int = 41,
        n_quad: int = 11,
        gamma: float = 0.99,
    ) -> "DpGrid":
        if not (s_lo < 0.0 and s_hi > 1.0):
            raise ValueError(
                f"state grid must strictly contain [0, 1], got [{s_lo}, {s_hi}]"
            )
        if n_states < 2 or n_actions < 2 or n_quad < 1:
            raise ValueError("need n_states >= 2, n_actions >= 2, n_quad >= 1")
        if not 0.0 < gamma < 1.0:
            raise ValueError(
                f"value iteration needs a contraction, gamma in (0, 1); got {gamma}"
            )
        s_nodes = np.linspace(s_lo, s_hi, n_states)
        a_nodes = np.linspace(-env.u_max, env.u_max, n_actions)
        if env.noise_std > 0.0:
            x, w = np.polynomial.hermite.hermgauss(n_quad)
            quad_nodes = env.noise_mean + math.sqrt(2.0) * env.noise_std * x
            quad_weights = w / math.sqrt(math.pi)
        else:
            quad_nodes = np.array([env.noise_mean])
            quad_weights = np.array([1.0])
        if abs(quad_weights.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights do not sum to 1")
        return DpGrid(s_nodes, a_nodes, quad_nodes, quad_weights, gamma)

    @property
    def spacing(self) -> float:
        return float(self.s_nodes[1] - self.s_nodes[0])


@dataclass
class DpSolution:
    """Converged value table V and greedy policy pi on the state grid."""

    grid: DpGrid
    V: np.ndarray
    pi: np.ndarray
    bellman_residual: float
    sweeps: int

    def action(self, s, warn: bool = True):
        """Nearest-node policy lookup; out-of-range states are clamped."""
        s = np.asarray(s, dtype=float)
        nodes = self.grid.s_nodes
        lo, hi = nodes[0], nodes[-1]
        clipped = np.clip(s, lo, hi)
        if warn and np.any((s < lo) | (s > hi)):
            log.warning(
                "policy lookup clamped %d state(s) into [%g, %g]",
                int(np.sum((s < lo) | (s > hi))),
                lo,
                hi,
            )
        idx = np.rint((clipped - lo) / self.grid.spacing).astype(int)
        out = self.pi[idx]
        return float(out) if out.ndim == 0 else out

    def value(self, s):
        """Piecewise-linear value lookup with linear edge extrapolation."""
        s = np.asarray(s, dtype=float)
        nodes = self.grid.s_nodes
        pos = (s - nodes[0]) / self.grid.spacing
        j = np.clip(np.floor(pos).astype(int), 0, len(nodes) - 2)
        c = pos - j
        out = (1.0 - c) * self.V[j] + c * self.V[j + 1]
        return float(out) if out.ndim == 0 else out


def _interp_operator(grid: DpGrid, shift: float) -> sparse.csr_matrix:
    """Sparse matrix mapping V(nodes) -> V(nodes + shift), linear segments.

    Bracket indices are clamped to the edge segments, so targets outside the
    grid extrapolate the first/last segment linearly.
    """
    nodes = grid.s_nodes
    n = len(nodes)
    pos = (nodes + shift - nodes[0]) / grid.spacing
    j = np.clip(np.floor(pos).astype(int), 0, n - 2)
    c = pos - j
    rows = np.repeat(np.arange(n), 2)
    cols = np.stack([j, j + 1], axis=1).ravel()
    vals = np.stack([1.0 - c, c], axis=1).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def value_iteration(
    env: EnvParams,
    grid: DpGrid,
    tol: float = 1e-8,
    max_sweeps: int = 50_000,
) -> DpSolution:
    """Run Bellman sweeps until the sup-norm update falls below tol.

    Returns the converged solution; raises RuntimeError if the sweep budget
    is exhausted first (which for gamma < 1 means tol was set unreasonably).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    # expectation operators per action: E[V(s + alpha (delta + a))]
    ops = []
    for a in grid.a_nodes:
        P = None
        for dq, wq in zip(grid.quad_nodes, grid.quad_weights):
            Pi = _interp_operator(grid, env.alpha * (dq + a)) * wq
            P = Pi if P is None else P + Pi
        ops.append(sparse.csr_matrix(P))
    P_all = sparse.vstack(ops, format="csr")
    n_a, n_s = len(grid.a_nodes), len(grid.s_nodes)
    Lmat = np.stack([env.rl_stage_cost(grid.s_nodes, a) for a in grid.a_nodes])
    # evaluate actions in (|a|, a) order so argmin ties resolve toward 0, then selling
    order = np.lexsort((grid.a_nodes, np.abs(grid.a_nodes)))
    a_sorted = grid.a_nodes[order]

    V = np.zeros(n_s)
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        EV = (P_all @ V).reshape(n_a, n_s)
        Q = Lmat + grid.gamma * EV
        Qs = Q[order]
        best = np.argmin(Qs, axis=0)
        V_new = Qs[best, np.arange(n_s)]
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if residual <= tol:
            pi = a_sorted[best]
            return DpSolution(grid, V, pi, residual, sweep)
    raise RuntimeError(
        f"value iteration did not reach tol={tol:g} in {max_sweeps} sweeps "
        f"(last update {residual:.3e})"
    )


def optimal_action(sol: DpSolution, s, warn: bool = True):
    """Greedy action of the converged policy at state(s) s."""
    return sol.action(s, warn=warn)


def policy_performance(
    policy,
    env: EnvParams,
    gamma: float,
    n_rollouts: int = 64,
    horizon: int = 1000,
    seed=0,
):
    """Monte-Carlo discounted cost of a state-to-action map.

    policy must accept a 1-D array of states and return the matching array
    of actions (scalar-only callables can be wrapped with np.vectorize).
    Initial charge is uniform on [0, 1]; actions are clamped into the power
    bound before stepping. The horizon must satisfy gamma^horizon <= 1e-4 so
    truncation is negligible. Returns (J, standard_error).
    """
    if n_rollouts < 1 or horizon < 1:
        raise ValueError("n_rollouts and horizon must be >= 1")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if gamma > 0 and gamma**horizon > 1e-4:
        raise ValueError(
            f"horizon {horizon} leaves gamma^horizon = {gamma**horizon:.2e} > 1e-4"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    s = rng.uniform(0.0, 1.0, n_rollouts)
    total = np.zeros(n_rollouts)
    disc = 1.0
    for _ in range(horizon):
        a = np.clip(np.asarray(policy(s), dtype=float), -env.u_max, env.u_max)
        total += disc * env.rl_stage_cost(s, a)
        delta = rng.normal(env.noise_mean, env.noise_std, n_rollouts)
        s = env.step(s, a, delta)
        disc *= gamma
    J = float(np.mean(total))
    se = float(np.std(total, ddof=1) / math.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0
    return J, se
