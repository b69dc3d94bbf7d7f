"""Deterministic policy-gradient learning with a compatible LSTD critic.

The actor is the smoothed horizon policy pi_theta(s) from :mod:`smoothmpc.mpc`;
its exact theta-gradient makes the deterministic policy gradient computable
from data. The critic is the compatible linear action-value model

    Q_w(s, a) = psi(s, a)^T w + Phi(s)^T v,
    psi(s, a) = grad_theta pi(s) * (a - pi(s)),
    Phi(s)    = [(s - 0.5)^2, s, 1],

fitted by least-squares temporal differences over batches drawn from a single
continuing exploration trajectory. The policy gradient estimate is then the
batch mean of grad_theta pi (grad_theta pi)^T w, and the actor descends it
with norm clipping.

The smoothing parameter tau follows :class:`TauSchedule`, a linear decrease
to a floor: starting smooth spreads gradient information across states where
the sharp policy is flat, and the anneal recovers the sharp policy at the
end. A fixed-tau baseline is the degenerate schedule with zero decrement.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .battery import EnvParams, NoiseStream
from .dp import policy_performance
from .ipm import PrimalDualPoint
from .mpc import (
    MpcConfig,
    MpcRolloutPolicy,
    PolicyEvalError,
    build_nlp,
    default_options,
    evaluate,
    smoothness_profile,
)

__all__ = [
    "TauSchedule",
    "Batch",
    "CriticParams",
    "CriticFitError",
    "LearnerConfig",
    "LearningTrace",
    "features",
    "compatible_features",
    "lstd_fit",
    "policy_gradient",
    "actor_step",
    "run_learning",
]

log = logging.getLogger(__name__)

N_THETA = 2
N_PHI = 3


@dataclass(frozen=True)
class TauSchedule:
    """Linear decrease of the smoothing parameter to a positive floor.

    After k steps the value is max(tau_init - k * decrement, tau_floor).
    ``fixed(tau)`` gives the constant schedule used as a baseline.
    """

    tau_init: float = 1e-2
    decrement: float = 5e-5
    tau_floor: float = 1e-4

    def __post_init__(self):
        if not self.tau_init >= self.tau_floor > 0.0:
            raise ValueError(
                f"schedule needs tau_init >= tau_floor > 0, got "
                f"({self.tau_init}, {self.tau_floor})"
            )
        if self.decrement < 0.0:
            raise ValueError(f"decrement must be >= 0, got {self.decrement}")

    @classmethod
    def fixed(cls, tau: float) -> "TauSchedule":
        return cls(tau_init=tau, decrement=0.0, tau_floor=tau)

    def next(self, tau: float) -> float:
        """One schedule step applied to the current value."""
        return max(tau - self.decrement, self.tau_floor)

    def at(self, k) -> np.ndarray | float:
        """Value after k steps (vectorized over k)."""
        k = np.asarray(k)
        out = np.maximum(self.tau_init - k * self.decrement, self.tau_floor)
        return float(out) if out.ndim == 0 else out

    @property
    def floor_step(self) -> int:
        """First step index at which the floor is reached."""
        if self.decrement == 0.0 or self.tau_init == self.tau_floor:
            return 0
        return math.ceil((self.tau_init - self.tau_floor) / self.decrement)


def features(s) -> np.ndarray:
    """State features Phi(s) = [(s - 0.5)^2, s, 1], stacked on a last axis."""
    s = np.asarray(s, dtype=float)
    return np.stack([(s - 0.5) ** 2, s, np.ones_like(s)], axis=-1)


def compatible_features(grad_theta, a, pi_s) -> np.ndarray:
    """Advantage features psi = grad_theta pi(s) * (a - pi(s)).

    With these features the advantage part of Q_w is linear in the same
    gradient that drives the actor, so the critic's w feeds the policy
    gradient without bias.
    """
    grad_theta = np.asarray(grad_theta, dtype=float)
    offset = np.asarray(a, dtype=float) - np.asarray(pi_s, dtype=float)
    return grad_theta * offset[..., None]


@dataclass(frozen=True)
class Batch:
    """Transitions from one collection phase, in trajectory order.

    new_segment marks records that do not chain from their predecessor
    (first record of a collection, or a record following a skipped sample);
    within a segment s_next of one record equals s of the next.
    """

    s: np.ndarray
    a: np.ndarray
    cost: np.ndarray
    s_next: np.ndarray
    pi_s: np.ndarray
    grad_theta: np.ndarray
    new_segment: np.ndarray

    def __post_init__(self):
        n = self.s.shape[0]
        for name in ("a", "cost", "s_next", "pi_s", "new_segment"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
        if self.grad_theta.shape != (n, N_THETA):
            raise ValueError(
                f"grad_theta must have shape ({n}, {N_THETA}), "
                f"got {self.grad_theta.shape}"
            )

    def __len__(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class CriticParams:
    """Fitted critic weights: w for the advantage part, v for the state value."""

    w: np.ndarray
    v: np.ndarray
    residual: float

    @classmethod
    def zero(cls) -> "CriticParams":
        return cls(w=np.zeros(N_THETA), v=np.zeros(N_PHI), residual=0.0)

    def state_value(self, s) -> np.ndarray:
        return features(s) @ self.v

    def q_value(self, s, a, grad_theta, pi_s) -> np.ndarray:
        psi = compatible_features(grad_theta, a, pi_s)
        return psi @ self.w + self.state_value(s)


class CriticFitError(RuntimeError):
    """The LSTD system was singular or produced non-finite weights."""


def lstd_fit(batch: Batch, gamma: float, ridge: float = 1e-8) -> CriticParams:
    """Least-squares temporal-difference fit of the compatible critic.

    Solves (sum_k phi_k (phi_k - gamma phi'_k)^T + ridge I) x = sum_k phi_k c_k
    with phi = [psi; Phi(s)] and phi' = [0; Phi(s_next)]; the advantage
    features of the successor vanish because the next action is on-policy.
    The reported residual is the root-mean-square temporal-difference error
    of the fit on the batch.
    """
    if len(batch) < N_THETA + N_PHI:
        raise CriticFitError(
            f"batch of {len(batch)} cannot identify {N_THETA + N_PHI} weights"
        )
    if ridge < 0.0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    psi = compatible_features(batch.grad_theta, batch.a, batch.pi_s)
    phi = np.concatenate([psi, features(batch.s)], axis=1)
    phi_next = np.concatenate(
        [np.zeros((len(batch), N_THETA)), features(batch.s_next)], axis=1
    )
    A = phi.T @ (phi - gamma * phi_next) + ridge * np.eye(N_THETA + N_PHI)
    b = phi.T @ batch.cost
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise CriticFitError(f"singular LSTD system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise CriticFitError("LSTD solve produced non-finite weights")
    td = batch.cost + gamma * (phi_next @ x) - phi @ x
    return CriticParams(
        w=x[:N_THETA],
        v=x[N_THETA:],
        residual=float(np.sqrt(np.mean(td**2))),
    )


def policy_gradient(batch: Batch, w) -> np.ndarray:
    """Batch-mean deterministic policy gradient (1/M) sum g_k (g_k^T w)."""
    w = np.asarray(w, dtype=float)
    slope = batch.grad_theta @ w
    return batch.grad_theta.T @ slope / len(batch)


def actor_step(theta, gradient, lr: float, clip: float = np.inf):
    """Descend the gradient with norm clipping.

    Returns (new theta, pre-clip gradient norm). The clip rescales the
    gradient to the ceiling, so an oversized gradient moves theta by
    exactly lr * clip.
    """
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    norm = float(np.linalg.norm(g))
    if norm > clip:
        g = g * (clip / norm)
    return theta - lr * g, norm


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters of the learning loop.

    The defaults are calibrated for the battery task: theta_init sits where
    the sharp policy's tracking weights are visibly wrong (so the fixed-tau
    baseline exhibits its slow, erratic progress), while the default rate
    and exploration let the annealed run cross into the good-policy basin
    well inside the step budget.
    """

    theta_init: tuple = (6.0, 6.0)
    n_steps: int = 300
    batch_size: int = 200
    lr: float = 2e-2
    grad_clip: float = 10.0
    ridge: float = 1e-8
    explore_std: float = 0.3
    gamma: float = 0.99
    s_init: float = 0.5
    eval_every: int = 10
    eval_rollouts: int = 64
    eval_horizon: int = 1000
    snapshot_every: int = 25
    snapshot_points: int = 81
    fail_limit: int = 50
    solver_tol: float = 1e-8

    def __post_init__(self):
        if len(self.theta_init) != N_THETA:
            raise ValueError(f"theta_init must have length {N_THETA}")
        for name in ("n_steps", "batch_size", "eval_every", "eval_rollouts",
                     "eval_horizon", "snapshot_every", "snapshot_points",
                     "fail_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("lr", "grad_clip", "explore_std", "solver_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.ridge < 0.0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")


@dataclass
class LearningTrace:
    """Per-step learning record; row k is the state after k complete steps.

    J and J_se hold the most recent performance estimate (evaluated every
    eval_every steps and at the final step, carried forward in between) so
    every row is finite. Snapshots are policy sweeps u0(s) on a fixed grid
    taken every snapshot_every steps.
    """

    step: np.ndarray
    theta: np.ndarray
    tau: np.ndarray
    J: np.ndarray
    J_se: np.ndarray
    grad_norm: np.ndarray
    critic_residual: np.ndarray
    snapshot_steps: np.ndarray
    snapshot_s: np.ndarray
    snapshot_u0: np.ndarray
    snapshot_ok: np.ndarray
    seed: int
    aborted: bool = False
    abort_reason: str = ""
    wall_clock: float = 0.0

    @property
    def n_steps(self) -> int:
        return self.step.shape[0] - 1


class _Collector:
    """Single continuing exploration trajectory shared across batches."""

    def __init__(self, nlp, mpc_cfg, env, lcfg, env_rng, explore_rng):
        self.nlp = nlp
        self.cfg = mpc_cfg
        self.env = env
        self.lcfg = lcfg
        self.env_rng = env_rng
        self.explore_rng = explore_rng
        self.s = float(lcfg.s_init)
        self.warm: Optional[PrimalDualPoint] = None
        self.chained = False  # next record continues the recorded chain
        self.failures = 0

    def collect(self, theta, tau: float) -> Batch:
        lcfg = self.lcfg
        opts = default_options(tau, tol=lcfg.solver_tol)
        m = lcfg.batch_size
        s = np.empty(m)
        a = np.empty(m)
        cost = np.empty(m)
        s_next = np.empty(m)
        pi_s = np.empty(m)
        grad = np.empty((m, N_THETA))
        new_segment = np.zeros(m, dtype=bool)
        k = 0
        while k < m:
            try:
                ev = evaluate(self.nlp, self.cfg, self.s, theta, tau,
                              warm=self.warm, opts=opts)
            except PolicyEvalError as exc:
                self.failures += 1
                log.warning("skipping sample at s=%.6f: %s", self.s, exc)
                if self.failures > lcfg.fail_limit:
                    raise
                # advance the real system with a zero action and restart the chain
                delta = self.env_rng.normal(self.env.noise_mean, self.env.noise_std)
                self.s = float(self.env.step(self.s, 0.0, delta))
                self.chained = False
                self.warm = None
                continue
            self.warm = ev.point
            noise = self.explore_rng.normal(0.0, lcfg.explore_std)
            act = float(np.clip(ev.u0 + noise, -self.env.u_max, self.env.u_max))
            delta = self.env_rng.normal(self.env.noise_mean, self.env.noise_std)
            nxt = float(self.env.step(self.s, act, delta))
            s[k] = self.s
            a[k] = act
            cost[k] = self.env.rl_stage_cost(self.s, act)
            s_next[k] = nxt
            pi_s[k] = ev.u0
            grad[k] = ev.grad_theta
            new_segment[k] = not self.chained
            self.s = nxt
            self.chained = True
            k += 1
        return Batch(s=s, a=a, cost=cost, s_next=s_next, pi_s=pi_s,
                     grad_theta=grad, new_segment=new_segment)


def run_learning(
    env: EnvParams,
    mpc_cfg: MpcConfig,
    schedule: TauSchedule,
    lcfg: LearnerConfig,
    seed: int,
    progress: Optional[Callable[[int, np.ndarray, float], None]] = None,
) -> LearningTrace:
    """Run the full actor-critic loop and return its trace.

    Each step collects a batch from the continuing exploration trajectory at
    the current (theta, tau), refits the critic from scratch (kept from the
    previous step if the fit fails), takes one clipped gradient step, and
    advances the schedule. Performance J of the exploration-free policy is
    measured every eval_every steps and at the end. All randomness derives
    from `seed`; identical (config, seed) reruns produce identical traces.
    """
    t_start = time.perf_counter()
    root = np.random.SeedSequence(seed)
    env_ss, explore_ss, eval_ss = root.spawn(3)
    env_rng = np.random.Generator(np.random.PCG64(env_ss))
    explore_rng = np.random.Generator(np.random.PCG64(explore_ss))

    nlp = build_nlp(mpc_cfg)
    collector = _Collector(nlp, mpc_cfg, env, lcfg, env_rng, explore_rng)

    n = lcfg.n_steps
    theta_log = np.empty((n + 1, N_THETA))
    tau_log = np.empty(n + 1)
    J_log = np.empty(n + 1)
    J_se_log = np.empty(n + 1)
    grad_log = np.zeros(n + 1)
    resid_log = np.zeros(n + 1)

    snap_grid = np.linspace(0.0, 1.0, lcfg.snapshot_points)
    snap_steps, snap_u0, snap_ok = [], [], []

    def eval_J(theta, tau):
        policy = MpcRolloutPolicy(mpc_cfg, theta, tau, tol=lcfg.solver_tol)
        return policy_performance(
            policy, env, gamma=lcfg.gamma, n_rollouts=lcfg.eval_rollouts,
            horizon=lcfg.eval_horizon, seed=eval_ss.spawn(1)[0],
        )

    def snapshot(step, theta, tau):
        prof = smoothness_profile(nlp, mpc_cfg, theta, tau, snap_grid,
                                  opts=default_options(tau, tol=lcfg.solver_tol))
        snap_steps.append(step)
        snap_u0.append(prof.u0)
        snap_ok.append(prof.ok)

    theta = np.asarray(lcfg.theta_init, dtype=float)
    tau = schedule.tau_init
    critic = CriticParams.zero()

    theta_log[0] = theta
    tau_log[0] = tau
    J_log[0], J_se_log[0] = eval_J(theta, tau)
    snapshot(0, theta, tau)

    aborted = False
    reason = ""
    k = 0
    for k in range(1, n + 1):
        try:
            batch = collector.collect(theta, tau)
        except PolicyEvalError as exc:
            aborted = True
            reason = f"policy evaluation failures exceeded {lcfg.fail_limit}: {exc}"
            k -= 1
            break
        try:
            critic = lstd_fit(batch, lcfg.gamma, lcfg.ridge)
        except CriticFitError as exc:
            collector.failures += 1
            log.warning("step %d: keeping previous critic: %s", k, exc)
            if collector.failures > lcfg.fail_limit:
                aborted = True
                reason = f"critic-fit failures exceeded {lcfg.fail_limit}: {exc}"
                k -= 1
                break
        g = policy_gradient(batch, critic.w)
        theta, grad_log[k] = actor_step(theta, g, lcfg.lr, lcfg.grad_clip)
        # closed form rather than iterated next(): no float drift, so the
        # floor is reached exactly at the schedule's computable floor_step
        tau = float(schedule.at(k))

        theta_log[k] = theta
        tau_log[k] = tau
        resid_log[k] = critic.residual
        if k % lcfg.eval_every == 0 or k == n:
            J_log[k], J_se_log[k] = eval_J(theta, tau)
        else:
            J_log[k], J_se_log[k] = J_log[k - 1], J_se_log[k - 1]
        if k % lcfg.snapshot_every == 0 or k == n:
            snapshot(k, theta, tau)
        if progress is not None:
            progress(k, theta, float(J_log[k]))

    rows = k + 1
    return LearningTrace(
        step=np.arange(rows),
        theta=theta_log[:rows],
        tau=tau_log[:rows],
        J=J_log[:rows],
        J_se=J_se_log[:rows],
        grad_norm=grad_log[:rows],
        critic_residual=resid_log[:rows],
        snapshot_steps=np.asarray(snap_steps, dtype=int),
        snapshot_s=snap_grid,
        snapshot_u0=np.asarray(snap_u0),
        snapshot_ok=np.asarray(snap_ok, dtype=bool),
        seed=seed,
        aborted=aborted,
        abort_reason=reason,
        wall_clock=time.perf_counter() - t_start,
    )
