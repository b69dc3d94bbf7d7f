"""Receding-horizon battery policy as a smoothed parametric NLP.

The policy solves, at every state s, a deterministic horizon-N program over
charge trajectory x, power split u+ / u- and band slacks sigma:

    min   theta2^2 (x_N - x_ref)^2 + w_f sigma_N
          + sum_i gamma^i [ phi_b u+_i - phi_s u-_i
                            + c theta1^2 (x_i - x_ref)^2 + w sigma_i ]
    s.t.  x_0 = s,   x_{i+1} = x_i + alpha (u+_i - u-_i)
          x_i - 1 <= sigma_i,   -x_i <= sigma_i,   sigma_i >= 0
          0 <= u+_i <= u_max,   0 <= u-_i <= u_max

The split u_i = u+_i - u-_i encodes the piecewise-linear buy/sell price
exactly: since phi_b >= phi_s, at any optimum at most one side of the split
is active (up to the barrier smoothing). Only the two tracking weights
theta = (theta1, theta2) are learned; squaring keeps them sign-free.

Solving the tau-relaxed KKT system makes the state-to-action map
pi(s) = u+_0 - u-_0 smooth in both s and theta, and its exact gradient
d pi / d theta falls out of one implicit-function solve at the optimum.
Large tau gives a heavily smoothed, informative policy; small tau
approaches the nearly bang-bang exact policy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import ipm
from .ipm import NlpSpec, PrimalDualPoint, SolveOptions, SolveReport

__all__ = [
    "MpcConfig",
    "PolicyEval",
    "PolicyEvalError",
    "ProfileResult",
    "build_nlp",
    "evaluate",
    "smoothness_profile",
    "MpcRolloutPolicy",
]

log = logging.getLogger(__name__)


class PolicyEvalError(RuntimeError):
    """Policy evaluation failed after a cold-start retry."""


@dataclass(frozen=True)
class MpcConfig:
    """Structure of the horizon program (everything except theta).

    alpha_model is the internal deterministic charge gain; it usually equals
    the plant's alpha but is a separate knob on purpose. phi_buy/phi_sell
    must price buying at or above selling for the split to be exact.
    """

    horizon: int = 10
    discount: float = 0.99
    x_ref: float = 0.5
    c_stage: float = 0.1
    slack_weight: float = 10.0
    terminal_slack_weight: float = 10.0
    u_bound: float = 1.0
    alpha_model: float = 1.0 / 12.0
    phi_buy: float = 5.0
    phi_sell: float = 2.5

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not 0 < self.discount <= 1:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        if self.u_bound <= 0 or self.alpha_model <= 0:
            raise ValueError("u_bound and alpha_model must be positive")
        if self.c_stage < 0 or self.slack_weight < 0 or self.terminal_slack_weight < 0:
            raise ValueError("cost weights must be >= 0")
        if not (self.phi_buy >= self.phi_sell >= 0):
            raise ValueError("prices must satisfy phi_buy >= phi_sell >= 0")
        if not np.isfinite(self.x_ref):
            raise ValueError("x_ref must be finite")


@dataclass
class PolicyEval:
    """One policy evaluation: action, exact theta-gradient, solver state."""

    u0: float
    grad_theta: np.ndarray
    point: PrimalDualPoint
    report: SolveReport


@dataclass
class ProfileResult:
    """Policy sweep over a state grid with per-point success flags."""

    s: np.ndarray
    u0: np.ndarray
    grad_theta: np.ndarray
    ok: np.ndarray


def _layout(cfg: MpcConfig):
    """Index slices of the decision vector [x, u+, u-, sigma]."""
    N = cfg.horizon
    ix = slice(0, N + 1)
    iup = slice(N + 1, 2 * N + 1)
    ium = slice(2 * N + 1, 3 * N + 1)
    isg = slice(3 * N + 1, 4 * N + 2)
    return N, ix, iup, ium, isg


def build_nlp(cfg: MpcConfig) -> NlpSpec:
    """Assemble the horizon program as a parametric NlpSpec.

    The returned spec is parametric in theta = (theta1, theta2); constraints
    are affine and independent of theta, so only the stationarity block of
    dr/dtheta is nonzero. All evaluators broadcast over a leading batch axis.
    """
    N, ix, iup, ium, isg = _layout(cfg)
    n_z = 4 * N + 2
    n_g = N + 1
    n_h = 3 * (N + 1) + 4 * N
    gam = cfg.discount ** np.arange(N + 1)

    # equalities: x_0 - s, then x_{i+1} - x_i - alpha (u+_i - u-_i)
    Ag = np.zeros((n_g, n_z))
    Ag[0, 0] = 1.0
    for i in range(N):
        Ag[i + 1, i + 1] = 1.0
        Ag[i + 1, i] = -1.0
        Ag[i + 1, iup.start + i] = -cfg.alpha_model
        Ag[i + 1, ium.start + i] = cfg.alpha_model

    # inequalities: per stage [x_i - 1 - sg_i, -x_i - sg_i, -sg_i],
    # then per input stage [-u+_i, u+_i - U, -u-_i, u-_i - U]
    Ah = np.zeros((n_h, n_z))
    ch = np.zeros(n_h)
    for i in range(N + 1):
        r = 3 * i
        Ah[r, i] = 1.0
        Ah[r, isg.start + i] = -1.0
        ch[r] = 1.0
        Ah[r + 1, i] = -1.0
        Ah[r + 1, isg.start + i] = -1.0
        Ah[r + 2, isg.start + i] = -1.0
    base = 3 * (N + 1)
    for i in range(N):
        r = base + 4 * i
        Ah[r, iup.start + i] = -1.0
        Ah[r + 1, iup.start + i] = 1.0
        ch[r + 1] = cfg.u_bound
        Ah[r + 2, ium.start + i] = -1.0
        Ah[r + 3, ium.start + i] = 1.0
        ch[r + 3] = cfg.u_bound

    # cost: sum w2(theta) (z - ref)^2 + w1 . z  with diagonal curvature
    ref = np.zeros(n_z)
    ref[ix] = cfg.x_ref
    w1 = np.zeros(n_z)
    w1[iup] = gam[:N] * cfg.phi_buy
    w1[ium] = -gam[:N] * cfg.phi_sell
    w1[isg] = gam * cfg.slack_weight
    w1[isg.stop - 1] = cfg.terminal_slack_weight

    def w2(theta):
        w = np.zeros(n_z)
        w[:N] = gam[:N] * cfg.c_stage * theta[0] ** 2
        w[N] = theta[1] ** 2
        return w

    def dw2(theta):
        d = np.zeros((n_z, 2))
        d[:N, 0] = gam[:N] * cfg.c_stage * 2.0 * theta[0]
        d[N, 1] = 2.0 * theta[1]
        return d

    def cost(z, theta):
        return np.sum(w2(theta) * (z - ref) ** 2, axis=-1) + z @ w1

    def cost_grad(z, theta):
        return 2.0 * w2(theta) * (z - ref) + w1

    def eq(z, s, theta):
        g = z @ Ag.T
        g = g.copy()
        g[..., 0] -= s[..., 0]
        return g

    def stat_jac_theta(z, lam, mu, s, theta):
        return 2.0 * dw2(theta) * (z - ref)[..., :, None]

    u_pad = min(0.1, 0.5 * cfg.u_bound)

    def init_primal(s, theta):
        z = np.zeros(s.shape[:-1] + (n_z,))
        z[..., ix] = s
        z[..., iup] = u_pad
        z[..., ium] = u_pad
        sig = np.maximum(np.maximum(s - 1.0, -s), 0.0) + 0.1
        z[..., isg] = sig
        return z

    return NlpSpec(
        n_z=n_z,
        n_g=n_g,
        n_h=n_h,
        n_theta=2,
        n_s=1,
        cost=cost,
        cost_grad=cost_grad,
        eq=eq,
        eq_jac=lambda z, s, theta: Ag,
        ineq=lambda z, theta: z @ Ah.T - ch,
        ineq_jac=lambda z, theta: Ah,
        lag_hess=lambda z, lam, mu, s, theta: np.diag(2.0 * w2(theta)),
        init_primal=init_primal,
        stat_jac_theta=stat_jac_theta,
        eq_jac_state=lambda z, s, theta: -np.eye(n_g, 1),
        kkt_sparsity="arrow: diagonal Hessian, banded dynamics, row-sparse bounds",
    )


def _u0_rows(cfg: MpcConfig):
    N = cfg.horizon
    return N + 1, 2 * N + 1  # u+_0 and u-_0 positions in z


def default_options(tau: float, tol: float = 1e-8) -> SolveOptions:
    return SolveOptions(tau=tau, tol=tol)


def evaluate(
    nlp: NlpSpec,
    cfg: MpcConfig,
    s: float,
    theta,
    tau: float,
    warm: Optional[PrimalDualPoint] = None,
    opts: Optional[SolveOptions] = None,
) -> PolicyEval:
    """Smoothed policy action pi(s) = u+_0 - u-_0 plus its exact theta-gradient.

    Non-convergence from a warm start triggers one cold-start retry; failing
    that, PolicyEvalError is raised. The returned point is strictly interior,
    so the action always satisfies |u0| < u_bound.
    """
    if opts is None:
        opts = default_options(tau)
    elif opts.tau != tau:
        opts = replace(opts, tau=tau)
    point, report = ipm.solve(nlp, [s], theta, opts, warm=warm)
    if not report.converged and warm is not None:
        point, report = ipm.solve(nlp, [s], theta, opts, warm=None)
    if not report.converged:
        raise PolicyEvalError(
            f"policy solve failed at s={s!r}, tau={tau!r} "
            f"(residual {report.residual:.3e} after {report.iterations} iterations)"
        )
    iu, im = _u0_rows(cfg)
    dy = ipm.sensitivity(nlp, point, [s], theta, tau, wrt="theta")
    grad = dy[iu] - dy[im]
    u0 = float(point.z[iu] - point.z[im])
    return PolicyEval(u0=u0, grad_theta=grad, point=point, report=report)


def smoothness_profile(
    nlp: NlpSpec,
    cfg: MpcConfig,
    theta,
    tau: float,
    s_grid,
    opts: Optional[SolveOptions] = None,
) -> ProfileResult:
    """Sweep the policy and its gradient over a state grid with warm chaining.

    Per-point evaluation errors are recorded in the ok mask (with NaN rows)
    instead of aborting the sweep.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    n = s_grid.size
    u0 = np.full(n, np.nan)
    grad = np.full((n, 2), np.nan)
    ok = np.zeros(n, dtype=bool)
    warm = None
    for k, s in enumerate(s_grid):
        try:
            ev = evaluate(nlp, cfg, float(s), theta, tau, warm=warm, opts=opts)
        except (PolicyEvalError, ipm.NumericalError, ipm.SolverError) as exc:
            log.warning("profile point s=%.6f failed: %s", s, exc)
            warm = None
            continue
        u0[k] = ev.u0
        grad[k] = ev.grad_theta
        ok[k] = True
        warm = ev.point
    return ProfileResult(s=s_grid.copy(), u0=u0, grad_theta=grad, ok=ok)


class MpcRolloutPolicy:
    """Vectorized exploration-free policy map for closed-loop rollouts.

    Keeps one warm-start point per rollout lane and solves all lanes in
    lockstep. Lanes whose warm solve fails are retried cold; a lane failing
    both ways raises PolicyEvalError.
    """

    def __init__(self, cfg: MpcConfig, theta, tau: float, tol: float = 1e-8):
        self.cfg = cfg
        self.nlp = build_nlp(cfg)
        self.theta = np.asarray(theta, dtype=float)
        self.opts = SolveOptions(tau=tau, tol=tol)
        self._warm = None
        self._iu, self._im = _u0_rows(cfg)

    def reset(self):
        self._warm = None

    def __call__(self, s_batch) -> np.ndarray:
        s_batch = np.asarray(s_batch, dtype=float).reshape(-1)
        Y, rep = ipm.solve_many(self.nlp, s_batch, self.theta, self.opts, warm=self._warm)
        if not np.all(rep.converged):
            bad = np.flatnonzero(~rep.converged)
            Yb, rb = ipm.solve_many(self.nlp, s_batch[bad], self.theta, self.opts, warm=None)
            if not np.all(rb.converged):
                worst = bad[np.argmax(rb.residual)]
                raise PolicyEvalError(
                    f"rollout policy solve failed at s={s_batch[worst]!r} "
                    f"(residual {float(np.max(rb.residual)):.3e})"
                )
            Y = Y.copy()
            Y[bad] = Yb
        self._warm = Y
        return Y[:, self._iu] - Y[:, self._im]
