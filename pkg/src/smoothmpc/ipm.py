"""Primal-dual interior-point kernel with exact parametric sensitivities.

Solves smooth parametric NLPs

    min_z  psi(z, theta)
    s.t.   g(z, s, theta)  = 0
           h(z, theta)    <= 0

by Newton's method on the tau-relaxed KKT residual

    r(y) = [ grad_z L(z, lam, mu) ; g(z) ; mu * h(z) + tau ],   y = (z, lam, mu)

with L = psi + lam' g + mu' h. The relaxation tau > 0 is held fixed for the
whole solve; continuation over tau belongs to the caller, because the
smoothed solution map at a given tau (not its tau -> 0 limit) is the object
of interest. The relaxed solution differs from the exact optimizer by O(tau)
and depends smoothly on (s, theta); the implicit-function derivative

    dy/dtheta = -(dr/dy)^{-1} dr/dtheta

is exact up to the solver tolerance.

Each Newton step eliminates the complementarity block and factors the
condensed symmetric system in (dz, dlam); a fraction-to-boundary rule and a
residual-norm backtracking line search keep every accepted iterate strictly
interior (mu > 0, h < 0). Evaluator callables must broadcast over a leading
batch axis, which lets `solve_many` run independent problem instances in
lockstep; that batching is what makes long closed-loop policy rollouts
affordable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "NlpSpec",
    "PrimalDualPoint",
    "SolveOptions",
    "SolveReport",
    "BatchSolveReport",
    "NumericalError",
    "SolverError",
    "SensitivityError",
    "kkt_residual",
    "kkt_jacobian",
    "solve",
    "solve_many",
    "sensitivity",
]


class NumericalError(RuntimeError):
    """An evaluator returned non-finite values; names the offending block."""


class SolverError(RuntimeError):
    """The Newton iteration failed (singular system beyond regularization,
    exhausted line search, or no convergence within the iteration budget)."""


class SensitivityError(RuntimeError):
    """The KKT Jacobian at the solution is singular; carries a condition
    estimate when one could be computed."""

    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


@dataclass(frozen=True)
class NlpSpec:
    """Callable description of one parametric NLP family.

    All evaluators take points with an optional leading batch axis and must
    broadcast over it: z has shape (..., n_z), s has shape (..., n_s) and
    theta is a shared (n_theta,) vector. Jacobians that are constant in z
    may be returned unbatched, e.g. eq_jac as (n_g, n_z); the kernel
    broadcasts them. Problems without equality constraints set n_g = 0 and
    may leave eq / eq_jac as None.

    ``init_primal`` must return a primal point that is strictly interior in
    the inequalities (h(z0) < 0 elementwise); the kernel completes it with
    lam = 0 and mu = tau / (-h(z0)), which zeroes the complementarity block
    of the initial residual.

    The ``*_jac_theta`` and ``*_jac_state`` evaluators supply the blocks of
    dr/dtheta and dr/ds used by the sensitivity op; None means identically
    zero. ``kkt_sparsity`` may hold a block-structure descriptor of the KKT
    matrix; it is retained for a future sparse linear algebra path and is
    not consulted by the dense solver.
    """

    n_z: int
    n_g: int
    n_h: int
    n_theta: int
    n_s: int
    cost: Callable
    cost_grad: Callable
    ineq: Callable
    ineq_jac: Callable
    lag_hess: Callable
    init_primal: Callable
    eq: Optional[Callable] = None
    eq_jac: Optional[Callable] = None
    stat_jac_theta: Optional[Callable] = None
    eq_jac_theta: Optional[Callable] = None
    ineq_jac_theta: Optional[Callable] = None
    stat_jac_state: Optional[Callable] = None
    eq_jac_state: Optional[Callable] = None
    ineq_jac_state: Optional[Callable] = None
    kkt_sparsity: Optional[object] = None

    def __post_init__(self):
        for name in ("n_z", "n_g", "n_h", "n_theta", "n_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_z == 0:
            raise ValueError("n_z must be positive")
        if self.n_h == 0:
            raise ValueError("the relaxed KKT system needs n_h >= 1")
        if self.n_g > 0 and (self.eq is None or self.eq_jac is None):
            raise ValueError("n_g > 0 requires eq and eq_jac evaluators")

    @property
    def n_y(self) -> int:
        return self.n_z + self.n_g + self.n_h


@dataclass
class PrimalDualPoint:
    """One primal-dual point y = (z, lam, mu)."""

    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    def stack(self) -> np.ndarray:
        return np.concatenate([self.z, self.lam, self.mu])

    @staticmethod
    def from_stack(y: np.ndarray, nlp: NlpSpec) -> "PrimalDualPoint":
        y = np.asarray(y, dtype=float)
        if y.shape != (nlp.n_y,):
            raise ValueError(f"expected y of shape ({nlp.n_y},), got {y.shape}")
        nz, ng = nlp.n_z, nlp.n_g
        return PrimalDualPoint(y[:nz].copy(), y[nz:nz + ng].copy(), y[nz + ng:].copy())


@dataclass(frozen=True)
class SolveOptions:
    """Newton solve controls.

    tau is the fixed relaxation level; tol the residual inf-norm target;
    boundary_frac the fraction-to-boundary factor; reg_init/reg_max bound
    the x10 diagonal regularization escalation tried on factorization
    failure; max_halvings caps the backtracking line search.
    """

    tau: float
    tol: float = 1e-8
    max_iter: int = 100
    boundary_frac: float = 0.995
    reg_init: float = 1e-9
    reg_max: float = 1e-3
    max_halvings: int = 30
    track_iterates: bool = False

    def __post_init__(self):
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.boundary_frac < 1:
            raise ValueError("boundary_frac must lie in (0, 1)")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise ValueError("max_iter must be >= 1 and max_halvings >= 0")


@dataclass
class SolveReport:
    converged: bool
    residual: float
    iterations: int
    used_warm_start: bool
    reg_used: float = 0.0
    iterates: Optional[list] = None


@dataclass
class BatchSolveReport:
    converged: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    used_warm_start: bool
    reg_used: float = 0.0
    iterates: Optional[list] = None


# ---------------------------------------------------------------------------
# residual and jacobian assembly


def _check_theta(nlp, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (nlp.n_theta,):
        raise ValueError(
            f"expected theta of shape ({nlp.n_theta},), got {theta.shape}"
        )
    return theta


def _check_state(nlp, s):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape[-1] != nlp.n_s and not (nlp.n_s == 0 and s.size == 0):
        raise ValueError(f"expected state of width {nlp.n_s}, got shape {s.shape}")
    return s


def _tmul(M, v):
    """M' v for M of shape (m, n) or (B, m, n) and v of shape (B, m)."""
    if M.ndim == 2:
        return v @ M
    return np.einsum("bmn,bm->bn", M, v)


def _mul(M, v):
    """M v for M of shape (m, n) or (B, m, n) and v of shape (B, n)."""
    if M.ndim == 2:
        return v @ M.T
    return np.einsum("bmn,bn->bm", M, v)


def _eval_blocks(nlp, z, lam, mu, s, theta, tau):
    """Residual blocks r1, r2, r3 plus the raw h values, batched."""
    B = z.shape[0]
    gpsi = np.asarray(nlp.cost_grad(z, theta), dtype=float)
    gpsi = np.broadcast_to(gpsi, (B, nlp.n_z))
    h = np.asarray(nlp.ineq(z, theta), dtype=float)
    h = np.broadcast_to(h, (B, nlp.n_h))
    Hz = np.asarray(nlp.ineq_jac(z, theta), dtype=float)
    r1 = gpsi + _tmul(Hz, mu)
    if nlp.n_g:
        g = np.asarray(nlp.eq(z, s, theta), dtype=float)
        g = np.broadcast_to(g, (B, nlp.n_g))
        Gz = np.asarray(nlp.eq_jac(z, s, theta), dtype=float)
        r1 = r1 + _tmul(Gz, lam)
        r2 = g
    else:
        Gz = np.zeros((nlp.n_g, nlp.n_z))
        r2 = np.zeros((B, 0))
    r3 = mu * h + tau
    return r1, r2, r3, h, Gz, Hz


def kkt_residual(nlp: NlpSpec, y, s, theta, tau) -> np.ndarray:
    """Relaxed KKT residual r(y, s, theta; tau) as one stacked vector.

    Accepts tau >= 0: tau = 0 evaluates the exact KKT conditions, which is
    useful for checking unrelaxed optima even though `solve` requires a
    strictly positive tau. Raises NumericalError naming the offending block
    if any evaluator returns non-finite values.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    theta = _check_theta(nlp, theta)
    s = _check_state(nlp, s)
    pt = y if isinstance(y, PrimalDualPoint) else PrimalDualPoint.from_stack(y, nlp)
    z = pt.z[None, :]
    lam = pt.lam[None, :]
    mu = pt.mu[None, :]
    r1, r2, r3, _, _, _ = _eval_blocks(nlp, z, lam, mu, s[None, :], theta, tau)
    for name, block in (("stationarity", r1), ("equality", r2), ("complementarity", r3)):
        if not np.all(np.isfinite(block)):
            raise NumericalError(f"non-finite values in the {name} block")
    return np.concatenate([r1[0], r2[0], r3[0]])


def kkt_jacobian(nlp: NlpSpec, y, s, theta) -> np.ndarray:
    """Full Jacobian dr/dy of the relaxed residual (tau-independent)."""
    theta = _check_theta(nlp, theta)
    s = _check_state(nlp, s)
    pt = y if isinstance(y, PrimalDualPoint) else PrimalDualPoint.from_stack(y, nlp)
    nz, ng, nh = nlp.n_z, nlp.n_g, nlp.n_h
    zb = pt.z[None, :]
    W = np.asarray(nlp.lag_hess(zb, pt.lam[None, :], pt.mu[None, :], s[None, :], theta), dtype=float)
    W = W[0] if W.ndim == 3 else W
    h = np.asarray(nlp.ineq(zb, theta), dtype=float).reshape(nh)
    Hz = np.asarray(nlp.ineq_jac(zb, theta), dtype=float)
    Hz = Hz[0] if Hz.ndim == 3 else Hz
    J = np.zeros((nlp.n_y, nlp.n_y))
    J[:nz, :nz] = W
    J[:nz, nz + ng:] = Hz.T
    J[nz + ng:, :nz] = pt.mu[:, None] * Hz
    J[nz + ng:, nz + ng:] = np.diag(h)
    if ng:
        Gz = np.asarray(nlp.eq_jac(zb, s[None, :], theta), dtype=float)
        Gz = Gz[0] if Gz.ndim == 3 else Gz
        J[:nz, nz:nz + ng] = Gz.T
        J[nz:nz + ng, :nz] = Gz
    if not np.all(np.isfinite(J)):
        raise NumericalError("non-finite values in the KKT Jacobian")
    return J


def _param_jac(nlp: NlpSpec, pt: PrimalDualPoint, s, theta, wrt: str) -> np.ndarray:
    """dr/dtheta or dr/ds, assembled from the optional block evaluators."""
    if wrt == "theta":
        width = nlp.n_theta
        stat, eqj, inj = nlp.stat_jac_theta, nlp.eq_jac_theta, nlp.ineq_jac_theta
    elif wrt == "state":
        width = nlp.n_s
        stat, eqj, inj = nlp.stat_jac_state, nlp.eq_jac_state, nlp.ineq_jac_state
    else:
        raise ValueError(f"wrt must be 'theta' or 'state', got {wrt!r}")
    R = np.zeros((nlp.n_y, width))
    zb = pt.z[None, :]
    sb = s[None, :]
    if stat is not None:
        blk = np.asarray(stat(zb, pt.lam[None, :], pt.mu[None, :], sb, theta), dtype=float)
        R[:nlp.n_z] = blk.reshape(nlp.n_z, width)
    if eqj is not None and nlp.n_g:
        blk = np.asarray(eqj(zb, sb, theta), dtype=float)
        R[nlp.n_z:nlp.n_z + nlp.n_g] = blk.reshape(nlp.n_g, width)
    if inj is not None:
        blk = np.asarray(inj(zb, theta), dtype=float).reshape(nlp.n_h, width)
        R[nlp.n_z + nlp.n_g:] = pt.mu[:, None] * blk
    return R


def sensitivity(nlp: NlpSpec, y, s, theta, tau, wrt: str = "theta") -> np.ndarray:
    """Implicit-function sensitivity of the solved point y w.r.t. theta or s.

    Evaluates dy/dp = -(dr/dy)^{-1} dr/dp at the supplied solution point.
    The result is exact for the tau-relaxed solution map up to the residual
    tolerance of the solve that produced y. Raises SensitivityError (with a
    condition estimate) if the KKT Jacobian is singular.
    """
    theta = _check_theta(nlp, theta)
    s = _check_state(nlp, s)
    pt = y if isinstance(y, PrimalDualPoint) else PrimalDualPoint.from_stack(y, nlp)
    J = kkt_jacobian(nlp, pt, s, theta)
    R = _param_jac(nlp, pt, s, theta, wrt)
    try:
        dy = np.linalg.solve(J, -R)
    except np.linalg.LinAlgError as exc:
        try:
            cond = float(np.linalg.cond(J))
        except np.linalg.LinAlgError:
            cond = np.inf
        raise SensitivityError(
            f"singular KKT Jacobian in sensitivity solve (cond ~ {cond:.3e})",
            condition=cond,
        ) from exc
    if not np.all(np.isfinite(dy)):
        cond = float(np.linalg.cond(J))
        raise SensitivityError(
            f"non-finite sensitivity, ill-conditioned KKT Jacobian (cond ~ {cond:.3e})",
            condition=cond,
        )
    return dy


# ---------------------------------------------------------------------------
# Newton iteration


class _StepWorkspace:
    """Reusable buffers for the condensed Newton systems of one solve call.

    The condensed matrix is reassembled every iteration, but its equality
    blocks are constant whenever the equality Jacobian is, and the large
    temporaries have a fixed shape per active-set size; reusing them removes
    most of the per-iteration allocation cost. Buffers are sized for the
    most recent batch size and reallocated when it changes.
    """

    def __init__(self):
        self.size = -1
        self.K = None
        self.rhs = None
        self.scaled = None
        self.S = None

    def ensure(self, m: int, nz: int, ng: int, nh: int) -> bool:
        """Size the buffers for m instances; True when freshly allocated."""
        if m == self.size:
            return False
        n = nz + ng
        self.size = m
        self.K = np.zeros((m, n, n))
        self.rhs = np.empty((m, n, 1))
        self.scaled = np.empty((m, nh, nz))
        self.S = np.empty((m, nz, nz))
        return True


def _condensed_step(W, Gz, Hz, h, mu, r1, r2, r3, delta, ws=None):
    """Newton step on the full system via complementarity-block elimination.

    Solves the (n_z + n_g) condensed system per batch instance and recovers
    dmu. delta is a per-instance diagonal regularization added to the z
    block. Returns (dz, dlam, dmu); rows of non-finite output flag the
    instances whose factorization failed.
    """
    B, nz = r1.shape
    ng = r2.shape[1]
    nh = h.shape[1]
    n = nz + ng
    if ws is None:
        ws = _StepWorkspace()
    fresh = ws.ensure(B, nz, ng, nh)
    w = mu / (-h)
    Hzb = np.broadcast_to(Hz, (B, nh, nz)) if Hz.ndim == 2 else Hz
    np.multiply(Hzb, w[:, :, None], out=ws.scaled)
    S = ws.S
    np.matmul(np.swapaxes(Hzb, -1, -2), ws.scaled, out=S)
    S += W if W.ndim == 3 else W[None, :, :]
    idx = np.arange(nz)
    S[:, idx, idx] += delta[:, None]
    K = ws.K
    K[:, :nz, :nz] = S
    rhs = ws.rhs
    rhs[:, :nz, 0] = -r1 - _tmul(Hz, r3 / (-h))
    if ng:
        if Gz.ndim == 3:
            K[:, :nz, nz:] = np.swapaxes(Gz, -1, -2)
            K[:, nz:, :nz] = Gz
        elif fresh:
            K[:, :nz, nz:] = Gz.T
            K[:, nz:, :nz] = Gz
        rhs[:, nz:, 0] = -r2
    try:
        sol = np.linalg.solve(K, rhs)[:, :, 0]
    except np.linalg.LinAlgError:
        sol = np.full((B, n), np.nan)
        for i in range(B):
            try:
                sol[i] = np.linalg.solve(K[i], rhs[i, :, 0])
            except np.linalg.LinAlgError:
                pass
    dz = sol[:, :nz]
    dlam = sol[:, nz:]
    dmu = -(r3 + mu * _mul(Hz, dz)) / h
    return dz, dlam, dmu


def _solve_batch(nlp, s, theta, opts, z0, lam0, mu0, warm_flag):
    """Shared Newton driver over a batch of independent instances."""
    B = z0.shape[0]
    z, lam, mu = z0.copy(), lam0.copy(), mu0.copy()
    converged = np.zeros(B, dtype=bool)
    failed = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    resid = np.full(B, np.inf)
    reg_used = 0.0
    history = [] if opts.track_iterates else None

    r1, r2, r3, h, Gz, Hz = _eval_blocks(nlp, z, lam, mu, s, theta, opts.tau)
    if not (np.all(np.isfinite(r1)) and np.all(np.isfinite(r2)) and np.all(np.isfinite(r3))):
        raise NumericalError("non-finite residual at the initial point")
    if np.any(h >= 0) or np.any(mu <= 0):
        raise SolverError("initial point is not strictly interior (needs h < 0 and mu > 0)")
    if history is not None:
        history.append(np.concatenate([z, lam, mu], axis=1).copy())
    ws = _StepWorkspace()

    for _ in range(opts.max_iter):
        rn = np.maximum(
            np.max(np.abs(r1), axis=1),
            np.maximum(
                np.max(np.abs(r2), axis=1, initial=0.0),
                np.max(np.abs(r3), axis=1),
            ),
        )
        resid = np.where(~failed, rn, resid)
        converged = converged | ((rn <= opts.tol) & ~failed)
        active = ~(converged | failed)
        if not np.any(active):
            break
        ai = np.flatnonzero(active)
        if ai.size == z.shape[0]:
            za, la, ma, sa = z, lam, mu, s
            r1a, r2a, r3a, ha = r1, r2, r3, h
        else:
            za, la, ma = z[ai], lam[ai], mu[ai]
            sa = s[ai]
            r1a, r2a, r3a, ha = r1[ai], r2[ai], r3[ai], h[ai]
        Wa = np.asarray(nlp.lag_hess(za, la, ma, sa, theta), dtype=float)
        Gza = Gz[ai] if Gz.ndim == 3 else Gz
        Hza = Hz[ai] if Hz.ndim == 3 else Hz

        # factor with escalating diagonal regularization on failure
        delta = np.zeros(len(ai))
        for _try in range(12):
            dz, dlam, dmu = _condensed_step(
                Wa, Gza, Hza, ha, ma, r1a, r2a, r3a, delta, ws=ws
            )
            bad = ~np.all(np.isfinite(dz), axis=1)
            bad |= ~np.all(np.isfinite(dmu), axis=1)
            if dlam.shape[1]:
                bad |= ~np.all(np.isfinite(dlam), axis=1)
            if not np.any(bad):
                break
            delta[bad] = np.where(delta[bad] == 0.0, opts.reg_init, delta[bad] * 10.0)
            if np.any(delta[bad] > opts.reg_max):
                break
        reg_used = max(reg_used, float(np.max(delta, initial=0.0)))
        still_bad = ~np.all(np.isfinite(dz), axis=1) | ~np.all(np.isfinite(dmu), axis=1)
        if np.any(still_bad):
            failed[ai[still_bad]] = True
            good = ~still_bad
            ai = ai[good]
            if ai.size == 0:
                continue
            za, la, ma, sa, ha = za[good], la[good], ma[good], sa[good], ha[good]
            dz, dlam, dmu = dz[good], dlam[good], dmu[good]
            r1a, r2a, r3a = r1a[good], r2a[good], r3a[good]
            Hza = Hza[good] if Hza.ndim == 3 else Hza

        # fraction to boundary: mu and -h keep at least (1 - frac) of their value
        alpha = np.ones(len(ai))
        shrink = dmu < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            mu_bound = np.where(shrink, opts.boundary_frac * ma / (-dmu), np.inf)
        alpha = np.minimum(alpha, mu_bound.min(axis=1))
        hdz = _mul(Hza, dz)
        toward = hdz > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            h_bound = np.where(toward, opts.boundary_frac * (-ha) / hdz, np.inf)
        alpha = np.minimum(alpha, h_bound.min(axis=1))

        # backtracking on the residual 2-norm, re-checking strict interiority
        merit0 = np.sqrt(
            np.sum(r1a**2, axis=1) + np.sum(r2a**2, axis=1) + np.sum(r3a**2, axis=1)
        )
        accepted = np.zeros(len(ai), dtype=bool)
        zt, lt, mt = za.copy(), la.copy(), ma.copy()
        for _half in range(opts.max_halvings + 1):
            pend = ~accepted
            if not np.any(pend):
                break
            cz = za + alpha[:, None] * dz
            cl = la + alpha[:, None] * dlam
            cm = ma + alpha[:, None] * dmu
            c1, c2, c3, ch, _, _ = _eval_blocks(nlp, cz, cl, cm, sa, theta, opts.tau)
            interior = np.all(ch < 0, axis=1) & np.all(cm > 0, axis=1)
            merit = np.sqrt(
                np.sum(c1**2, axis=1) + np.sum(c2**2, axis=1) + np.sum(c3**2, axis=1)
            )
            ok = pend & interior & np.isfinite(merit) & (merit < merit0)
            zt[ok], lt[ok], mt[ok] = cz[ok], cl[ok], cm[ok]
            accepted |= ok
            alpha[~accepted] *= 0.5
        failed[ai[~accepted]] = True
        moved = ai[accepted]
        z[moved] = zt[accepted]
        lam[moved] = lt[accepted]
        mu[moved] = mt[accepted]
        iters[moved] += 1
        if history is not None:
            history.append(np.concatenate([z, lam, mu], axis=1).copy())
        r1, r2, r3, h, Gz, Hz = _eval_blocks(nlp, z, lam, mu, s, theta, opts.tau)

    rn = np.maximum(
        np.max(np.abs(r1), axis=1),
        np.maximum(np.max(np.abs(r2), axis=1, initial=0.0), np.max(np.abs(r3), axis=1)),
    )
    resid = np.where(~failed, rn, resid)
    converged = converged | ((rn <= opts.tol) & ~failed)
    report = BatchSolveReport(
        converged=converged,
        residual=resid,
        iterations=iters,
        used_warm_start=warm_flag,
        reg_used=reg_used,
        iterates=history,
    )
    return np.concatenate([z, lam, mu], axis=1), report


def _cold_start(nlp, s, theta, tau):
    """Interior initializer: caller's primal guess, lam = 0, mu = tau / (-h)."""
    z0 = np.asarray(nlp.init_primal(s, theta), dtype=float)
    z0 = np.broadcast_to(z0, (s.shape[0], nlp.n_z)).copy()
    h0 = np.asarray(nlp.ineq(z0, theta), dtype=float)
    h0 = np.broadcast_to(h0, (s.shape[0], nlp.n_h))
    if np.any(h0 >= 0):
        raise SolverError("init_primal returned a point with h >= 0; cold start needs strict interiority")
    mu0 = tau / (-h0)
    lam0 = np.zeros((s.shape[0], nlp.n_g))
    return z0, lam0, mu0.copy()


def solve(nlp: NlpSpec, s, theta, opts: SolveOptions, warm: Optional[PrimalDualPoint] = None):
    """Solve one instance of the relaxed KKT system at fixed tau.

    Returns (PrimalDualPoint, SolveReport). A warm point is used as-is when
    it is strictly interior (mu > 0, h < 0); otherwise the cold initializer
    is used and the report says so. Non-convergence is reported, not raised:
    callers own the retry policy.
    """
    theta = _check_theta(nlp, theta)
    s = _check_state(nlp, s)
    sb = s[None, :]
    warm_ok = False
    if warm is not None:
        h_w = np.asarray(nlp.ineq(warm.z[None, :], theta), dtype=float).reshape(nlp.n_h)
        warm_ok = bool(np.all(h_w < 0) and np.all(warm.mu > 0))
    if warm_ok:
        z0 = warm.z[None, :].astype(float)
        lam0 = warm.lam[None, :].astype(float)
        mu0 = warm.mu[None, :].astype(float)
    else:
        z0, lam0, mu0 = _cold_start(nlp, sb, theta, opts.tau)
    Y, rep = _solve_batch(nlp, sb, theta, opts, z0, lam0, mu0, warm_ok)
    point = PrimalDualPoint.from_stack(Y[0], nlp)
    report = SolveReport(
        converged=bool(rep.converged[0]),
        residual=float(rep.residual[0]),
        iterations=int(rep.iterations[0]),
        used_warm_start=warm_ok,
        reg_used=rep.reg_used,
        iterates=[row[0] for row in rep.iterates] if rep.iterates is not None else None,
    )
    return point, report


def solve_many(nlp: NlpSpec, s, theta, opts: SolveOptions, warm: Optional[np.ndarray] = None):
    """Solve a batch of instances (one per row of s) in lockstep.

    warm, if given, is a (B, n_y) array of stacked primal-dual points; rows
    that are not strictly interior fall back to the cold initializer.
    Returns (Y, BatchSolveReport) with Y of shape (B, n_y).
    """
    theta = _check_theta(nlp, theta)
    s = np.asarray(s, dtype=float)
    if s.ndim == 1 and nlp.n_s == 1:
        s = s[:, None]
    if s.ndim != 2 or (s.shape[1] != nlp.n_s and nlp.n_s > 0):
        raise ValueError(f"expected batched state of shape (B, {nlp.n_s}), got {s.shape}")
    B = s.shape[0]
    z0, lam0, mu0 = _cold_start(nlp, s, theta, opts.tau)
    warm_flag = False
    if warm is not None:
        warm = np.asarray(warm, dtype=float)
        if warm.shape != (B, nlp.n_y):
            raise ValueError(f"expected warm of shape ({B}, {nlp.n_y}), got {warm.shape}")
        wz = warm[:, :nlp.n_z]
        wmu = warm[:, nlp.n_z + nlp.n_g:]
        h_w = np.asarray(nlp.ineq(wz, theta), dtype=float)
        h_w = np.broadcast_to(h_w, (B, nlp.n_h))
        ok = np.all(h_w < 0, axis=1) & np.all(wmu > 0, axis=1)
        z0[ok] = wz[ok]
        lam0[ok] = warm[ok, nlp.n_z:nlp.n_z + nlp.n_g]
        mu0[ok] = wmu[ok]
        warm_flag = bool(np.any(ok))
    return _solve_batch(nlp, s, theta, opts, z0, lam0, mu0, warm_flag)
