"""Tiny NLP fixtures with closed-form relaxed solutions.

Two one-dimensional problems exercise the kernel against algebra done by
hand, including the O(tau) distance between the relaxed and exact optima
and the implicit-function sensitivity:

P1:  min z^2        s.t. 1 - z <= 0
     relaxed optimum  z_tau = (1 + sqrt(1 + 2 tau)) / 2,  mu_tau = 2 z_tau,
     exact optimum    z = 1.

P2:  min (z - theta)^2   s.t. z - 1 <= 0
     relaxed optimum  z_tau = ((1 + theta) - sqrt((1 - theta)^2 + 2 tau)) / 2
     with dz/dtheta = (1 + (1 - theta) / sqrt((1 - theta)^2 + 2 tau)) / 2,
     which equals 1/2 at theta = 1 for every tau > 0.
"""

from __future__ import annotations

import numpy as np

from .ipm import NlpSpec

__all__ = [
    "p1",
    "p2",
    "p1_solution",
    "p2_solution",
    "p2_slope",
]


def p1() -> NlpSpec:
    """min z^2 subject to 1 - z <= 0 (no parameters, no state)."""
    return NlpSpec(
        n_z=1,
        n_g=0,
        n_h=1,
        n_theta=0,
        n_s=0,
        cost=lambda z, th: np.sum(z**2, axis=-1),
        cost_grad=lambda z, th: 2.0 * z,
        ineq=lambda z, th: 1.0 - z,
        ineq_jac=lambda z, th: np.array([[-1.0]]),
        lag_hess=lambda z, lam, mu, s, th: np.array([[2.0]]),
        init_primal=lambda s, th: np.array([2.0]),
    )


def p1_solution(tau: float):
    """Closed-form relaxed optimum (z_tau, mu_tau) of P1."""
    z = 0.5 * (1.0 + np.sqrt(1.0 + 2.0 * tau))
    return z, 2.0 * z


def p2() -> NlpSpec:
    """min (z - theta)^2 subject to z - 1 <= 0, parametric in theta."""
    return NlpSpec(
        n_z=1,
        n_g=0,
        n_h=1,
        n_theta=1,
        n_s=0,
        cost=lambda z, th: np.sum((z - th[0]) ** 2, axis=-1),
        cost_grad=lambda z, th: 2.0 * (z - th[0]),
        ineq=lambda z, th: z - 1.0,
        ineq_jac=lambda z, th: np.array([[1.0]]),
        lag_hess=lambda z, lam, mu, s, th: np.array([[2.0]]),
        init_primal=lambda s, th: np.array([0.0]),
        stat_jac_theta=lambda z, lam, mu, s, th: np.array([[-2.0]]),
    )


def p2_solution(theta: float, tau: float) -> float:
    """Closed-form relaxed optimum z_tau of P2."""
    return 0.5 * ((1.0 + theta) - np.sqrt((1.0 - theta) ** 2 + 2.0 * tau))


def p2_slope(theta: float, tau: float) -> float:
    """Closed-form dz_tau/dtheta of P2."""
    return 0.5 * (1.0 + (1.0 - theta) / np.sqrt((1.0 - theta) ** 2 + 2.0 * tau))
