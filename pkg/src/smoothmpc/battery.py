"""Stochastic battery storage model.

State is the state of charge s, the action a is charging power (a >= 0 buys,
a < 0 sells), and the state evolves as

    s' = s + alpha * (delta + a)

with an exogenous inflow disturbance delta. The economic stage cost prices
bought and sold power asymmetrically; the learning stage cost adds a linear
penalty on charge outside [0, 1]. The state is never clipped here: keeping
s' inside the band is the controller's job, and clamping the action into
[-u_max, u_max] is the caller's job.

All cost and transition functions broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["EnvParams", "NoiseStream"]


@dataclass(frozen=True)
class EnvParams:
    """Physical and economic parameters of the battery MDP.

    Attributes
    ----------
    alpha : float
        Charge gain per unit power and time step.
    phi_buy : float
        Price per unit of bought power. Must be >= phi_sell, otherwise a
        simultaneous buy/sell would be profitable.
    phi_sell : float
        Price per unit of sold power.
    u_max : float
        Symmetric power bound; callers clamp actions into [-u_max, u_max].
    noise_mean : float
        Mean of the inflow disturbance delta.
    noise_scale : float
        Spread of delta. Interpreted as a variance when
        ``noise_scale_is_variance`` is true, as a standard deviation
        otherwise. The default variance 0.36 (std 0.6) puts the per-step
        state increment noise at std alpha * 0.6 = 0.05, the regime where
        the optimal policy is nearly bang-bang: max buying in a narrow band
        near s = 0, no exchange on a wide middle band, max selling above
        roughly 0.6.
    noise_scale_is_variance : bool
        Interpretation switch for ``noise_scale``.
    penalty : float
        Linear penalty rate on charge outside [0, 1] in the learning cost.
    """

    alpha: float = 1.0 / 12.0
    phi_buy: float = 5.0
    phi_sell: float = 2.5
    u_max: float = 1.0
    noise_mean: float = 0.0
    noise_scale: float = 0.36
    noise_scale_is_variance: bool = True
    penalty: float = 1000.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (self.phi_buy >= self.phi_sell >= 0):
            raise ValueError(
                f"prices must satisfy phi_buy >= phi_sell >= 0, got "
                f"({self.phi_buy}, {self.phi_sell})"
            )
        if self.u_max <= 0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.penalty < 0:
            raise ValueError(f"penalty must be >= 0, got {self.penalty}")

    @property
    def noise_std(self) -> float:
        """Standard deviation of delta under the configured interpretation."""
        if self.noise_scale_is_variance:
            return math.sqrt(self.noise_scale)
        return self.noise_scale

    def step(self, s, a, delta):
        """Next state of charge s + alpha * (delta + a). No clipping."""
        return s + self.alpha * (np.asarray(delta) + a)

    def stage_cost(self, s, a):
        """Economic cost of one step: phi_buy * a if a >= 0 else phi_sell * a.

        Selling (a < 0) yields a negative cost. The state argument is
        accepted for signature symmetry with the learning cost; the
        economic term does not depend on it.
        """
        a = np.asarray(a)
        out = np.where(a >= 0, self.phi_buy * a, self.phi_sell * a)
        return out if out.ndim else float(out)

    def rl_stage_cost(self, s, a):
        """Learning cost: economic cost plus penalty * distance of s from [0, 1]."""
        s = np.asarray(s)
        band = self.penalty * (np.maximum(s - 1.0, 0.0) + np.maximum(-s, 0.0))
        out = self.stage_cost(s, a) + band
        return out if out.ndim else float(out)


class NoiseStream:
    """Deterministic, counted stream of inflow disturbances.

    Wraps a seeded generator so that identical seeds reproduce identical
    draw sequences and the number of consumed draws is observable.
    """

    def __init__(self, params: EnvParams, seed):
        self._mean = params.noise_mean
        self._std = params.noise_std
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self.count = 0

    def sample(self, size=None):
        """Draw one disturbance (size=None) or an array of them."""
        draw = self._rng.normal(self._mean, self._std, size=size)
        self.count += 1 if size is None else int(np.prod(np.shape(draw)))
        return draw
