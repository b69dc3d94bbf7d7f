"""Interior-point smoothed MPC policies with exact parametric sensitivities,
learned on a stochastic battery MDP by an LSTD policy gradient."""

__version__ = "0.1.0"

from . import battery, dp, experiment, ipm, learn, mpc, toyproblems

__all__ = [
    "battery",
    "dp",
    "experiment",
    "ipm",
    "learn",
    "mpc",
    "toyproblems",
    "__version__",
]
