"""Configuration-driven experiment runner with deterministic artifacts.

One invocation runs one experiment kind from a single config tree (defaults,
optionally overlaid by a YAML file and dotted key=value overrides) and writes
frozen-schema CSV artifacts plus a manifest. The kinds are:

- ``dp-baseline``        grid value iteration; writes ``dp_policy.csv``
- ``learn-homotopy``     actor-critic run with the decreasing-tau schedule
- ``learn-fixed-tau``    the same loop with tau pinned at the schedule floor
- ``smoothing-profile``  policy/gradient sweeps over s for several tau
- ``gradient-density``   per-sample gradient traces of a closed loop per tau

Learning kinds write one trace per seed (``<kind>_<seed>.csv``) and the
policy snapshots collected along the run (``policy_snapshots_<seed>.csv``).
Deterministic kinds use the first seed for file naming (and, for the density
kind, its exploration stream). Identical config + seed reruns produce
byte-identical CSVs; ``manifest.json`` additionally records row counts,
library versions, and wall-clock (the only non-reproducible fields).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__ as _pkg_version
from .battery import EnvParams, NoiseStream
from .dp import DpGrid, policy_performance, value_iteration
from .learn import LearnerConfig, LearningTrace, TauSchedule, run_learning
from .mpc import (
    MpcConfig,
    PolicyEvalError,
    build_nlp,
    default_options,
    evaluate,
    smoothness_profile,
)

__all__ = [
    "DEFAULT_CONFIG",
    "ExperimentConfig",
    "ConfigError",
    "KINDS",
    "TRACE_COLUMNS",
    "DP_COLUMNS",
    "SNAPSHOT_COLUMNS",
    "PROFILE_COLUMNS",
    "DENSITY_COLUMNS",
    "load_config",
    "config_hash",
    "run",
    "compare",
    "convergence_step",
    "write_csv",
    "read_csv",
]

log = logging.getLogger(__name__)

KINDS = (
    "dp-baseline",
    "learn-fixed-tau",
    "learn-homotopy",
    "smoothing-profile",
    "gradient-density",
)

# Frozen CSV schemas; the plotting component binds to these column names.
TRACE_COLUMNS = (
    "step", "theta1", "theta2", "tau", "J", "J_se", "grad_norm", "critic_residual",
)
DP_COLUMNS = ("s", "V", "pi")
SNAPSHOT_COLUMNS = ("step", "s", "u0")
PROFILE_COLUMNS = ("tau", "s", "u0", "du0_dtheta1", "du0_dtheta2")
DENSITY_COLUMNS = ("tau", "step", "s", "g1", "g2", "g1_normalized", "g2_normalized")

DEFAULT_CONFIG = {
    "kind": "learn-homotopy",
    "out": "runs",
    "seeds": [1, 2, 3, 4, 5],
    "workers": 1,
    "env": {
        "alpha": 1.0 / 12.0,
        "phi_buy": 5.0,
        "phi_sell": 2.5,
        "u_max": 1.0,
        "noise_mean": 0.0,
        "noise_scale": 0.36,
        "noise_scale_is_variance": True,
        "penalty": 1000.0,
    },
    "mpc": {
        "horizon": 10,
        "discount": 0.99,
        "x_ref": 0.5,
        "c_stage": 0.1,
        "slack_weight": 10.0,
        "terminal_slack_weight": 10.0,
        "u_bound": 1.0,
        "alpha_model": 1.0 / 12.0,
        "phi_buy": 5.0,
        "phi_sell": 2.5,
    },
    "dp": {
        "s_lo": -0.25,
        "s_hi": 1.25,
        "n_states": 401,
        "n_actions": 41,
        "n_quad": 11,
        "gamma": 0.99,
        "tol": 1e-8,
    },
    "tau": {"init": 1e-2, "decrement": 5e-5, "floor": 1e-4},
    "learner": {
        "theta_init": [6.0, 6.0],
        "n_steps": 300,
        "batch_size": 200,
        "lr": 2e-2,
        "grad_clip": 10.0,
        "ridge": 1e-8,
        "explore_std": 0.3,
        "gamma": 0.99,
        "s_init": 0.5,
        "eval_every": 10,
        "eval_rollouts": 64,
        "eval_horizon": 1000,
        "snapshot_every": 25,
        "snapshot_points": 81,
        "fail_limit": 50,
        "solver_tol": 1e-8,
    },
    "profile": {"theta": [6.0, 6.0], "taus": [1e-2, 1e-3, 1e-4], "s_points": 201},
    "density": {
        "theta": [6.0, 6.0],
        "taus": [1e-2, 1e-4],
        "n_steps": 1000,
        "explore_std": 0.1,
        "s_init": 0.5,
    },
}

# Plumbing keys that do not change what an experiment computes; they are
# excluded from the config hash so reruns into another directory compare equal.
_UNHASHED_KEYS = ("out", "workers")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


# ---------------------------------------------------------------------------
# Config assembly


def _coerce(default, val, where: str):
    """Reconcile a parsed scalar with the default's type.

    YAML 1.1 reads exponent literals without a dot ('5e-5') as strings, and
    ints where floats are meant; both are folded back to numbers here.
    """
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{where}: expected true/false, got {val!r}")
        return val
    if isinstance(default, float):
        if isinstance(val, bool) or not isinstance(val, (int, float, str)):
            raise ConfigError(f"{where}: expected a number, got {val!r}")
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {val!r}") from None
    if isinstance(default, int):
        if isinstance(val, bool) or not isinstance(val, (int, str)):
            raise ConfigError(f"{where}: expected an integer, got {val!r}")
        try:
            return int(val)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {val!r}") from None
    if isinstance(default, list):
        if not isinstance(val, list):
            raise ConfigError(f"{where}: expected a list, got {val!r}")
        if default and isinstance(default[0], (bool, int, float)):
            return [
                _coerce(default[0], item, f"{where}[{i}]")
                for i, item in enumerate(val)
            ]
        return val
    return val


def _merge(base: dict, overlay: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in overlay.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{where}: unknown configuration key")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a mapping, got {val!r}")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = _coerce(base[key], val, where)
    return out


def _apply_set(tree: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"--set {item!r}: expected key=value")
    key, _, raw = item.partition("=")
    key = key.strip()
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"--set {key}: unparseable value {raw!r} ({exc})") from exc
    node = {}
    leaf = node
    parts = key.split(".")
    for part in parts[:-1]:
        leaf[part] = {}
        leaf = leaf[part]
    leaf[parts[-1]] = value
    return _merge(tree, node)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description plus the raw effective tree."""

    kind: str
    out: Path
    seeds: tuple
    workers: int
    env: EnvParams
    mpc: MpcConfig
    dp: dict
    tau: TauSchedule
    learner: LearnerConfig
    profile: dict
    density: dict
    raw: dict = field(repr=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _build(tree: dict) -> ExperimentConfig:
    kind = tree["kind"]
    if kind not in KINDS:
        raise ConfigError(f"kind: {kind!r} is not one of {', '.join(KINDS)}")
    seeds = tree["seeds"]
    if not isinstance(seeds, (list, tuple)) or not seeds:
        raise ConfigError("seeds: must be a nonempty list of integers")
    for i, s in enumerate(seeds):
        if not isinstance(s, int) or isinstance(s, bool):
            raise ConfigError(f"seeds[{i}]: must be an integer, got {s!r}")
    workers = tree["workers"]
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers: must be a positive integer, got {workers!r}")

    def section(name, ctor):
        try:
            return ctor(**tree[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: {exc}") from exc

    env = section("env", EnvParams)
    mpc = section("mpc", MpcConfig)
    tau_cfg = tree["tau"]
    try:
        tau = TauSchedule(
            tau_init=tau_cfg["init"],
            decrement=tau_cfg["decrement"],
            tau_floor=tau_cfg["floor"],
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"tau: {exc}") from exc
    lrn = dict(tree["learner"])
    lrn["theta_init"] = tuple(lrn.get("theta_init", ()))
    learner = section_learner(lrn)
    dp_cfg = tree["dp"]
    for key in ("n_states", "n_actions", "n_quad"):
        if not isinstance(dp_cfg[key], int) or dp_cfg[key] < 2:
            raise ConfigError(f"dp.{key}: must be an integer >= 2, got {dp_cfg[key]!r}")
    for key, val in (("gamma", dp_cfg["gamma"]), ("tol", dp_cfg["tol"])):
        if not (0 < val < 1 if key == "gamma" else val > 0):
            raise ConfigError(f"dp.{key}: out of range ({val!r})")
    prof = tree["profile"]
    if len(prof["theta"]) != 2:
        raise ConfigError("profile.theta: must have two entries")
    if not prof["taus"]:
        raise ConfigError("profile.taus: must be nonempty")
    dens = tree["density"]
    if len(dens["theta"]) != 2:
        raise ConfigError("density.theta: must have two entries")
    if not dens["taus"]:
        raise ConfigError("density.taus: must be nonempty")
    if dens["n_steps"] < 1:
        raise ConfigError(f"density.n_steps: must be >= 1, got {dens['n_steps']!r}")
    return ExperimentConfig(
        kind=kind,
        out=Path(tree["out"]),
        seeds=tuple(seeds),
        workers=workers,
        env=env,
        mpc=mpc,
        dp=dict(dp_cfg),
        tau=tau,
        learner=learner,
        profile=dict(prof),
        density=dict(dens),
        raw=tree,
    )


def section_learner(kwargs: dict) -> LearnerConfig:
    try:
        return LearnerConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"learner: {exc}") from exc


def load_config(path: Optional[str] = None, sets: tuple = ()) -> ExperimentConfig:
    """DEFAULT_CONFIG overlaid by an optional YAML file, then dotted overrides."""
    tree = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy, JSON-clean
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        tree = _merge(tree, loaded)
    for item in sets:
        tree = _apply_set(tree, item)
    return _build(tree)


def config_hash(tree: dict) -> str:
    """sha256 of the canonical JSON serialization, minus plumbing keys."""
    slim = {k: v for k, v in tree.items() if k not in _UNHASHED_KEYS}
    blob = json.dumps(slim, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# CSV plumbing


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, columns: tuple, rows) -> int:
    """Write rows (iterables matching columns) deterministically; returns count."""
    n = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
            n += 1
    return n


def read_csv(path, columns: Optional[tuple] = None) -> dict:
    """Read a numeric CSV into {column: float array}, checking the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if columns is not None and tuple(header) != tuple(columns):
            missing = [c for c in columns if c not in header]
            raise ValueError(
                f"{path}: header mismatch, missing columns {missing}, got {header}"
            )
        data = [[] for _ in header]
        for row in reader:
            for i, cell in enumerate(row):
                data[i].append(float(cell))
    return {name: np.asarray(vals) for name, vals in zip(header, data)}


# ---------------------------------------------------------------------------
# Experiment bodies


def _dp_solution(cfg: ExperimentConfig):
    grid = DpGrid.build(
        cfg.env,
        s_lo=cfg.dp["s_lo"],
        s_hi=cfg.dp["s_hi"],
        n_states=cfg.dp["n_states"],
        n_actions=cfg.dp["n_actions"],
        n_quad=cfg.dp["n_quad"],
        gamma=cfg.dp["gamma"],
    )
    return value_iteration(cfg.env, grid, tol=cfg.dp["tol"])


def _run_dp(cfg: ExperimentConfig, out: Path) -> dict:
    sol = _dp_solution(cfg)
    rows = zip(sol.grid.s_nodes, sol.V, sol.pi)
    count = write_csv(out / "dp_policy.csv", DP_COLUMNS, rows)
    nodes = sol.grid.s_nodes
    inside = (nodes >= 0.0) & (nodes <= 1.0)
    pi01 = sol.pi[inside]
    u = cfg.env.u_max
    bang = float(np.mean(np.isin(pi01, [-u, 0.0, u])))
    return {
        "files": {"dp_policy.csv": count},
        "summary": {
            "sweeps": sol.sweeps,
            "bellman_residual": sol.bellman_residual,
            "bang_fraction": bang,
        },
    }


def _schedule_for(kind: str, tau: TauSchedule) -> TauSchedule:
    if kind == "learn-fixed-tau":
        return TauSchedule.fixed(tau.tau_floor)
    return tau


def _learn_one_seed(cfg: ExperimentConfig, kind: str, seed: int, out: Path) -> dict:
    sched = _schedule_for(kind, cfg.tau)
    trace = run_learning(cfg.env, cfg.mpc, sched, cfg.learner, seed)
    trace_rows = zip(
        trace.step, trace.theta[:, 0], trace.theta[:, 1], trace.tau,
        trace.J, trace.J_se, trace.grad_norm, trace.critic_residual,
    )
    trace_name = f"{kind}_{seed}.csv"
    files = {trace_name: write_csv(out / trace_name, TRACE_COLUMNS, trace_rows)}

    def snapshot_rows():
        for i, step in enumerate(trace.snapshot_steps):
            ok = trace.snapshot_ok[i]
            for s, u0, good in zip(trace.snapshot_s, trace.snapshot_u0[i], ok):
                if good:
                    yield step, s, u0
    snap_name = f"policy_snapshots_{seed}.csv"
    files[snap_name] = write_csv(out / snap_name, SNAPSHOT_COLUMNS, snapshot_rows())

    conv = convergence_step(trace.theta)
    summary = {
        "seed": seed,
        "final_theta": [float(trace.theta[-1, 0]), float(trace.theta[-1, 1])],
        "final_tau": float(trace.tau[-1]),
        "final_J": float(trace.J[-1]),
        "final_J_se": float(trace.J_se[-1]),
        "convergence_step": conv,
        "auc_J": float(np.trapezoid(trace.J, trace.step)),
        "aborted": trace.aborted,
        "abort_reason": trace.abort_reason,
        "wall_clock": trace.wall_clock,
    }
    return {"files": files, "summary": summary}


def _run_learning_kind(cfg: ExperimentConfig, kind: str, out: Path) -> dict:
    runs = []
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [
                pool.submit(_learn_one_seed, cfg, kind, seed, out)
                for seed in cfg.seeds
            ]
            runs = [f.result() for f in futs]
    else:
        for seed in cfg.seeds:
            runs.append(_learn_one_seed(cfg, kind, seed, out))
    files = {}
    for r in runs:
        files.update(r["files"])
    return {"files": files, "summary": {"runs": [r["summary"] for r in runs]}}


def _run_profile(cfg: ExperimentConfig, out: Path) -> dict:
    nlp = build_nlp(cfg.mpc)
    theta = np.asarray(cfg.profile["theta"], dtype=float)
    s_grid = np.linspace(0.0, 1.0, int(cfg.profile["s_points"]))
    rows = []
    max_grad = {}
    for tau in cfg.profile["taus"]:
        prof = smoothness_profile(nlp, cfg.mpc, theta, float(tau), s_grid)
        if not prof.ok.all():
            bad = np.flatnonzero(~prof.ok)
            raise PolicyEvalError(
                f"profile sweep failed at tau={tau} for s={s_grid[bad][:5]}"
            )
        for s, u0, g in zip(prof.s, prof.u0, prof.grad_theta):
            rows.append((tau, s, u0, g[0], g[1]))
        max_grad[repr(float(tau))] = float(
            np.max(np.linalg.norm(prof.grad_theta, axis=1))
        )
    name = f"smoothing-profile_{cfg.seeds[0]}.csv"
    count = write_csv(out / name, PROFILE_COLUMNS, rows)
    return {"files": {name: count}, "summary": {"max_grad_norm": max_grad}}


def _run_density(cfg: ExperimentConfig, out: Path) -> dict:
    nlp = build_nlp(cfg.mpc)
    theta = np.asarray(cfg.density["theta"], dtype=float)
    n_steps = int(cfg.density["n_steps"])
    explore_std = float(cfg.density["explore_std"])
    env = cfg.env
    rows = []
    fraction_small = {}
    for tau in cfg.density["taus"]:
        root = np.random.SeedSequence(cfg.seeds[0])
        env_rng = np.random.Generator(np.random.PCG64(root.spawn(2)[0]))
        explore_rng = np.random.Generator(np.random.PCG64(root.spawn(1)[0]))
        opts = default_options(float(tau))
        s = float(cfg.density["s_init"])
        warm = None
        states = np.empty(n_steps)
        grads = np.empty((n_steps, 2))
        for k in range(n_steps):
            ev = evaluate(nlp, cfg.mpc, s, theta, float(tau), warm=warm, opts=opts)
            warm = ev.point
            states[k] = s
            grads[k] = ev.grad_theta
            noise = explore_rng.normal(0.0, explore_std)
            act = float(np.clip(ev.u0 + noise, -env.u_max, env.u_max))
            delta = env_rng.normal(env.noise_mean, env.noise_std)
            s = float(env.step(s, act, delta))
        scale = float(np.max(np.abs(grads)))
        normalized = grads / scale if scale > 0 else grads
        magnitude = np.max(np.abs(normalized), axis=1)
        fraction_small[repr(float(tau))] = float(np.mean(magnitude < 0.01))
        for k in range(n_steps):
            rows.append(
                (tau, k, states[k], grads[k, 0], grads[k, 1],
                 normalized[k, 0], normalized[k, 1])
            )
    name = f"gradient-density_{cfg.seeds[0]}.csv"
    count = write_csv(out / name, DENSITY_COLUMNS, rows)
    return {"files": {name: count}, "summary": {"fraction_below_0.01": fraction_small}}


# ---------------------------------------------------------------------------
# Entry points


def run(cfg: ExperimentConfig) -> dict:
    """Run the configured experiment kind; write artifacts; return the manifest."""
    t0 = time.perf_counter()
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.yaml").write_text(
        yaml.safe_dump(cfg.raw, sort_keys=True)
    )
    if cfg.kind == "dp-baseline":
        result = _run_dp(cfg, out)
    elif cfg.kind in ("learn-homotopy", "learn-fixed-tau"):
        result = _run_learning_kind(cfg, cfg.kind, out)
    elif cfg.kind == "smoothing-profile":
        result = _run_profile(cfg, out)
    elif cfg.kind == "gradient-density":
        result = _run_density(cfg, out)
    else:  # pragma: no cover - guarded by validation
        raise ConfigError(f"kind: {cfg.kind!r} is not runnable")
    manifest = {
        "kind": cfg.kind,
        "config_hash": cfg.hash,
        "files": result["files"],
        "summary": result["summary"],
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "smoothmpc": _pkg_version,
        },
        "wall_clock": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for name, rows in manifest["files"].items():
        path = out / name
        if not path.exists() or path.stat().st_size == 0:
            raise RuntimeError(f"artifact {name} missing or empty after run")
    return manifest


def convergence_step(theta: np.ndarray, tol: float = 1e-3, window: int = 20):
    """First step index after which ||dtheta|| < tol holds for `window` steps.

    theta has one row per step; returns None when the criterion never holds.
    """
    d = np.linalg.norm(np.diff(theta, axis=0), axis=1)
    small = d < tol
    run_len = 0
    for t in range(len(small)):
        run_len = run_len + 1 if small[t] else 0
        if run_len >= window:
            return int(t - window + 1)  # step index after which the run begins
    return None


def compare(trace_a, trace_b) -> dict:
    """Convergence, J-area, and per-step J difference of two learning traces."""
    a = read_csv(trace_a, TRACE_COLUMNS)
    b = read_csv(trace_b, TRACE_COLUMNS)
    n = min(len(a["step"]), len(b["step"]))
    theta_a = np.stack([a["theta1"], a["theta2"]], axis=1)
    theta_b = np.stack([b["theta1"], b["theta2"]], axis=1)
    j_diff = a["J"][:n] - b["J"][:n]
    return {
        "steps_to_convergence_a": convergence_step(theta_a),
        "steps_to_convergence_b": convergence_step(theta_b),
        "auc_J_a": float(np.trapezoid(a["J"], a["step"])),
        "auc_J_b": float(np.trapezoid(b["J"], b["step"])),
        "J_diff_mean": float(np.mean(j_diff)),
        "J_diff_max_abs": float(np.max(np.abs(j_diff))),
        "J_diff_per_step": [float(x) for x in j_diff],
        "rows_compared": int(n),
    }
