"""Battery MDP: transitions, costs, noise, and parameter validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothmpc.battery import EnvParams, NoiseStream


def test_step_is_exact_affine_update():
    env = EnvParams()
    assert env.step(0.5, 0.2, 0.0) == pytest.approx(0.5 + 0.2 / 12.0, abs=1e-15)
    assert env.step(0.0, 0.0, 1.2) == pytest.approx(1.2 / 12.0, abs=1e-15)
    # broadcasting over a batch of states
    s = np.array([0.0, 0.5, 1.0])
    out = env.step(s, -1.0, 0.5)
    np.testing.assert_allclose(out, s + (1.0 / 12.0) * (0.5 - 1.0), rtol=0, atol=1e-15)


def test_step_does_not_clip_state():
    env = EnvParams()
    assert env.step(1.0, 1.0, 5.0) > 1.0
    assert env.step(0.0, -1.0, -5.0) < 0.0


def test_stage_cost_prices_buy_and_sell_asymmetrically():
    env = EnvParams()
    assert env.stage_cost(0.5, 1.0) == pytest.approx(5.0)
    assert env.stage_cost(0.5, -1.0) == pytest.approx(-2.5)
    assert env.stage_cost(0.5, 0.0) == 0.0
    # buying always costs more than selling the same amount earns
    a = np.linspace(0.01, 1.0, 7)
    assert np.all(env.stage_cost(0.0, a) > -env.stage_cost(0.0, -a))


def test_rl_stage_cost_adds_linear_band_penalty():
    env = EnvParams()
    assert env.rl_stage_cost(0.5, 0.3) == pytest.approx(env.stage_cost(0.5, 0.3))
    assert env.rl_stage_cost(1.2, 0.0) == pytest.approx(1000.0 * 0.2)
    assert env.rl_stage_cost(-0.05, 0.0) == pytest.approx(1000.0 * 0.05)
    # penalty applies at the current state, independent of the action
    assert env.rl_stage_cost(-0.05, 1.0) == pytest.approx(5.0 + 50.0)


@given(
    s=st.floats(-2, 3),
    a=st.floats(-1, 1),
    delta=st.floats(-3, 3),
)
@settings(max_examples=200, deadline=None)
def test_costs_and_step_are_finite_and_consistent(s, a, delta):
    env = EnvParams()
    assert np.isfinite(env.step(s, a, delta))
    c = env.rl_stage_cost(s, a)
    assert np.isfinite(c)
    assert c >= env.stage_cost(s, a) - 1e-12  # band penalty never negative


def test_noise_scale_interpreted_as_variance_by_default():
    env = EnvParams()
    assert env.noise_scale_is_variance
    assert env.noise_std == pytest.approx(np.sqrt(0.36))
    env_sd = EnvParams(noise_scale=0.6, noise_scale_is_variance=False)
    assert env_sd.noise_std == pytest.approx(0.6)


def test_noise_sample_variance_matches_configured_variance():
    # one million draws at variance 0.05 land within half a percent
    env = EnvParams(noise_scale=0.05, noise_scale_is_variance=True)
    stream = NoiseStream(env, seed=0)
    draws = stream.sample(size=1_000_000)
    assert 0.0495 <= float(np.var(draws)) <= 0.0505
    assert abs(float(np.mean(draws))) < 1e-3
    assert stream.count == 1_000_000


def test_noise_stream_is_reproducible_and_counted():
    env = EnvParams()
    a = NoiseStream(env, seed=123)
    b = NoiseStream(env, seed=123)
    np.testing.assert_array_equal(a.sample(size=10), b.sample(size=10))
    assert a.sample() == b.sample()
    assert a.count == 11
    c = NoiseStream(env, seed=124)
    assert not np.array_equal(a.sample(size=10), c.sample(size=10))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"alpha": 0.0},
        {"alpha": -1.0},
        {"phi_buy": 1.0, "phi_sell": 2.0},  # selling must not beat buying
        {"phi_sell": -0.1},
        {"u_max": 0.0},
        {"noise_scale": -0.5},
        {"penalty": -1.0},
    ],
)
def test_invalid_parameters_are_rejected(kwargs):
    with pytest.raises(ValueError):
        EnvParams(**kwargs)
