"""Tests for the compatible-critic policy-gradient learner.

The LSTD oracle used here is the temporal-difference fixed-point identity:
at the fitted weights x, sum_k phi_k td_k == ridge * x, which an
independent reconstruction of the normal equations must satisfy. Learning
loop tests run a miniature configuration (gamma = 0.9 shortens the
admissible evaluation horizon) so the full loop stays in the second range.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothmpc.battery import EnvParams
from smoothmpc.learn import (
    Batch,
    CriticFitError,
    CriticParams,
    LearnerConfig,
    TauSchedule,
    actor_step,
    compatible_features,
    features,
    lstd_fit,
    policy_gradient,
    run_learning,
)
from smoothmpc.mpc import MpcConfig


def _synthetic_batch(rng, m=64, segment_breaks=()):
    """Random batch with a chained trajectory and optional segment breaks."""
    s = rng.uniform(-0.2, 1.2, m + 1)
    pi_s = np.tanh(rng.normal(size=m))
    a = pi_s + rng.normal(0.0, 0.1, m)
    grad = rng.normal(size=(m, 2))
    cost = rng.uniform(0.0, 5.0, m)
    new_segment = np.zeros(m, dtype=bool)
    new_segment[0] = True
    for idx in segment_breaks:
        new_segment[idx] = True
    return Batch(
        s=s[:m], a=a, cost=cost, s_next=s[1:], pi_s=pi_s,
        grad_theta=grad, new_segment=new_segment,
    )


class TestFeatures:
    def test_state_features_values(self):
        np.testing.assert_allclose(features(0.5), [0.0, 0.5, 1.0])
        np.testing.assert_allclose(features(0.0), [0.25, 0.0, 1.0])
        np.testing.assert_allclose(features(1.0), [0.25, 1.0, 1.0])

    def test_state_features_batch_shape(self):
        out = features(np.linspace(0, 1, 7))
        assert out.shape == (7, 3)
        np.testing.assert_array_equal(out[:, 2], 1.0)

    def test_compatible_features_scale_with_offset(self):
        g = np.array([2.0, -1.0])
        np.testing.assert_allclose(
            compatible_features(g, a=0.7, pi_s=0.5), [0.4, -0.2]
        )
        # on-policy action gives exactly zero advantage features
        np.testing.assert_array_equal(compatible_features(g, 0.5, 0.5), [0.0, 0.0])

    def test_compatible_features_batch(self):
        g = np.ones((5, 2))
        off = np.arange(5.0)
        out = compatible_features(g, off, np.zeros(5))
        np.testing.assert_allclose(out, np.stack([off, off], axis=1))


class TestTauSchedule:
    def test_linear_decrease_to_floor(self):
        s = TauSchedule()
        assert s.at(0) == 0.01
        assert s.at(1) == pytest.approx(0.00995)
        assert s.at(100) == pytest.approx(0.005)
        # the closed form hits the floor exactly at floor_step
        assert s.floor_step == 198
        assert s.at(197) > s.tau_floor
        assert s.at(198) == s.tau_floor
        assert s.at(10_000) == s.tau_floor

    def test_at_vectorized(self):
        s = TauSchedule()
        np.testing.assert_allclose(
            s.at(np.array([0, 100, 300])), [0.01, 0.005, 0.0001]
        )

    def test_next_clamps(self):
        s = TauSchedule()
        assert s.next(1.2e-4) == pytest.approx(7e-5 + s.tau_floor - 7e-5, abs=1e-12)
        assert s.next(s.tau_floor) == s.tau_floor

    def test_fixed_schedule(self):
        s = TauSchedule.fixed(1e-4)
        assert s.decrement == 0.0
        assert s.floor_step == 0
        assert s.at(0) == s.at(500) == 1e-4

    def test_validation(self):
        with pytest.raises(ValueError):
            TauSchedule(tau_init=1e-5, tau_floor=1e-4)
        with pytest.raises(ValueError):
            TauSchedule(decrement=-1e-5)
        with pytest.raises(ValueError):
            TauSchedule(tau_floor=0.0)


class TestLstd:
    def test_fixed_point_identity(self):
        # At the fitted weights the feature-weighted TD errors equal
        # ridge * x; this characterizes the LSTD solution independently of
        # how the normal equations were assembled.
        rng = np.random.default_rng(0)
        batch = _synthetic_batch(rng)
        for ridge in (0.0, 1e-8, 1e-2):
            crit = lstd_fit(batch, gamma=0.95, ridge=ridge)
            x = np.concatenate([crit.w, crit.v])
            psi = compatible_features(batch.grad_theta, batch.a, batch.pi_s)
            phi = np.concatenate([psi, features(batch.s)], axis=1)
            phi_n = np.concatenate([np.zeros((len(batch), 2)), features(batch.s_next)], axis=1)
            td = batch.cost + 0.95 * (phi_n @ x) - phi @ x
            np.testing.assert_allclose(phi.T @ td, ridge * x, atol=1e-9)

    def test_matches_dense_reconstruction(self):
        rng = np.random.default_rng(1)
        batch = _synthetic_batch(rng, m=80)
        crit = lstd_fit(batch, gamma=0.9, ridge=1e-8)
        psi = compatible_features(batch.grad_theta, batch.a, batch.pi_s)
        phi = np.concatenate([psi, features(batch.s)], axis=1)
        phi_n = np.concatenate([np.zeros((80, 2)), features(batch.s_next)], axis=1)
        A = sum(np.outer(p, p - 0.9 * q) for p, q in zip(phi, phi_n))
        A += 1e-8 * np.eye(5)
        b = sum(c * p for p, c in zip(phi, batch.cost))
        x = np.linalg.solve(A, b)
        np.testing.assert_allclose(np.concatenate([crit.w, crit.v]), x, rtol=1e-10)

    def test_duplication_invariance(self):
        # With no ridge, duplicating every sample scales both sides of the
        # normal equations and leaves the fit unchanged.
        rng = np.random.default_rng(2)
        b1 = _synthetic_batch(rng, m=50)
        b2 = Batch(
            s=np.tile(b1.s, 2), a=np.tile(b1.a, 2), cost=np.tile(b1.cost, 2),
            s_next=np.tile(b1.s_next, 2), pi_s=np.tile(b1.pi_s, 2),
            grad_theta=np.tile(b1.grad_theta, (2, 1)),
            new_segment=np.tile(b1.new_segment, 2),
        )
        c1 = lstd_fit(b1, gamma=0.95, ridge=0.0)
        c2 = lstd_fit(b2, gamma=0.95, ridge=0.0)
        np.testing.assert_allclose(c1.w, c2.w, atol=1e-9)
        np.testing.assert_allclose(c1.v, c2.v, atol=1e-9)

    def test_zero_cost_gives_zero_weights(self):
        rng = np.random.default_rng(3)
        batch = _synthetic_batch(rng)
        batch = Batch(
            s=batch.s, a=batch.a, cost=np.zeros(len(batch)), s_next=batch.s_next,
            pi_s=batch.pi_s, grad_theta=batch.grad_theta,
            new_segment=batch.new_segment,
        )
        crit = lstd_fit(batch, gamma=0.95, ridge=1e-8)
        np.testing.assert_allclose(crit.w, 0.0, atol=1e-12)
        np.testing.assert_allclose(crit.v, 0.0, atol=1e-12)
        assert crit.residual == pytest.approx(0.0, abs=1e-12)

    def test_critic_value_consistency(self):
        rng = np.random.default_rng(4)
        crit = lstd_fit(_synthetic_batch(rng), gamma=0.95)
        # taking the policy's own action leaves only the state-value part
        g = np.array([0.3, -0.8])
        s = 0.37
        assert crit.q_value(s, 0.5, g, 0.5) == pytest.approx(crit.state_value(s))
        assert crit.q_value(s, 0.9, g, 0.5) != pytest.approx(crit.state_value(s))

    def test_singular_batch_raises(self):
        m = 40
        batch = Batch(
            s=np.full(m, 0.5), a=np.full(m, 0.2), cost=np.ones(m),
            s_next=np.full(m, 0.5), pi_s=np.full(m, 0.2),
            grad_theta=np.zeros((m, 2)), new_segment=np.zeros(m, dtype=bool),
        )
        with pytest.raises(CriticFitError):
            lstd_fit(batch, gamma=0.95, ridge=0.0)

    def test_tiny_batch_raises(self):
        rng = np.random.default_rng(5)
        with pytest.raises(CriticFitError):
            lstd_fit(_synthetic_batch(rng, m=4), gamma=0.95)

    def test_batch_shape_validation(self):
        with pytest.raises(ValueError):
            Batch(
                s=np.zeros(3), a=np.zeros(3), cost=np.zeros(3),
                s_next=np.zeros(3), pi_s=np.zeros(3),
                grad_theta=np.zeros((3, 3)), new_segment=np.zeros(3, dtype=bool),
            )


class TestActor:
    @given(
        st.integers(10, 200),
        st.floats(0.05, 10.0),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=40, deadline=None)
    def test_gradient_ascends_critic_advantage(self, m, scale, seed):
        # g^T w = mean ||grad^T w||^2 >= 0: the estimate never points against
        # the critic's advantage slope.
        rng = np.random.default_rng(seed)
        batch = _synthetic_batch(rng, m=m)
        w = scale * rng.normal(size=2)
        g = policy_gradient(batch, w)
        assert g @ w >= -1e-12

    def test_policy_gradient_matches_manual_mean(self):
        rng = np.random.default_rng(6)
        batch = _synthetic_batch(rng, m=30)
        w = np.array([0.7, -0.2])
        manual = np.mean(
            [gr * (gr @ w) for gr in batch.grad_theta], axis=0
        )
        np.testing.assert_allclose(policy_gradient(batch, w), manual, rtol=1e-12)

    def test_actor_step_plain(self):
        theta, norm = actor_step([1.0, 2.0], [0.3, -0.4], lr=0.1, clip=10.0)
        np.testing.assert_allclose(theta, [0.97, 2.04])
        assert norm == pytest.approx(0.5)

    def test_actor_step_clips_to_ceiling(self):
        g = np.array([30.0, 40.0])  # norm 50
        theta, norm = actor_step([0.0, 0.0], g, lr=0.01, clip=10.0)
        assert norm == pytest.approx(50.0)  # reported pre-clip
        assert np.linalg.norm(theta) == pytest.approx(0.01 * 10.0)
        np.testing.assert_allclose(theta, -0.01 * g / 5.0)

    def test_actor_step_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            actor_step([0.0, 0.0], [np.nan, 1.0], lr=0.1)

    def test_learner_config_validation(self):
        with pytest.raises(ValueError):
            LearnerConfig(theta_init=(1.0, 2.0, 3.0))
        with pytest.raises(ValueError):
            LearnerConfig(lr=0.0)
        with pytest.raises(ValueError):
            LearnerConfig(gamma=1.0)
        with pytest.raises(ValueError):
            LearnerConfig(ridge=-1e-9)
        with pytest.raises(ValueError):
            LearnerConfig(n_steps=0)


MINI = LearnerConfig(
    theta_init=(6.0, 6.0), n_steps=2, batch_size=30, explore_std=0.3,
    gamma=0.9, eval_every=2, eval_rollouts=4, eval_horizon=90,
    snapshot_every=2, snapshot_points=9,
)


@pytest.fixture(scope="module")
def trace():
    return run_learning(EnvParams(), MpcConfig(), TauSchedule(), MINI, seed=7)


class TestLearningLoop:
    def test_trace_layout(self, trace):
        assert not trace.aborted
        n = MINI.n_steps
        np.testing.assert_array_equal(trace.step, np.arange(n + 1))
        np.testing.assert_allclose(trace.theta[0], MINI.theta_init)
        np.testing.assert_allclose(trace.tau, TauSchedule().at(trace.step))
        assert np.all(np.isfinite(trace.J))
        assert np.all(np.isfinite(trace.theta))
        assert trace.wall_clock > 0.0

    def test_snapshots(self, trace):
        np.testing.assert_array_equal(trace.snapshot_steps, [0, 2])
        assert trace.snapshot_u0.shape == (2, 9)
        assert trace.snapshot_ok.all()
        assert np.all(np.abs(trace.snapshot_u0) < MpcConfig().u_bound)

    def test_same_seed_bitwise_identical(self, trace):
        again = run_learning(EnvParams(), MpcConfig(), TauSchedule(), MINI, seed=7)
        np.testing.assert_array_equal(trace.theta, again.theta)
        np.testing.assert_array_equal(trace.J, again.J)
        np.testing.assert_array_equal(trace.grad_norm, again.grad_norm)
        np.testing.assert_array_equal(trace.critic_residual, again.critic_residual)
        np.testing.assert_array_equal(trace.snapshot_u0, again.snapshot_u0)

    def test_different_seed_differs(self, trace):
        other = run_learning(EnvParams(), MpcConfig(), TauSchedule(), MINI, seed=8)
        assert not np.array_equal(trace.theta, other.theta)

    def test_fixed_schedule_keeps_tau_constant(self):
        tr = run_learning(
            EnvParams(), MpcConfig(), TauSchedule.fixed(1e-3), MINI, seed=7
        )
        np.testing.assert_array_equal(tr.tau, 1e-3)

    def test_progress_callback_sees_every_step(self):
        seen = []
        run_learning(
            EnvParams(), MpcConfig(), TauSchedule(), MINI, seed=7,
            progress=lambda k, theta, J: seen.append(k),
        )
        assert seen == [1, 2]

    def test_theta_actually_moves(self, trace):
        assert np.linalg.norm(trace.theta[-1] - trace.theta[0]) > 0.0
        assert np.all(trace.grad_norm[1:] > 0.0)
