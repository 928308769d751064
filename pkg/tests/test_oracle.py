import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdlab import (
    AccumulateTD,
    ConfigError,
    SplitMix64,
    Trajectory,
    Transition,
    TrueOnlineTD,
    TrueOnlineWatkinsQ,
    accumulating_trace_nonrecursive,
    build_representation,
    canonical_task,
    generate_mdp,
    generate_mrp,
    interim_lambda_return,
    lms_solution,
    n_step_return,
    offline_lambda_return,
    offline_lambda_return_algorithm,
    online_lambda_return_algorithm,
    prop2_condition_holds,
    run_control_episode,
    theorem1_diagnostics,
    theorem1_ratio,
    watkins_interim_target,
)
from tdlab.oracle import (
    constant_lookup,
    interim_lambda_returns_all,
    replay_watkins,
    theorem1_delta_terms,
    watkins_forward_view,
)
from tests.conftest import synthetic_trajectory


def one_state_episode(T):
    phi, zero = np.array([1.0]), np.array([0.0])
    steps = [Transition(phi, 0.0, phi, 1.0) for _ in range(T - 1)]
    steps.append(Transition(phi, 1.0, zero, 1.0, terminal=True))
    return Trajectory(steps=steps)


class TestNStepReturn:
    def test_one_step_definition(self):
        traj = synthetic_trajectory(SplitMix64(1), n=3, steps=10)
        theta = np.random.default_rng(0).normal(size=3)
        got = n_step_return(traj, 2, 1, constant_lookup(theta))
        want = traj.steps[2].reward + 0.9 * float(theta @ traj.steps[2].phi_next)
        assert got == pytest.approx(want, abs=1e-15)

    def test_terminal_truncation_drops_bootstrap(self):
        traj = one_state_episode(3)
        big = np.array([1e6])
        assert n_step_return(traj, 0, 3, constant_lookup(big)) == 1.0
        assert n_step_return(traj, 0, 10, constant_lookup(big)) == 1.0

    def test_three_step_manual_sum(self):
        traj = synthetic_trajectory(SplitMix64(2), n=3, steps=10, gamma=0.8)
        theta = np.random.default_rng(1).normal(size=3)
        s = traj.steps
        want = (
            s[1].reward
            + 0.8 * s[2].reward
            + 0.8**2 * s[3].reward
            + 0.8**3 * float(theta @ s[3].phi_next)
        )
        got = n_step_return(traj, 1, 3, constant_lookup(theta))
        assert got == pytest.approx(want, rel=1e-14)

    def test_horizon_beyond_data_fatal(self):
        traj = synthetic_trajectory(SplitMix64(3), n=2, steps=5)
        with pytest.raises(ConfigError):
            n_step_return(traj, 3, 5, constant_lookup(np.zeros(2)))


class TestInterimLambdaReturn:
    def test_h_equals_k_plus_one(self):
        traj = synthetic_trajectory(SplitMix64(4), n=3, steps=8)
        theta = np.random.default_rng(2).normal(size=3)
        got = interim_lambda_return(traj, 2, 3, 0.7, constant_lookup(theta))
        want = traj.steps[2].reward + 0.9 * float(theta @ traj.steps[2].phi_next)
        assert got == pytest.approx(want, abs=1e-15)

    def test_lambda_one_collapses_to_n_step(self):
        traj = synthetic_trajectory(SplitMix64(5), n=3, steps=9)
        theta = np.random.default_rng(3).normal(size=3)
        got = interim_lambda_return(traj, 1, 7, 1.0, constant_lookup(theta))
        want = n_step_return(traj, 1, 6, constant_lookup(theta))
        assert got == pytest.approx(want, rel=1e-13)

    @given(st.integers(0, 2**32), st.floats(0.0, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_telescoping_recursion(self, seed, lam):
        """G^{lam|h+1} - G^{lam|h} = (lam*gamma)^{h-k} * delta'_h."""
        rng = SplitMix64(seed)
        traj = synthetic_trajectory(rng, n=3, steps=12, gamma=0.9)
        thetas = [np.array([rng.normal() for _ in range(3)]) for _ in range(13)]
        lookup = lambda j: thetas[j]
        k = 2
        for h in range(k + 1, 11):
            step_h = traj.steps[h]
            delta_mod = (
                step_h.reward
                + 0.9 * float(thetas[h] @ step_h.phi_next)
                - float(thetas[h - 1] @ step_h.phi)
            )
            lhs = interim_lambda_return(traj, k, h + 1, lam, lookup) - interim_lambda_return(
                traj, k, h, lam, lookup
            )
            assert lhs == pytest.approx((lam * 0.9) ** (h - k) * delta_mod, abs=1e-12)

    @given(st.integers(0, 2**32))
    @settings(max_examples=30, deadline=None)
    def test_modified_td_error_relation(self, seed):
        """delta'_t - delta_t = theta_t.phi_t - theta_{t-1}.phi_t."""
        rng = SplitMix64(seed)
        traj = synthetic_trajectory(rng, n=3, steps=10, gamma=0.9)
        thetas = [np.array([rng.normal() for _ in range(3)]) for _ in range(11)]
        for t in range(1, 10):
            step = traj.steps[t]
            v_next = 0.9 * float(thetas[t] @ step.phi_next)
            delta = step.reward + v_next - float(thetas[t] @ step.phi)
            delta_mod = step.reward + v_next - float(thetas[t - 1] @ step.phi)
            gap = float((thetas[t] - thetas[t - 1]) @ step.phi)
            assert delta_mod - delta == pytest.approx(gap, abs=1e-12)

    @given(st.integers(0, 2**32), st.floats(0.0, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_backward_sweep_matches_definition(self, seed, lam):
        rng = SplitMix64(seed)
        traj = synthetic_trajectory(rng, n=3, steps=10, gamma=0.85)
        thetas = [np.array([rng.normal() for _ in range(3)]) for _ in range(11)]
        lookup = lambda j: thetas[j]
        h = 9
        fast = interim_lambda_returns_all(traj, h, lam, lookup)
        for k in range(h):
            assert fast[k] == pytest.approx(
                interim_lambda_return(traj, k, h, lam, lookup), rel=1e-12, abs=1e-12
            )

    def test_invalid_horizon_fatal(self):
        traj = synthetic_trajectory(SplitMix64(6), n=2, steps=5)
        with pytest.raises(ConfigError):
            interim_lambda_return(traj, 3, 3, 0.5, constant_lookup(np.zeros(2)))


class TestOfflineLambdaReturn:
    def test_lambda_zero_is_one_step(self):
        traj = one_state_episode(4)
        theta = np.array([0.25])
        got = offline_lambda_return(traj, 0, 0.0, constant_lookup(theta))
        assert got == pytest.approx(0.0 + 1.0 * 0.25, abs=1e-15)

    def test_lambda_one_is_monte_carlo(self):
        traj = one_state_episode(5)
        got = offline_lambda_return(traj, 0, 1.0, constant_lookup(np.array([123.0])))
        assert got == 1.0  # no bootstrapping at lambda=1

    def test_incomplete_episode_fatal(self):
        traj = synthetic_trajectory(SplitMix64(7), n=2, steps=5)
        with pytest.raises(ConfigError):
            offline_lambda_return(traj, 0, 0.5, constant_lookup(np.zeros(2)))

    def test_equals_interim_at_full_horizon(self):
        traj = synthetic_trajectory(SplitMix64(8), n=3, steps=7, episodic=True)
        theta = np.random.default_rng(5).normal(size=3)
        for t in range(4):
            a = offline_lambda_return(traj, t, 0.6, constant_lookup(theta))
            b = interim_lambda_return(traj, t, len(traj), 0.6, constant_lookup(theta))
            assert a == b


class TestOnlineLambdaReturnAlgorithm:
    def test_first_step_single_update(self):
        traj = synthetic_trajectory(SplitMix64(9), n=3, steps=6)
        theta0 = np.zeros(3)
        run = online_lambda_return_algorithm(traj, 0.5, 0.8, theta0)
        g0 = interim_lambda_return(traj, 0, 1, 0.8, constant_lookup(theta0))
        phi0 = traj.steps[0].phi
        want = theta0 + 0.5 * (g0 - 0.0) * phi0
        assert np.abs(run.theta_history[1] - want).max() <= 1e-14

    def test_one_state_closed_form(self):
        for T, alpha in [(3, 0.5), (6, 0.2), (1, 1.0)]:
            run = online_lambda_return_algorithm(one_state_episode(T), alpha, 1.0, np.zeros(1))
            assert run.theta_history[-1][0] == pytest.approx(
                1 - (1 - alpha) ** T, abs=1e-13
            )

    def test_matches_true_online_everywhere(self, walk_episode):
        traj, n = walk_episode
        for alpha, lam in [(0.2, 1.0), (0.9, 0.5), (1.5, 0.95)]:
            run = online_lambda_return_algorithm(traj, alpha, lam, np.zeros(n))
            learner = TrueOnlineTD(n, alpha=alpha, lam=lam)
            for j, step in enumerate(traj.steps):
                learner.step(step)
                denom = 1.0 + np.abs(run.theta_history[j + 1]).max()
                assert np.abs(learner.theta - run.theta_history[j + 1]).max() / denom <= 1e-8

    def test_intermediate_weights(self):
        traj = synthetic_trajectory(SplitMix64(10), n=3, steps=6)
        run = online_lambda_return_algorithm(traj, 0.3, 0.7, np.zeros(3))
        assert np.array_equal(run.intermediate(4, 0), np.zeros(3))
        assert np.abs(run.intermediate(4, 4) - run.theta_history[4]).max() <= 1e-14


class TestOfflineLambdaReturnAlgorithm:
    def test_requires_complete_episode(self):
        traj = synthetic_trajectory(SplitMix64(11), n=2, steps=5)
        with pytest.raises(ConfigError):
            offline_lambda_return_algorithm(traj, 0.1, 0.5, np.zeros(2))

    def test_lambda_one_equals_online_final(self):
        traj = synthetic_trajectory(SplitMix64(12), n=3, steps=8, episodic=True)
        theta0 = np.random.default_rng(7).normal(size=3)
        off = offline_lambda_return_algorithm(traj, 0.4, 1.0, theta0)
        on = online_lambda_return_algorithm(traj, 0.4, 1.0, theta0).theta_history[-1]
        assert np.abs(off - on).max() <= 1e-12

    def test_supervised_regression_toward_returns(self):
        traj = one_state_episode(4)
        theta = offline_lambda_return_algorithm(traj, 0.25, 1.0, np.zeros(1))
        # four sequential nudges toward the Monte Carlo return of 1
        assert theta[0] == pytest.approx(1 - 0.75**4, abs=1e-15)


class TestWatkins:
    def _control_traj(self, epsilon, seed=13, steps=80):
        mdp = generate_mdp(6, 3, 0.1, 0.9, num_actions=3, seed=seed)
        rep = build_representation("tabular", generate_mrp(6, 3, 0.1, 0.9, seed=1), seed=0)
        learner = TrueOnlineWatkinsQ(rep.n, 3, alpha=0.4, lam=0.8)
        traj = run_control_episode(
            learner, mdp, rep, SplitMix64(seed), epsilon=epsilon, max_steps=steps
        )
        return traj, rep.n * 3

    def test_all_greedy_matches_interim_with_max_bootstrap(self):
        traj, n = self._control_traj(epsilon=0.0)
        assert all(traj.greedy)
        theta = np.random.default_rng(5).normal(size=n)
        lookup = constant_lookup(theta)
        lam, t, h = 0.8, 3, 10
        # definitional mixture with max-bootstrapped n-step returns; tau is
        # infinite on an all-greedy trajectory so z = h
        def g_tilde(num):
            total, disc = 0.0, 1.0
            for m in range(num):
                step = traj.steps[t + m]
                total += disc * step.reward
                disc *= step.gamma
            boot = (theta.reshape(3, -1) @ traj.phi(t + num)).max()
            return total + disc * boot

        want = sum((1 - lam) * lam ** (num - 1) * g_tilde(num) for num in range(1, h - t))
        want += lam ** (h - t - 1) * g_tilde(h - t)
        got = watkins_interim_target(traj, t, h, lam, lookup)
        assert got == pytest.approx(want, rel=1e-13)

    def test_tau_next_step_gives_one_step_target(self):
        traj, n = self._control_traj(epsilon=0.5, seed=21)
        greedy = traj.greedy
        t = next(j for j in range(len(traj) - 1) if not greedy[j + 1])
        theta = np.random.default_rng(3).normal(size=n)
        u = watkins_interim_target(traj, t, len(traj), 0.8, constant_lookup(theta))
        step = traj.steps[t]
        q = (theta.reshape(3, -1) @ step.phi_next).max()
        assert u == pytest.approx(step.reward + step.gamma * q, rel=1e-13)

    def test_replay_matches_forward_view(self):
        for eps, seed in [(0.3, 31), (0.15, 32), (0.6, 33)]:
            traj, n = self._control_traj(epsilon=eps, seed=seed)
            a = replay_watkins(traj, 0.4, 0.8, np.zeros(n))
            b = watkins_forward_view(traj, 0.4, 0.8, np.zeros(n))
            denom = 1.0 + np.abs(b).max(axis=1)
            assert (np.abs(a - b).max(axis=1) / denom).max() <= 1e-8

    def test_missing_annotations_fatal(self):
        traj = synthetic_trajectory(SplitMix64(14), n=2, steps=5)
        with pytest.raises(ConfigError):
            watkins_interim_target(traj, 0, 3, 0.5, constant_lookup(np.zeros(2)))


class TestNonRecursiveTrace:
    @given(st.integers(0, 2**32), st.floats(0.0, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_equals_recursive_accumulating_trace(self, seed, lam):
        traj = synthetic_trajectory(SplitMix64(seed), n=4, steps=12, gamma=0.9)
        learner = AccumulateTD(4, alpha=0.0, lam=lam)
        for t, step in enumerate(traj.steps, start=1):
            learner.step(step)
            closed = accumulating_trace_nonrecursive(traj, t, lam)
            assert np.abs(learner.e - closed).max() <= 1e-12 * max(1.0, np.abs(closed).max())

    def test_t_one_is_phi0(self):
        traj = synthetic_trajectory(SplitMix64(15), n=3, steps=5)
        assert np.array_equal(accumulating_trace_nonrecursive(traj, 1, 0.7), traj.steps[0].phi)

    def test_lambda_zero_is_latest_phi(self):
        traj = synthetic_trajectory(SplitMix64(16), n=3, steps=5)
        got = accumulating_trace_nonrecursive(traj, 4, 0.0)
        assert np.array_equal(got, traj.steps[3].phi)


class TestProp2Condition:
    def test_disjoint_one_hot_chain_holds(self):
        eye = np.eye(5)
        steps = [
            Transition(eye[s], 0.1, np.zeros(5) if s == 4 else eye[s + 1], 1.0, terminal=s == 4)
            for s in range(5)
        ]
        assert prop2_condition_holds(Trajectory(steps=steps))

    def test_always_active_feature_fails(self):
        phi = np.ones(1)
        steps = [Transition(phi, 1.0, phi, 1.0), Transition(phi, 1.0, np.zeros(1), 1.0, terminal=True)]
        assert not prop2_condition_holds(Trajectory(steps=steps))

    def test_revisit_fails(self):
        eye = np.eye(3)
        steps = [
            Transition(eye[0], 0.0, eye[1], 1.0),
            Transition(eye[1], 0.0, eye[0], 1.0),
            Transition(eye[0], 0.0, np.zeros(3), 1.0, terminal=True),
        ]
        assert not prop2_condition_holds(Trajectory(steps=steps))

    def test_sparse_disjoint_activations_hold(self):
        rng = np.random.default_rng(8)
        n, T = 24, 8
        perm = rng.permutation(n)
        steps = []
        for t in range(T):
            phi = np.zeros(n)
            phi[perm[3 * t : 3 * t + 3]] = rng.normal(size=3)
            nxt = np.zeros(n)
            if t + 1 < T:
                nxt[perm[3 * (t + 1) : 3 * (t + 1) + 3]] = 1.0
            steps.append(Transition(phi, 0.0, nxt, 0.9, terminal=t + 1 == T))
        assert prop2_condition_holds(Trajectory(steps=steps))


class TestTheoremOne:
    def test_lambda_zero_ratio_is_zero(self, walk_episode):
        traj, n = walk_episode
        assert theorem1_ratio(traj, 0.05, 0.0, np.zeros(n)) == 0.0

    def test_ratios_decrease_with_alpha(self, walk_episode):
        traj, n = walk_episode
        ratios = [theorem1_ratio(traj, a, 0.9, np.zeros(n)) for a in (1e-1, 1e-2, 1e-3)]
        assert ratios[0] > ratios[1] > ratios[2] > 0.0

    def test_ratio_scales_linearly_in_alpha(self, walk_episode):
        traj, n = walk_episode
        r2 = theorem1_ratio(traj, 1e-2, 0.9, np.zeros(n))
        r3 = theorem1_ratio(traj, 1e-3, 0.9, np.zeros(n))
        r4 = theorem1_ratio(traj, 1e-4, 0.9, np.zeros(n))
        assert 0.03 <= r3 / r2 <= 0.3
        assert 0.03 <= r4 / r3 <= 0.3

    def test_delta_terms_are_step_size_free(self, walk_episode):
        traj, n = walk_episode
        d1 = theorem1_diagnostics(traj, 0.1, 0.9, np.zeros(n))
        d2 = theorem1_diagnostics(traj, 0.001, 0.9, np.zeros(n))
        assert np.array_equal(d1.delta_terms, d2.delta_terms)

    def test_delta_terms_match_definitional_interim(self, walk_episode):
        traj, n = walk_episode
        theta0 = np.full(n, 0.3)
        deltas = theorem1_delta_terms(traj, 0.9, theta0)
        T = len(traj)
        for i in (0, T // 2, T - 1):
            g_bar = interim_lambda_return(traj, i, T, 0.9, constant_lookup(theta0))
            phi = traj.steps[i].phi
            want = (g_bar - float(theta0 @ phi)) * phi
            assert np.abs(deltas[i] - want).max() <= 1e-12

    def test_degenerate_inputs_raise(self):
        phi = np.ones(1)
        # zero rewards and zero weights: every update direction is zero
        steps = [Transition(phi, 0.0, phi, 1.0), Transition(phi, 0.0, np.zeros(1), 1.0, terminal=True)]
        with pytest.raises(ConfigError):
            theorem1_ratio(Trajectory(steps=steps), 0.1, 0.9, np.zeros(1))


class TestLmsSolution:
    def test_tabular_is_exact(self):
        mrp = generate_mrp(8, 3, 0.1, 0.95, seed=40)
        rep = build_representation("tabular", mrp, seed=0)
        theta, mse = lms_solution(mrp, rep)
        from tdlab import true_values

        assert np.abs(theta - true_values(mrp)).max() <= 1e-9
        assert mse <= 1e-18

    def test_two_state_uniform_weighting(self):
        mrp, rep = canonical_task("two-state")
        theta, mse = lms_solution(mrp, rep, weighting="uniform")
        assert theta[0] == pytest.approx(1.0, abs=1e-12)
        assert np.sqrt(mse) == pytest.approx(1.0, abs=1e-12)

    def test_gradient_at_solution_vanishes(self):
        mrp = generate_mrp(10, 3, 0.1, 0.99, seed=41)
        rep = build_representation("random-normalized", mrp, seed=2)
        theta, _ = lms_solution(mrp, rep)
        from tdlab import stationary_distribution, true_values

        d = stationary_distribution(mrp)
        phi = rep.table
        grad = -2.0 * phi.T @ (d * (true_values(mrp) - phi @ theta))
        assert np.linalg.norm(grad) <= 1e-10

    def test_rank_deficient_features_fall_back_to_pinv(self):
        mrp = generate_mrp(6, 2, 0.0, 0.9, seed=42)
        table = np.zeros((6, 3))
        table[:, 0] = 1.0
        table[:, 1] = 2.0  # linearly dependent column
        from tdlab.envs import Representation

        rep = Representation(kind="binary", table=table, n=3)
        theta, mse = lms_solution(mrp, rep)
        assert np.all(np.isfinite(theta)) and mse >= 0.0
