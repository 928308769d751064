import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdlab import (
    ConfigError,
    SplitMix64,
    TileCoderConfig,
    build_representation,
    canonical_task,
    generate_mdp,
    generate_mrp,
    sample_mdp_step,
    sample_step,
    stationary_distribution,
    tile_code,
    true_values,
)
from tdlab.envs import Mrp, binary_feature_length, mrp_from_dict, mrp_to_dict


def test_generate_mrp_structure():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=4)
    nonzeros = (mrp.P > 0).sum(axis=1)
    assert np.all(nonzeros == 3)
    assert np.all(np.abs(mrp.P.sum(axis=1) - 1.0) <= 1e-12)
    assert mrp.continuing


@given(st.integers(1, 12), st.integers(0, 2**48))
@settings(max_examples=60, deadline=None)
def test_generate_mrp_branching_property(k, seed):
    b = 1 + seed % k
    mrp = generate_mrp(k, b, 0.0, 0.9, seed=seed)
    assert np.all((mrp.P > 0).sum(axis=1) == b)
    assert np.all(np.abs(mrp.P.sum(axis=1) - 1.0) <= 1e-12)


def test_generate_mrp_single_state():
    mrp = generate_mrp(1, 1, 0.0, 0.9, seed=0)
    assert mrp.P.tolist() == [[1.0]]


def test_generate_mrp_deterministic():
    a = generate_mrp(10, 3, 0.1, 0.99, seed=123)
    b = generate_mrp(10, 3, 0.1, 0.99, seed=123)
    assert np.array_equal(a.P, b.P) and np.array_equal(a.r_mean, b.r_mean)


def test_generate_mrp_validates_branching():
    with pytest.raises(ConfigError):
        generate_mrp(10, 11, 0.1, 0.99, seed=0)


def test_generate_mdp_rows():
    mdp = generate_mdp(6, 2, 0.1, 0.9, num_actions=3, seed=5)
    assert mdp.P.shape == (6, 3, 6)
    assert np.all(np.abs(mdp.P.sum(axis=2) - 1.0) <= 1e-12)
    nxt, reward = sample_mdp_step(mdp, 0, 1, SplitMix64(1))
    assert 0 <= nxt < 6 and np.isfinite(reward)


def test_random_walk_task():
    mrp, rep = canonical_task("random-walk-10")
    for s in range(1, 10):
        assert mrp.P[s, s - 1] == 0.7
    assert mrp.P[0, 10] == 0.7  # leftmost exits to the terminal state
    assert mrp.P[9, 9] == 0.3  # rightmost self-loops on its right move
    assert mrp.gamma == 1.0 and mrp.initial == 9
    assert rep.kind == "tabular" and rep.n == 10
    assert not rep.phi(10).any()


def test_two_state_task_values():
    mrp, rep = canonical_task("two-state")
    v = true_values(mrp)
    assert v[0] == pytest.approx(2.0, abs=1e-12)
    assert v[1] == pytest.approx(0.0, abs=1e-12)
    assert rep.table[:2].tolist() == [[1.0], [1.0]]


def test_one_state_task_returns_one():
    mrp, rep = canonical_task("one-state")
    rng = SplitMix64(3)
    for _ in range(20):
        state, total = 0, 0.0
        while state not in mrp.terminal_states:
            state, r = sample_step(mrp, state, rng)
            total += r
        assert total == 1.0
    assert rep.n == 1 and rep.phi(0)[0] == 1.0


def test_unknown_task_fatal():
    with pytest.raises(ConfigError):
        canonical_task("three-state")


def test_sample_step_sigma_zero_exact():
    mrp = generate_mrp(8, 3, 0.0, 0.9, seed=9)
    rng = SplitMix64(1)
    for _ in range(100):
        s = rng.below(8)
        nxt, reward = sample_step(mrp, s, rng)
        assert reward == mrp.r_mean[s, nxt]


def test_sample_step_terminal_fatal():
    mrp, _ = canonical_task("one-state")
    with pytest.raises(ConfigError):
        sample_step(mrp, 1, SplitMix64(0))


def test_sample_step_frequencies_match_rows():
    mrp = generate_mrp(6, 3, 0.0, 0.9, seed=21)
    rng = SplitMix64(2)
    n = 100_000
    state = 2
    counts = np.zeros(6)
    for _ in range(n):
        nxt, _ = sample_step(mrp, state, rng)
        counts[nxt] += 1
    p = mrp.P[state]
    bound = 3.0 * np.sqrt(p * (1 - p) * n)
    assert np.all(np.abs(counts - n * p) <= bound + 1e-9)


def test_binary_representation_codes():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=1)
    rep = build_representation("binary", mrp, seed=0)
    assert rep.n == 4
    assert rep.phi(0).tolist() == [0, 0, 0, 1]  # first state encodes 1
    assert rep.phi(1).tolist() == [0, 0, 1, 0]
    assert rep.phi(2).tolist() == [0, 0, 1, 1]
    assert not any(np.array_equal(rep.phi(s), np.zeros(4)) for s in range(10))


def test_binary_length_k100():
    assert binary_feature_length(100) == 7
    mrp = generate_mrp(100, 10, 0.1, 0.99, seed=1)
    assert build_representation("binary", mrp).n == 7


def test_random_normalized_unit_length():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=1)
    rep = build_representation("random-normalized", mrp, seed=5)
    assert rep.n == 5
    norms = np.linalg.norm(rep.table, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-12)


def test_representation_determinism():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=1)
    a = build_representation("random-normalized", mrp, seed=5)
    b = build_representation("random-normalized", mrp, seed=5)
    assert np.array_equal(a.table, b.table)


def test_tile_coding_rejected_for_mrps():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=1)
    with pytest.raises(ConfigError):
        build_representation("tile-coding", mrp, seed=0)


def _coder(hash_size=4096, bias=True):
    return TileCoderConfig(
        num_tilings=8,
        bins_per_signal=10,
        signal_ranges=((0.0, 1.0), (0.0, 1.0)),
        hash_size=hash_size,
        bias_unit=bias,
    )


def test_tile_code_active_count():
    vec = tile_code([0.3, 0.7], _coder())
    assert vec.indices.shape[0] == 9
    assert np.all(vec.values == 1.0)
    no_bias = tile_code([0.3, 0.7], _coder(bias=False))
    assert no_bias.indices.shape[0] == 8


def test_tile_code_deterministic():
    a = tile_code([0.25, 0.5], _coder())
    b = tile_code([0.25, 0.5], _coder())
    assert np.array_equal(a.indices, b.indices)


def test_tile_code_same_micro_cell_same_features():
    cfg = _coder()
    # all tiling boundaries are multiples of bin_width / num_tilings
    micro = (1.0 / cfg.bins_per_signal) / cfg.num_tilings
    x = [100.2 * micro, 55.3 * micro]
    y = [100.8 * micro, 55.7 * micro]
    assert np.array_equal(tile_code(x, cfg).indices, tile_code(y, cfg).indices)


def test_tile_code_clips_out_of_range():
    cfg = _coder()
    assert np.array_equal(tile_code([-5.0, 2.0], cfg).indices, tile_code([0.0, 1.0], cfg).indices)


def test_tile_code_bias_always_last():
    cfg = _coder(hash_size=128)
    vec = tile_code([0.9, 0.1], cfg)
    assert vec.indices[-1] == 128
    assert vec.n == 129


def test_true_values_two_state_and_zero_rewards():
    mrp, _ = canonical_task("two-state")
    assert true_values(mrp)[:2] == pytest.approx([2.0, 0.0], abs=1e-12)
    silent = Mrp(k=2, P=np.array([[0.5, 0.5], [0.5, 0.5]]), r_mean=np.zeros((2, 2)),
                 sigma=0.0, gamma=0.9)
    assert np.all(true_values(silent) == 0.0)


def test_true_values_residual():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=8)
    v = true_values(mrp)
    residual = (np.eye(10) - mrp.gamma * mrp.P) @ v - mrp.expected_rewards()
    assert np.abs(residual).max() <= 1e-10


def test_true_values_random_walk_matches_monte_carlo():
    # independent oracle: vectorized simulation, 100k episodes per state
    mrp, _ = canonical_task("random-walk-10")
    v = true_values(mrp)
    rng = np.random.default_rng(20260811)
    episodes = 100_000
    for start in range(10):
        pos = np.full(episodes, start, dtype=np.int64)
        steps = np.zeros(episodes, dtype=np.int64)
        alive = np.ones(episodes, dtype=bool)
        while alive.any():
            moves = rng.random(alive.sum()) < 0.7
            cur = pos[alive]
            nxt = np.where(moves, cur - 1, np.minimum(cur + 1, 9))
            steps[alive] += 1
            pos[alive] = nxt
            still = nxt >= 0
            idx = np.flatnonzero(alive)
            alive[idx[~still]] = False
        mean, se = steps.mean(), steps.std(ddof=1) / np.sqrt(episodes)
        assert abs(v[start] - mean) <= 3 * se


def test_stationary_swap_chain():
    swap = Mrp(k=2, P=np.array([[0.0, 1.0], [1.0, 0.0]]), r_mean=np.zeros((2, 2)),
               sigma=0.0, gamma=0.9)
    assert stationary_distribution(swap) == pytest.approx([0.5, 0.5], abs=1e-12)


def test_stationary_single_state():
    one = Mrp(k=1, P=np.array([[1.0]]), r_mean=np.zeros((1, 1)), sigma=0.0, gamma=0.9)
    assert stationary_distribution(one).tolist() == [1.0]


def test_stationary_residual_random_mrp():
    mrp = generate_mrp(10, 3, 0.1, 0.99, seed=17)
    d = stationary_distribution(mrp)
    assert np.abs(d @ mrp.P - d).max() <= 1e-12
    assert d.sum() == pytest.approx(1.0, abs=1e-12)


def test_stationary_requires_continuing():
    mrp, _ = canonical_task("two-state")
    with pytest.raises(ConfigError):
        stationary_distribution(mrp)


def test_mrp_roundtrip_serialization():
    mrp = generate_mrp(7, 2, 0.3, 0.95, seed=33)
    data = mrp_to_dict(mrp)
    back = mrp_from_dict(data)
    assert np.array_equal(back.P, mrp.P)
    assert np.array_equal(back.r_mean, mrp.r_mean)
    assert back.sigma == mrp.sigma and back.gamma == mrp.gamma
    assert isinstance(back.initial, np.ndarray)
    with pytest.raises(ConfigError):
        mrp_from_dict({"format": "something-else"})


def test_mrp_row_sum_validation():
    with pytest.raises(ConfigError):
        Mrp(k=2, P=np.array([[0.5, 0.4], [0.5, 0.5]]), r_mean=np.zeros((2, 2)),
            sigma=0.0, gamma=0.9)


def test_mdp_roundtrip_serialization():
    from tdlab.envs import mdp_from_dict, mdp_to_dict

    mdp = generate_mdp(5, 2, 0.2, 0.9, num_actions=3, seed=8)
    back = mdp_from_dict(mdp_to_dict(mdp))
    assert np.array_equal(back.P, mdp.P)
    assert np.array_equal(back.r_mean, mdp.r_mean)
    assert back.num_actions == 3
    with pytest.raises(ConfigError):
        mdp_from_dict({"format": "tdlab-mrp"})
