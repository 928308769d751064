"""Environment generators and feature-representation builders.

Random Markov reward processes are described by a 3-tuple (k, b, sigma):
k states, branching factor b, and reward noise sigma. Construction draws,
for each state, b distinct successors uniformly without replacement,
transition probabilities from b-1 sorted uniform cut points of the unit
interval, and expected rewards from a standard normal. Generated chains
are continuing (no terminal states).

Three canonical small tasks are provided by name, plus three discrete
representations (tabular / binary / random-normalized) and a hashed tile
coder for continuous signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, SparseVector
from .rng import SplitMix64, mix64

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Mrp:
    """Markov reward process: P[s, s'], expected rewards, reward noise, discount."""

    k: int
    P: np.ndarray
    r_mean: np.ndarray
    sigma: float
    gamma: float
    terminal_states: frozenset[int] = frozenset()
    initial: int | np.ndarray = 0
    b: int | None = None
    name: str | None = None

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r_mean", np.asarray(self.r_mean, dtype=np.float64))
        if P.shape != (self.k, self.k) or self.r_mean.shape != (self.k, self.k):
            raise ConfigError("P and r_mean must be k x k")
        bad = np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL
        if bad.any():
            raise ConfigError(f"transition rows must sum to 1: states {np.nonzero(bad)[0]}")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")

    @property
    def continuing(self) -> bool:
        return not self.terminal_states

    def nonterminal_states(self) -> np.ndarray:
        return np.array([s for s in range(self.k) if s not in self.terminal_states])

    def expected_rewards(self) -> np.ndarray:
        """r_bar[s] = sum_s' P[s, s'] r_mean[s, s']."""
        return (self.P * self.r_mean).sum(axis=1)

    def initial_state(self, rng: SplitMix64) -> int:
        if isinstance(self.initial, (int, np.integer)):
            return int(self.initial)
        dist = np.asarray(self.initial, dtype=np.float64)
        u = rng.random()
        return int(np.searchsorted(np.cumsum(dist), u, side="right").clip(0, self.k - 1))


@dataclass(frozen=True)
class Mdp:
    """As Mrp but with P and r_mean indexed by (state, action, next state)."""

    k: int
    num_actions: int
    P: np.ndarray
    r_mean: np.ndarray
    sigma: float
    gamma: float
    terminal_states: frozenset[int] = frozenset()
    initial: int | np.ndarray = 0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r_mean", np.asarray(self.r_mean, dtype=np.float64))
        shape = (self.k, self.num_actions, self.k)
        if P.shape != shape or self.r_mean.shape != shape:
            raise ConfigError("P and r_mean must be k x num_actions x k")
        if np.any(np.abs(P.sum(axis=2) - 1.0) > ROW_SUM_TOL):
            raise ConfigError("each (state, action) row of P must sum to 1")

    def initial_state(self, rng: SplitMix64) -> int:
        if isinstance(self.initial, (int, np.integer)):
            return int(self.initial)
        dist = np.asarray(self.initial, dtype=np.float64)
        u = rng.random()
        return int(np.searchsorted(np.cumsum(dist), u, side="right").clip(0, self.k - 1))


@dataclass(frozen=True)
class Representation:
    """State-to-feature mapping as a fixed k x n table; terminal rows are zero."""

    kind: str
    table: np.ndarray
    n: int

    def phi(self, state: int) -> np.ndarray:
        return self.table[state]


def _cut_point_probabilities(rng: SplitMix64, b: int) -> np.ndarray:
    if b == 1:
        return np.array([1.0])
    cuts = np.sort(np.array([rng.random() for _ in range(b - 1)]))
    return np.diff(np.concatenate(([0.0], cuts, [1.0])))


def generate_mrp(k: int, b: int, sigma: float, gamma: float, seed: int) -> Mrp:
    """Random continuing MRP; deterministic given the seed.

    Per state, in stream order: b successors, b-1 cut points, b expected
    rewards. The initial-state distribution is uniform.
    """
    if not 1 <= b <= k:
        raise ConfigError(f"branching factor {b} must satisfy 1 <= b <= k={k}")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    rng = SplitMix64(seed)
    P = np.zeros((k, k))
    r_mean = np.zeros((k, k))
    for s in range(k):
        successors = rng.sample_without_replacement(k, b)
        probs = _cut_point_probabilities(rng, b)
        for nxt, p in zip(successors, probs):
            P[s, nxt] = p
        for nxt in successors:
            r_mean[s, nxt] = rng.normal()
    return Mrp(
        k=k, P=P, r_mean=r_mean, sigma=sigma, gamma=gamma,
        initial=np.full(k, 1.0 / k), b=b, name=f"mrp({k},{b},{sigma:g})",
    )


def generate_mdp(
    k: int, b: int, sigma: float, gamma: float, num_actions: int, seed: int
) -> Mdp:
    """Random continuing MDP: the MRP construction applied once per action."""
    if not 1 <= b <= k:
        raise ConfigError(f"branching factor {b} must satisfy 1 <= b <= k={k}")
    rng = SplitMix64(seed)
    P = np.zeros((k, num_actions, k))
    r_mean = np.zeros((k, num_actions, k))
    for a in range(num_actions):
        for s in range(k):
            successors = rng.sample_without_replacement(k, b)
            probs = _cut_point_probabilities(rng, b)
            for nxt, p in zip(successors, probs):
                P[s, a, nxt] = p
            for nxt in successors:
                r_mean[s, a, nxt] = rng.normal()
    return Mdp(
        k=k, num_actions=num_actions, P=P, r_mean=r_mean, sigma=sigma, gamma=gamma,
        initial=np.full(k, 1.0 / k),
    )


def sample_step(mrp: Mrp, state: int, rng: SplitMix64) -> tuple[int, float]:
    """Draw (next state, reward) from one MRP step."""
    if state in mrp.terminal_states:
        raise ConfigError(f"cannot step from terminal state {state}")
    u = rng.random()
    nxt = int(np.searchsorted(np.cumsum(mrp.P[state]), u, side="right").clip(0, mrp.k - 1))
    mean = mrp.r_mean[state, nxt]
    reward = mean if mrp.sigma == 0.0 else rng.normal(mean, mrp.sigma)
    return nxt, reward


def sample_mdp_step(mdp: Mdp, state: int, action: int, rng: SplitMix64) -> tuple[int, float]:
    if state in mdp.terminal_states:
        raise ConfigError(f"cannot step from terminal state {state}")
    row = mdp.P[state, action]
    u = rng.random()
    nxt = int(np.searchsorted(np.cumsum(row), u, side="right").clip(0, mdp.k - 1))
    mean = mdp.r_mean[state, action, nxt]
    reward = mean if mdp.sigma == 0.0 else rng.normal(mean, mdp.sigma)
    return nxt, reward


CANONICAL_TASKS = ("random-walk-10", "one-state", "two-state")

# Not stated for the one-state task; 0.9 gives mean episode length 10, which
# reproduces the reported step-size sensitivity contrast at desk scale.
ONE_STATE_CONTINUE_PROB = 0.9


def canonical_task(name: str) -> tuple[Mrp, Representation]:
    """Small tasks with known structure, by name.

    random-walk-10: ten states in a row plus a terminal state on the left
    (index 10). Each state moves left with probability 0.7 and right with
    0.3 (the right-most state self-loops on its right move). All rewards
    are 1, gamma = 1, tabular features, right-most state initial.

    one-state: a single always-active unit feature; the state self-loops
    with reward 0 and ends the episode with reward 1, so every episode's
    return is 1 under gamma = 1.

    two-state: left -> right -> terminal with rewards 2 then 0, gamma = 1,
    and a single always-1 feature shared by both states; true values are
    (2, 0) and the best single weight is 1 (RMS error 1).
    """
    if name == "random-walk-10":
        k = 11
        terminal = 10
        P = np.zeros((k, k))
        r = np.zeros((k, k))
        for s in range(10):
            left = terminal if s == 0 else s - 1
            right = s if s == 9 else s + 1
            P[s, left] += 0.7
            P[s, right] += 0.3
            r[s, left] = 1.0
            r[s, right] = 1.0
        P[terminal, terminal] = 1.0
        mrp = Mrp(
            k=k, P=P, r_mean=r, sigma=0.0, gamma=1.0,
            terminal_states=frozenset({terminal}), initial=9, name=name,
        )
        table = np.zeros((k, 10))
        table[:10, :10] = np.eye(10)
        return mrp, Representation(kind="tabular", table=table, n=10)
    if name == "one-state":
        p = ONE_STATE_CONTINUE_PROB
        P = np.array([[p, 1.0 - p], [0.0, 1.0]])
        r = np.array([[0.0, 1.0], [0.0, 0.0]])
        mrp = Mrp(
            k=2, P=P, r_mean=r, sigma=0.0, gamma=1.0,
            terminal_states=frozenset({1}), initial=0, name=name,
        )
        table = np.array([[1.0], [0.0]])
        return mrp, Representation(kind="tabular", table=table, n=1)
    if name == "two-state":
        P = np.array([
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0],
        ])
        r = np.zeros((3, 3))
        r[0, 1] = 2.0
        mrp = Mrp(
            k=3, P=P, r_mean=r, sigma=0.0, gamma=1.0,
            terminal_states=frozenset({2}), initial=0, name=name,
        )
        table = np.array([[1.0], [1.0], [0.0]])
        return mrp, Representation(kind="binary", table=table, n=1)
    raise ConfigError(f"unknown canonical task {name!r}; expected one of {CANONICAL_TASKS}")


REPRESENTATION_KINDS = ("tabular", "binary", "random-normalized")


def binary_feature_length(k: int) -> int:
    return math.ceil(math.log2(k + 1))


def build_representation(kind: str, mrp: Mrp, seed: int = 0) -> Representation:
    """Feature table for a discrete MRP; deterministic given (kind, mrp, seed).

    binary encodes the 1-based state index so no state shares the all-zero
    terminal code; random-normalized draws 5 standard-normal features per
    state and scales them to unit length.
    """
    if kind == "tile-coding":
        raise ConfigError("tile coding applies to continuous signals, not discrete MRPs")
    if kind not in REPRESENTATION_KINDS:
        raise ConfigError(f"unknown representation {kind!r}; expected one of {REPRESENTATION_KINDS}")
    k = mrp.k
    if kind == "tabular":
        table = np.eye(k)
    elif kind == "binary":
        n = binary_feature_length(k)
        table = np.zeros((k, n))
        for s in range(k):
            code = s + 1
            table[s] = [(code >> (n - 1 - j)) & 1 for j in range(n)]
    else:
        rng = SplitMix64(seed)
        table = np.zeros((k, 5))
        for s in range(k):
            row = np.array([rng.normal() for _ in range(5)])
            table[s] = row / np.linalg.norm(row)
    for s in mrp.terminal_states:
        table[s] = 0.0
    return Representation(kind=kind, table=table, n=table.shape[1])


@dataclass(frozen=True)
class TileCoderConfig:
    """Hashed grid tile coder over continuous signals normalized to [0, 1].

    Tiling i is offset by i/num_tilings of one bin width; each tiling
    contributes one active feature, hashed into hash_size buckets, plus an
    optional always-on bias unit at the last index.
    """

    num_tilings: int
    bins_per_signal: int
    signal_ranges: tuple[tuple[float, float], ...]
    hash_size: int
    bias_unit: bool = True

    def __post_init__(self):
        object.__setattr__(
            self, "signal_ranges", tuple((float(lo), float(hi)) for lo, hi in self.signal_ranges)
        )
        if self.num_tilings < 1 or self.bins_per_signal < 1 or self.hash_size < 1:
            raise ConfigError("tile coder counts must be positive")
        for lo, hi in self.signal_ranges:
            if not hi > lo:
                raise ConfigError("each signal range must have hi > lo")

    @property
    def n(self) -> int:
        return self.hash_size + (1 if self.bias_unit else 0)

    @property
    def active_features(self) -> int:
        return self.num_tilings + (1 if self.bias_unit else 0)


def tile_code(signals: list[float] | np.ndarray, config: TileCoderConfig) -> SparseVector:
    """Sparse binary encoding of the signals; out-of-range values are clipped."""
    signals = np.asarray(signals, dtype=np.float64)
    if signals.shape[0] != len(config.signal_ranges):
        raise ConfigError(
            f"expected {len(config.signal_ranges)} signals, got {signals.shape[0]}"
        )
    unit = np.empty_like(signals)
    for d, (lo, hi) in enumerate(config.signal_ranges):
        unit[d] = (min(max(signals[d], lo), hi) - lo) / (hi - lo)
    nt = config.num_tilings
    indices = np.empty(config.active_features, dtype=np.int64)
    for i in range(nt):
        h = mix64(i + 1)
        for d in range(unit.shape[0]):
            coord = int(unit[d] * config.bins_per_signal + i / nt)
            h = mix64(h ^ mix64((coord << 8) + d + 1))
        indices[i] = h % config.hash_size
    if config.bias_unit:
        indices[nt] = config.hash_size
    return SparseVector(config.n, indices, np.ones(config.active_features))


def true_values(mrp: Mrp) -> np.ndarray:
    """Exact state values from the Bellman linear system (I - gamma P) v = r_bar.

    Terminal states are pinned at 0 and the system is solved on the
    transient part, which also covers gamma = 1 for episodic chains.
    """
    r_bar = mrp.expected_rewards()
    if mrp.continuing:
        if mrp.gamma >= 1.0:
            raise ConfigError("continuing chain requires gamma < 1 for finite values")
        return np.linalg.solve(np.eye(mrp.k) - mrp.gamma * mrp.P, r_bar)
    nt = mrp.nonterminal_states()
    A = np.eye(nt.size) - mrp.gamma * mrp.P[np.ix_(nt, nt)]
    v = np.zeros(mrp.k)
    v[nt] = np.linalg.solve(A, r_bar[nt])
    return v


def stationary_distribution(mrp: Mrp, tol: float = 1e-12, max_iter: int = 200_000) -> np.ndarray:
    """Stationary distribution of a continuing chain by power iteration."""
    if not mrp.continuing:
        raise ConfigError("stationary distribution requires a continuing chain")
    d = np.full(mrp.k, 1.0 / mrp.k)
    for _ in range(max_iter):
        d_next = d @ mrp.P
        d_next /= d_next.sum()
        if np.max(np.abs(d_next - d_next @ mrp.P)) <= tol:
            return d_next
        d = d_next
    raise RuntimeError(
        f"power iteration did not reach residual {tol:g} in {max_iter} iterations; "
        "the chain may be periodic or reducible"
    )


MRP_FORMAT = "tdlab-mrp"
MDP_FORMAT = "tdlab-mdp"
FORMAT_VERSION = 1


def mrp_to_dict(mrp: Mrp) -> dict:
    """Versioned, self-describing form used by the env file format."""
    initial = mrp.initial
    return {
        "format": MRP_FORMAT,
        "version": FORMAT_VERSION,
        "k": mrp.k,
        "b": mrp.b,
        "sigma": mrp.sigma,
        "gamma": mrp.gamma,
        "P": mrp.P.tolist(),
        "r_mean": mrp.r_mean.tolist(),
        "terminal_states": sorted(mrp.terminal_states),
        "initial": initial.tolist() if isinstance(initial, np.ndarray) else int(initial),
        "name": mrp.name,
    }


def mdp_to_dict(mdp: Mdp) -> dict:
    initial = mdp.initial
    return {
        "format": MDP_FORMAT,
        "version": FORMAT_VERSION,
        "k": mdp.k,
        "num_actions": mdp.num_actions,
        "sigma": mdp.sigma,
        "gamma": mdp.gamma,
        "P": mdp.P.tolist(),
        "r_mean": mdp.r_mean.tolist(),
        "terminal_states": sorted(mdp.terminal_states),
        "initial": initial.tolist() if isinstance(initial, np.ndarray) else int(initial),
    }


def mdp_from_dict(data: dict) -> Mdp:
    if data.get("format") != MDP_FORMAT:
        raise ConfigError(f"not an MDP file (format={data.get('format')!r})")
    if data.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported MDP file version {data.get('version')!r}")
    initial = data["initial"]
    if isinstance(initial, list):
        initial = np.asarray(initial, dtype=np.float64)
    return Mdp(
        k=int(data["k"]),
        num_actions=int(data["num_actions"]),
        P=np.asarray(data["P"], dtype=np.float64),
        r_mean=np.asarray(data["r_mean"], dtype=np.float64),
        sigma=float(data["sigma"]),
        gamma=float(data["gamma"]),
        terminal_states=frozenset(int(s) for s in data["terminal_states"]),
        initial=initial,
    )


def mrp_from_dict(data: dict) -> Mrp:
    if data.get("format") != MRP_FORMAT:
        raise ConfigError(f"not an MRP file (format={data.get('format')!r})")
    if data.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported MRP file version {data.get('version')!r}")
    initial = data["initial"]
    if isinstance(initial, list):
        initial = np.asarray(initial, dtype=np.float64)
    return Mrp(
        k=int(data["k"]),
        P=np.asarray(data["P"], dtype=np.float64),
        r_mean=np.asarray(data["r_mean"], dtype=np.float64),
        sigma=float(data["sigma"]),
        gamma=float(data["gamma"]),
        terminal_states=frozenset(int(s) for s in data["terminal_states"]),
        initial=initial,
        b=None if data.get("b") is None else int(data["b"]),
        name=data.get("name"),
    )
