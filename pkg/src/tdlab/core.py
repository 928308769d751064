"""Shared numeric types: feature vectors, transitions, trajectories.

Feature vectors are plain float64 numpy arrays by default; a sparse
index/value representation is available behind the same dot-product
interface for large binary encodings such as tile coding. A terminal
state is represented by the all-zero feature vector, which makes its
value estimate exactly 0 without special-casing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Fatal configuration problem (dimension mismatch, invalid parameter)."""


@dataclass(frozen=True)
class SparseVector:
    """Index/value representation of a length-n real vector."""

    n: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.indices.shape != self.values.shape:
            raise ConfigError("sparse indices and values must have equal length")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ConfigError("sparse index out of range")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.n)
        np.add.at(out, self.indices, self.values)
        return out


FeatureVector = np.ndarray | SparseVector


def dimension(phi: FeatureVector) -> int:
    return phi.n if isinstance(phi, SparseVector) else phi.shape[0]


def as_dense(phi: FeatureVector) -> np.ndarray:
    return phi.to_dense() if isinstance(phi, SparseVector) else np.asarray(phi, dtype=np.float64)


def dot(w: np.ndarray, phi: FeatureVector) -> float:
    """Inner product w . phi, the linear value estimate."""
    if isinstance(phi, SparseVector):
        if w.shape[0] != phi.n:
            raise ConfigError(f"dimension mismatch: weights {w.shape[0]}, features {phi.n}")
        return float(w[phi.indices] @ phi.values)
    if w.shape[0] != phi.shape[0]:
        raise ConfigError(f"dimension mismatch: weights {w.shape[0]}, features {phi.shape[0]}")
    return float(w @ phi)


def stack_action_features(phi: FeatureVector, action: int, num_actions: int) -> FeatureVector:
    """Embed state features into the block of one action.

    The result has length n * num_actions; block `action` holds phi and
    every other block is zero, so distinct actions use disjoint weights.
    """
    if not 0 <= action < num_actions:
        raise ConfigError(f"action {action} out of range for {num_actions} actions")
    n = dimension(phi)
    if isinstance(phi, SparseVector):
        return SparseVector(n * num_actions, phi.indices + action * n, phi.values)
    out = np.zeros(n * num_actions)
    out[action * n : (action + 1) * n] = phi
    return out


def max_action_value(theta: np.ndarray, phi: FeatureVector, num_actions: int) -> float:
    """max_a theta . stack_action_features(phi, a)."""
    return float(np.max(action_values(theta, phi, num_actions)))


def action_values(theta: np.ndarray, phi: FeatureVector, num_actions: int) -> np.ndarray:
    dense = as_dense(phi)
    n = dense.shape[0]
    if theta.shape[0] != n * num_actions:
        raise ConfigError(
            f"dimension mismatch: weights {theta.shape[0]}, expected {n * num_actions}"
        )
    return theta.reshape(num_actions, n) @ dense


@dataclass(frozen=True)
class Transition:
    """One observed step: features, reward, next features, discount."""

    phi: np.ndarray
    reward: float
    phi_next: np.ndarray
    gamma: float
    terminal: bool = False

    def __post_init__(self):
        if self.terminal and np.any(self.phi_next != 0.0):
            raise ConfigError("terminal transition must have all-zero next features")


@dataclass
class Trajectory:
    """Recorded step sequence enabling exact forward-view replay.

    For control tasks the per-step chosen action and greedy flag are
    recorded as well; `steps[j]` then holds the state-level features of
    S_j and S_{j+1}, with the action features derived on demand. A capped
    continuing control run also records the action already selected for
    the final state (`final_action`), which replay needs.
    """

    steps: list[Transition] = field(default_factory=list)
    actions: list[int] | None = None
    greedy: list[bool] | None = None
    num_actions: int | None = None
    final_action: int | None = None
    final_greedy: bool | None = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def episodic(self) -> bool:
        return bool(self.steps) and self.steps[-1].terminal

    def validate(self) -> None:
        terminal_count = sum(1 for s in self.steps if s.terminal)
        if terminal_count > 1 or (terminal_count == 1 and not self.steps[-1].terminal):
            raise ConfigError("episodic trajectory must end with exactly one terminal step")
        if self.actions is not None and len(self.actions) != len(self.steps):
            raise ConfigError("one action per step required")
        if self.greedy is not None and len(self.greedy) != len(self.steps):
            raise ConfigError("one greedy flag per step required")

    def phi(self, t: int) -> np.ndarray:
        """Features of S_t for 0 <= t <= len: past the last step this is phi_next."""
        if t < len(self.steps):
            return self.steps[t].phi
        if t == len(self.steps) and self.steps:
            return self.steps[-1].phi_next
        raise IndexError(f"no state features at step {t}")

    def action_features(self, t: int) -> np.ndarray:
        if self.actions is None or self.num_actions is None:
            raise ConfigError("trajectory lacks action annotations")
        return as_dense(stack_action_features(self.phi(t), self.actions[t], self.num_actions))
