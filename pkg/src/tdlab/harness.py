"""Deterministic experiment harness: sweeps, metrics, equivalence checks.

Seeding contract (all constants from tdlab.rng):
  cell_index = lambda_index * len(alphas) + alpha_index
  cell_seed  = mix64(master_seed XOR cell_index)
  run_seed   = mix64(cell_seed XOR mix64(run_index + 1))
Cell seeds are shared across variants, so variant comparisons are paired
through common random numbers. Aggregation folds by cell index, so the
result does not depend on execution order or worker count.
"""

from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algos import (
    PREDICTION_VARIANTS,
    AccumulateTD,
    TabularTrueOnlineTD,
    TrueOnlineSarsa,
    TrueOnlineTD,
    TrueOnlineTDAlphaT,
    make_prediction_learner,
)
from .core import ConfigError, Trajectory, Transition, stack_action_features, as_dense
from .envs import (
    Mrp,
    Representation,
    build_representation,
    canonical_task,
    generate_mrp,
    sample_step,
    stationary_distribution,
)
from .oracle import (
    lms_solution,
    online_lambda_return_algorithm,
    replay_watkins,
    watkins_forward_view,
)
from .rng import SplitMix64, mix64

DIVERGENCE_THRESHOLD = 1e100
EQUIVALENCE_TOL = 1e-8
# A run whose weights have grown this much past their start is exponentially
# divergent; beyond it, float64 rounding is amplified faster than any fixed
# relative tolerance can survive, so equivalence checks stop there.
EQUIVALENCE_AMPLIFICATION_CUTOFF = 1e12
REPRESENTATION_SEED_SALT = 0x52455052  # mixed into the env seed for feature tables


def paper_alpha_grid() -> tuple[float, ...]:
    """Step-size grid: 10^i for i in -3..-1 step 0.2, then 0.1..2.0 step 0.1."""
    log_points = [10.0 ** (-3.0 + 0.2 * j) for j in range(11)]
    linear_points = [(i + 1) / 10 for i in range(20)]
    return tuple(sorted(set(log_points + linear_points)))


def paper_lambda_grid() -> tuple[float, ...]:
    """Trace-decay grid: 0..0.9 step 0.1, then 0.9..1.0 step 0.01."""
    coarse = [j / 10 for j in range(10)]
    fine = [(90 + m) / 100 for m in range(11)]
    return tuple(sorted(set(coarse + fine)))


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to reproduce a sweep bit-for-bit."""

    env: str
    representation: str
    variants: tuple[str, ...]
    alphas: tuple[float, ...]
    lambdas: tuple[float, ...]
    steps: int
    runs: int
    master_seed: int
    env_seed: int | None = None
    gamma: float = 0.99
    weighting: str = "stationary"

    def __post_init__(self):
        if not self.alphas or not self.lambdas:
            raise ConfigError("alpha and lambda grids must be non-empty")
        if self.runs < 1 or self.steps < 1:
            raise ConfigError("runs and steps must be >= 1")
        for v in self.variants:
            if v not in PREDICTION_VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; expected one of {PREDICTION_VARIANTS}")

    def resolved_env_seed(self) -> int:
        return self.master_seed if self.env_seed is None else self.env_seed


@dataclass(frozen=True)
class CellResult:
    variant: str
    alpha: float
    lam: float
    metric_mean: float
    metric_se: float
    runs: int
    diverged: int


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    cells: tuple[CellResult, ...]

    def cell(self, variant: str, alpha: float, lam: float) -> CellResult:
        for c in self.cells:
            if c.variant == variant and c.alpha == alpha and c.lam == lam:
                return c
        raise KeyError((variant, alpha, lam))


_MRP_PATTERN = re.compile(r"^mrp\(\s*(\d+)\s*,\s*(\d+)\s*,\s*([0-9.eE+-]+)\s*\)$")


def resolve_env(env: str, gamma: float, env_seed: int) -> Mrp:
    """Canonical task name or an mrp(k,b,sigma) generator string."""
    m = _MRP_PATTERN.match(env.strip())
    if m:
        k, b, sigma = int(m.group(1)), int(m.group(2)), float(m.group(3))
        return generate_mrp(k=k, b=b, sigma=sigma, gamma=gamma, seed=env_seed)
    mrp, _ = canonical_task(env.strip())
    return mrp


def error_quadratic(
    mrp: Mrp, representation: Representation, weighting: str | np.ndarray = "stationary"
) -> tuple[np.ndarray, np.ndarray, float]:
    """(M, theta_star, initial_error) so that the weighted squared value
    error of theta against the best linear solution is (d' M d) with
    d = theta - theta_star."""
    nt = mrp.nonterminal_states()
    if isinstance(weighting, str):
        if weighting == "stationary":
            w = stationary_distribution(mrp)[nt]
        elif weighting == "uniform":
            w = np.full(nt.size, 1.0 / nt.size)
        else:
            raise ConfigError(f"unknown weighting {weighting!r}")
    else:
        w = np.asarray(weighting, dtype=np.float64)[nt]
    theta_star, _ = lms_solution(mrp, representation, weighting)
    phi = representation.table[nt]
    M = phi.T @ (w[:, None] * phi)
    e0 = float(theta_star @ M @ theta_star)  # error of the zero vector
    return M, theta_star, e0


def normalized_mse(
    theta_history: np.ndarray,
    mrp: Mrp,
    representation: Representation,
    horizon: int,
    weighting: str | np.ndarray = "stationary",
) -> float:
    """Mean weighted squared error vs the best linear values over
    theta_1..theta_horizon, divided by the error of theta_0."""
    H = np.asarray(theta_history, dtype=np.float64)
    if horizon > H.shape[0] - 1:
        raise ConfigError(f"horizon {horizon} exceeds history of {H.shape[0] - 1} steps")
    M, theta_star, _ = error_quadratic(mrp, representation, weighting)
    D = H - theta_star
    errors = np.einsum("ti,ij,tj->t", D, M, D)
    if errors[0] == 0.0:
        raise ConfigError("degenerate configuration: zero initial error")
    # normalize before averaging so an unmoved history scores exactly 1.0
    return float((errors[1 : horizon + 1] / errors[0]).mean())


def _simulate_chain(mrp: Mrp, steps: int, rng: SplitMix64) -> tuple[np.ndarray, np.ndarray]:
    states = np.empty(steps + 1, dtype=np.int64)
    rewards = np.empty(steps)
    states[0] = mrp.initial_state(rng)
    s = states[0]
    for t in range(steps):
        s, r = sample_step(mrp, int(s), rng)
        states[t + 1] = s
        rewards[t] = r
    return states, rewards


def _run_metric(
    variant: str,
    states: np.ndarray,
    rewards: np.ndarray,
    table: np.ndarray,
    gamma: float,
    alpha: float,
    lam: float,
    M: np.ndarray,
    theta_star: np.ndarray,
    e0: float,
) -> tuple[float, bool]:
    """One learner run over a pre-sampled chain; returns (metric, diverged)."""
    steps = rewards.shape[0]
    n = table.shape[1]
    learner = make_prediction_learner(variant, n, alpha, lam)
    theta = learner._theta
    H = np.empty((steps + 1, n))
    H[0] = theta
    diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps):
            tr = Transition(
                phi=table[states[t]],
                reward=rewards[t],
                phi_next=table[states[t + 1]],
                gamma=gamma,
            )
            learner.step(tr)
            if not (np.abs(theta).max() <= DIVERGENCE_THRESHOLD):
                diverged = True
                frozen = theta.copy() if np.all(np.isfinite(theta)) else H[t].copy()
                H[t + 1 :] = frozen
                break
            H[t + 1] = theta
        D = H - theta_star
        metric = float((np.einsum("ti,ij,tj->t", D, M, D)[1:] / e0).mean())
    return metric, diverged


def _sweep_cells(
    config: SweepConfig,
    mrp: Mrp,
    representation: Representation,
    cell_indices: list[int],
) -> list[tuple[int, str, float, float, int]]:
    """Raw per-cell aggregates: (cell_index, variant, mean, se, diverged)."""
    M, theta_star, e0 = error_quadratic(mrp, representation, config.weighting)
    if e0 == 0.0:
        raise ConfigError("degenerate configuration: zero initial error")
    table = representation.table
    n_alpha = len(config.alphas)
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        for ci in cell_indices:
            lam = config.lambdas[ci // n_alpha]
            alpha = config.alphas[ci % n_alpha]
            cell_seed = mix64(config.master_seed ^ ci)
            metrics = {v: np.empty(config.runs) for v in config.variants}
            diverged = {v: 0 for v in config.variants}
            for r in range(config.runs):
                rng = SplitMix64(mix64(cell_seed ^ mix64(r + 1)))
                states, rewards = _simulate_chain(mrp, config.steps, rng)
                for variant in config.variants:
                    m, d = _run_metric(
                        variant, states, rewards, table, mrp.gamma, alpha, lam, M, theta_star, e0
                    )
                    metrics[variant][r] = m
                    diverged[variant] += int(d)
            for variant in config.variants:
                vals = metrics[variant]
                se = float(vals.std(ddof=1) / np.sqrt(config.runs)) if config.runs > 1 else 0.0
                out.append((ci, variant, float(vals.mean()), se, diverged[variant]))
    return out


def run_sweep(config: SweepConfig, mrp: Mrp | None = None, workers: int = 1) -> SweepResult:
    """Grid scan over (variant, alpha, lambda) with paired per-cell seeds.

    Every run starts a fresh learner at theta_0 = 0 on a fresh trajectory
    from the run seed. A run whose weight magnitude exceeds the divergence
    threshold (or goes non-finite) is flagged and frozen at its last
    finite weights; its (large) metric still enters the cell mean, so
    divergence is visible in the data rather than silently dropped.
    """
    if mrp is None:
        mrp = resolve_env(config.env, config.gamma, config.resolved_env_seed())
    representation = build_representation(
        config.representation, mrp, seed=mix64(config.resolved_env_seed() ^ REPRESENTATION_SEED_SALT)
    )
    if "replace" in config.variants and np.any((representation.table != 0) & (representation.table != 1)):
        raise ConfigError("replacing traces require binary features; pick tabular or binary")
    n_cells = len(config.lambdas) * len(config.alphas)
    indices = list(range(n_cells))
    if workers > 1:
        chunks = [indices[i::workers] for i in range(workers)]
        rows: list[tuple[int, str, float, float, int]] = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_sweep_cells, config, mrp, representation, chunk)
                for chunk in chunks if chunk
            ]
            for f in futures:
                rows.extend(f.result())
    else:
        rows = _sweep_cells(config, mrp, representation, indices)
    by_key = {(ci, variant): (mean, se, div) for ci, variant, mean, se, div in rows}
    cells = []
    n_alpha = len(config.alphas)
    for variant in config.variants:
        for li, lam in enumerate(config.lambdas):
            for ai, alpha in enumerate(config.alphas):
                mean, se, div = by_key[(li * n_alpha + ai, variant)]
                cells.append(CellResult(
                    variant=variant, alpha=alpha, lam=lam,
                    metric_mean=mean, metric_se=se, runs=config.runs, diverged=div,
                ))
    return SweepResult(config=config, cells=tuple(cells))


def sweep_to_csv(result: SweepResult) -> str:
    """Rows in variant-major order, then lambda, then alpha ascending."""
    lines = ["variant,alpha,lambda,metric_mean,metric_se,runs,diverged"]
    for c in result.cells:
        lines.append(
            f"{c.variant},{c.alpha:.17g},{c.lam:.17g},{c.metric_mean:.17g},"
            f"{c.metric_se:.17g},{c.runs},{c.diverged}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BestPoint:
    """Best-over-alpha cell for one lambda; alpha is None if no cell is eligible."""

    lam: float
    alpha: float | None
    metric_mean: float | None
    metric_se: float | None


def best_per_lambda(result: SweepResult) -> dict[str, list[BestPoint]]:
    """Minimum mean metric over alpha for each (variant, lambda).

    Cells where more than half the runs diverged are ineligible; ties
    prefer the smaller alpha (cells are scanned in ascending-alpha order).
    """
    curves: dict[str, list[BestPoint]] = {v: [] for v in result.config.variants}
    for variant in result.config.variants:
        for lam in result.config.lambdas:
            best: BestPoint | None = None
            for c in result.cells:
                if c.variant != variant or c.lam != lam:
                    continue
                if 2 * c.diverged > c.runs or not np.isfinite(c.metric_mean):
                    continue
                if best is None or c.metric_mean < best.metric_mean:
                    best = BestPoint(lam, c.alpha, c.metric_mean, c.metric_se)
            curves[variant].append(best if best is not None else BestPoint(lam, None, None, None))
    return curves


EQUIVALENCE_PAIRS = (
    "true-online-vs-oracle",
    "accumulate-vs-oracle",
    "sarsa-vs-oracle-on-psi",
    "watkins-vs-truncated-oracle",
    "alpha-t-constant-vs-true-online",
    "tabular-vs-one-hot-true-online",
)


@dataclass(frozen=True)
class EquivalenceReport:
    pair: str
    steps: int
    compared_steps: int
    max_rel_diff: float
    worst_step: int
    tolerance: float
    passed: bool

    @property
    def truncated(self) -> bool:
        return self.compared_steps < self.steps


def _replay_prediction(learner, traj: Trajectory) -> np.ndarray:
    history = np.empty((len(traj) + 1, learner.theta.shape[0]))
    history[0] = learner.theta
    for j, step in enumerate(traj.steps):
        learner.step(step)
        history[j + 1] = learner.theta
    return history


def _replay_tabular(traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray) -> np.ndarray:
    for step in traj.steps:
        one = np.flatnonzero(step.phi)
        if one.size > 1 or (one.size == 1 and step.phi[one[0]] != 1.0):
            raise ConfigError("tabular replay requires one-hot features")
    learner = TabularTrueOnlineTD(theta_init.shape[0], alpha=alpha, lam=lam, values_init=theta_init)
    history = np.empty((len(traj) + 1, theta_init.shape[0]))
    history[0] = learner.theta
    for j, step in enumerate(traj.steps):
        state = int(np.argmax(step.phi))
        nxt = None if not step.phi_next.any() else int(np.argmax(step.phi_next))
        learner.step(state, step.reward, nxt, step.gamma)
        history[j + 1] = learner.theta
    return history


def action_feature_trajectory(traj: Trajectory) -> Trajectory:
    """Lift a control trajectory to state-action feature space."""
    if traj.actions is None or traj.num_actions is None:
        raise ConfigError("trajectory lacks action annotations")
    steps = []
    T = len(traj)
    for j, step in enumerate(traj.steps):
        psi = as_dense(stack_action_features(step.phi, traj.actions[j], traj.num_actions))
        if step.terminal:
            psi_next = np.zeros(psi.shape[0])
        elif j + 1 < T:
            psi_next = as_dense(
                stack_action_features(step.phi_next, traj.actions[j + 1], traj.num_actions)
            )
        elif traj.final_action is not None:
            psi_next = as_dense(
                stack_action_features(step.phi_next, traj.final_action, traj.num_actions)
            )
        else:
            raise ConfigError("capped control trajectory lacks the final selected action")
        steps.append(Transition(
            phi=psi, reward=step.reward, phi_next=psi_next,
            gamma=step.gamma, terminal=step.terminal,
        ))
    return Trajectory(steps=steps)


def certify_equivalence(
    traj: Trajectory,
    alpha: float,
    lam: float,
    theta_init: np.ndarray,
    pair: str,
) -> EquivalenceReport:
    """Run both sides of a pairing on the same recorded trajectory.

    Reports max over t of ||theta_A(t) - theta_B(t)||_inf normalized by
    (1 + ||theta_B(t)||_inf); a pair passes at 1e-8. The accumulate pair
    exists to document non-equivalence and is expected to fail at
    practical step-sizes.

    Aggressive step-sizes can drive both sides into identical divergence;
    once the weight scale has been amplified past any fixed tolerance's
    reach (or leaves the representable range entirely), the comparison
    stops and `compared_steps` records the checked prefix.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        a, b = _pair_histories(traj, alpha, lam, theta_init, pair)
        scale = np.maximum(np.abs(a).max(axis=1), np.abs(b).max(axis=1))
        cutoff = min(DIVERGENCE_THRESHOLD, (1.0 + scale[0]) * EQUIVALENCE_AMPLIFICATION_CUTOFF)
        in_range = scale <= cutoff  # non-finite fails this too
        stop = len(traj) + 1 if in_range.all() else int(np.argmin(in_range))
        stop = max(stop, 1)  # row 0 is theta_init on both sides
        diffs = np.abs(a[:stop] - b[:stop]).max(axis=1) / (1.0 + np.abs(b[:stop]).max(axis=1))
    worst = int(np.argmax(diffs))
    max_diff = float(diffs[worst])
    return EquivalenceReport(
        pair=pair,
        steps=len(traj),
        compared_steps=stop - 1,
        max_rel_diff=max_diff,
        worst_step=worst,
        tolerance=EQUIVALENCE_TOL,
        passed=bool(max_diff <= EQUIVALENCE_TOL),
    )


def _pair_histories(traj, alpha, lam, theta_init, pair):
    if pair == "true-online-vs-oracle":
        a = _replay_prediction(
            TrueOnlineTD(theta_init.shape[0], alpha=alpha, lam=lam, theta_init=theta_init), traj
        )
        b = online_lambda_return_algorithm(traj, alpha, lam, theta_init).theta_history
    elif pair == "accumulate-vs-oracle":
        a = _replay_prediction(
            AccumulateTD(theta_init.shape[0], alpha=alpha, lam=lam, theta_init=theta_init), traj
        )
        b = online_lambda_return_algorithm(traj, alpha, lam, theta_init).theta_history
    elif pair == "sarsa-vs-oracle-on-psi":
        psi_traj = action_feature_trajectory(traj)
        n = psi_traj.steps[0].phi.shape[0]
        if traj.num_actions is None or n % traj.num_actions:
            raise ConfigError("action feature length must be n_state_features * num_actions")
        learner = TrueOnlineSarsa(
            n // traj.num_actions, traj.num_actions, alpha=alpha, lam=lam, theta_init=theta_init
        )
        history = np.empty((len(psi_traj) + 1, n))
        history[0] = learner.theta
        for j, step in enumerate(psi_traj.steps):
            learner.step(step.phi, step.phi_next, step.reward, step.gamma)
            history[j + 1] = learner.theta
        a = history
        b = online_lambda_return_algorithm(psi_traj, alpha, lam, theta_init).theta_history
    elif pair == "watkins-vs-truncated-oracle":
        a = replay_watkins(traj, alpha, lam, theta_init)
        b = watkins_forward_view(traj, alpha, lam, theta_init)
    elif pair == "alpha-t-constant-vs-true-online":
        a = _replay_prediction(
            TrueOnlineTDAlphaT(
                theta_init.shape[0], alpha_schedule=lambda t: alpha, lam=lam, theta_init=theta_init
            ),
            traj,
        )
        b = _replay_prediction(
            TrueOnlineTD(theta_init.shape[0], alpha=alpha, lam=lam, theta_init=theta_init), traj
        )
    elif pair == "tabular-vs-one-hot-true-online":
        a = _replay_tabular(traj, alpha, lam, theta_init)
        b = _replay_prediction(
            TrueOnlineTD(theta_init.shape[0], alpha=alpha, lam=lam, theta_init=theta_init), traj
        )
    else:
        raise ConfigError(f"unknown pair {pair!r}; expected one of {EQUIVALENCE_PAIRS}")
    return a, b
