"""Data generators for the benchmark figures, emitted as CSV tables.

No plotting here: each generator returns (header, rows) ready for CSV
serialization, so plotting stays a downstream concern.
"""

from __future__ import annotations

import numpy as np

from .algos import AccumulateTD, ReplaceTD, TrueOnlineTD, run_episode
from .core import ConfigError, Transition
from .envs import canonical_task, sample_step, true_values
from .harness import (
    SweepConfig,
    best_per_lambda,
    paper_alpha_grid,
    paper_lambda_grid,
    run_sweep,
)
from .oracle import offline_lambda_return_algorithm, online_lambda_return_algorithm
from .rng import SplitMix64

FigureTable = tuple[list[str], list[list]]


def _walk_rms(theta: np.ndarray, v: np.ndarray, rms0: float) -> float:
    return float(np.sqrt(np.mean((theta - v) ** 2)) / rms0)


def random_walk_learning_curves(
    alpha: float = 0.2, lam: float = 1.0, episodes: int = 3, seed: int = 1
) -> FigureTable:
    """Per-step normalized RMS error on the left-drift random walk.

    Compares the offline and online lambda-return replays with the
    accumulating-trace learner on the same recorded episodes. The offline
    column only moves at episode boundaries.
    """
    mrp, rep = canonical_task("random-walk-10")
    v = true_values(mrp)[:10]
    rms0 = float(np.sqrt(np.mean(v**2)))  # error of the zero vector
    rng = SplitMix64(seed)
    recorder = TrueOnlineTD(rep.n, alpha=0.0, lam=0.0)
    trajs = [run_episode(recorder, mrp, rep, rng, max_steps=100_000) for _ in range(episodes)]

    rows: list[list] = []
    theta_off = np.zeros(rep.n)
    theta_on = np.zeros(rep.n)
    acc = AccumulateTD(rep.n, alpha=alpha, lam=lam)
    t = 0
    for traj in trajs:
        acc.start_episode()
        run = online_lambda_return_algorithm(traj, alpha, lam, theta_on)
        for j, step in enumerate(traj.steps):
            acc.step(step)
            t += 1
            rows.append([
                t,
                _walk_rms(theta_off, v, rms0),
                _walk_rms(run.theta_history[j + 1], v, rms0),
                _walk_rms(acc.theta, v, rms0),
            ])
        theta_on = run.theta_history[-1].copy()
        theta_off = offline_lambda_return_algorithm(traj, alpha, lam, theta_off)
    return ["time", "offline", "online", "accumulate"], rows


def one_state_step_size_curve(
    alphas: tuple[float, ...] | None = None,
    episodes: int = 10,
    runs: int = 200,
    seed: int = 1,
) -> FigureTable:
    """RMS error of the single state value at episode ends, per step-size.

    Episode lengths are geometric; both methods see identical episodes per
    run. The accumulating-trace column blows up once the per-episode
    pseudo step-size T*alpha leaves the stable range, while the true
    online column stays bounded for alpha <= 1.
    """
    if alphas is None:
        alphas = tuple((i + 1) / 20 for i in range(40))  # 0.05 .. 2.0
    mrp, rep = canonical_task("one-state")
    lengths_per_run: list[list[int]] = []
    rng = SplitMix64(seed)
    for _ in range(runs):
        lengths = []
        for _ in range(episodes):
            t, state = 0, 0
            while state == 0:
                state, _ = sample_step(mrp, state, rng)
                t += 1
            lengths.append(t)
        lengths_per_run.append(lengths)

    phi, zero = np.array([1.0]), np.array([0.0])
    rows: list[list] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for alpha in alphas:
            sq = {"accumulate": 0.0, "true_online": 0.0}
            count = runs * episodes
            for lengths in lengths_per_run:
                acc = AccumulateTD(1, alpha=alpha, lam=1.0)
                to = TrueOnlineTD(1, alpha=alpha, lam=1.0)
                for T in lengths:
                    for learner in (acc, to):
                        learner.start_episode()
                        for t in range(T):
                            last = t == T - 1
                            learner.step(Transition(
                                phi, 1.0 if last else 0.0, zero if last else phi,
                                1.0, terminal=last,
                            ))
                    sq["accumulate"] += (acc.theta[0] - 1.0) ** 2
                    sq["true_online"] += (to.theta[0] - 1.0) ** 2
            rows.append([
                alpha,
                float(np.sqrt(sq["accumulate"] / count)),
                float(np.sqrt(sq["true_online"] / count)),
            ])
    return ["alpha", "accumulate", "true_online"], rows


TWO_STATE_CONVERGENCE_WINDOW = 100
TWO_STATE_CONVERGENCE_REL_CHANGE = 0.01
# One quiet window is not enough: the error passes through a flat minimum
# on its way up to the one-step fixed point, which would trigger a false
# convergence. Two consecutive quiet windows only occur at the asymptote.
TWO_STATE_CONVERGENCE_CONSECUTIVE = 2


def two_state_asymptotic_rms(
    variant: str,
    lam: float,
    alpha: float = 0.01,
    max_steps: int = 1_000_000,
) -> float:
    """RMS error after convergence on the deterministic two-state episode.

    Converged means the error changed by less than 1% over the trailing
    100-step window, for two windows in a row. With the shared always-on
    feature the error is sqrt(((theta-2)^2 + theta^2) / 2), minimized at
    1 by theta = 1.
    """
    mrp, rep = canonical_task("two-state")
    classes = {"accumulate": AccumulateTD, "replace": ReplaceTD, "true-online": TrueOnlineTD}
    if variant not in classes:
        raise ConfigError(f"unknown variant {variant!r} for the two-state figure")
    learner = classes[variant](rep.n, alpha=alpha, lam=lam)
    zero = rep.phi(2)
    step_left = Transition(rep.phi(0), 2.0, rep.phi(1), 1.0)
    step_right = Transition(rep.phi(1), 0.0, zero, 1.0, terminal=True)

    def rms() -> float:
        th = learner.theta[0]
        return float(np.sqrt(((th - 2.0) ** 2 + th**2) / 2.0))

    previous = rms()
    quiet = 0
    steps = 0
    while steps < max_steps:
        learner.start_episode()
        for tr in (step_left, step_right):
            learner.step(tr)
            steps += 1
            if steps % TWO_STATE_CONVERGENCE_WINDOW == 0:
                current = rms()
                if abs(current - previous) < TWO_STATE_CONVERGENCE_REL_CHANGE * previous:
                    quiet += 1
                    if quiet >= TWO_STATE_CONVERGENCE_CONSECUTIVE:
                        return current
                else:
                    quiet = 0
                previous = current
    raise RuntimeError(f"no convergence within {max_steps} steps for {variant} at lambda={lam}")


def two_state_asymptote_curves(
    lambdas: tuple[float, ...] | None = None, alpha: float = 0.01
) -> FigureTable:
    """Asymptotic RMS error per lambda for the three trace variants."""
    if lambdas is None:
        lambdas = paper_lambda_grid()
    rows = []
    for lam in lambdas:
        rows.append([
            lam,
            two_state_asymptotic_rms("accumulate", lam, alpha),
            two_state_asymptotic_rms("replace", lam, alpha),
            two_state_asymptotic_rms("true-online", lam, alpha),
        ])
    return ["lambda", "accumulate", "replace", "true_online"], rows


FIG4_REPRESENTATIONS = (
    ("tabular", ("accumulate", "replace", "true-online")),
    ("binary", ("accumulate", "replace", "true-online")),
    ("random-normalized", ("accumulate", "true-online")),
)


def mrp_best_lambda_curves(
    k: int = 10,
    b: int = 3,
    sigma: float = 0.1,
    runs: int = 50,
    steps: int = 100,
    master_seed: int = 20260811,
    workers: int = 1,
) -> FigureTable:
    """Best-over-alpha normalized MSE per lambda on a random MRP.

    One sweep per representation; replacing traces are skipped where the
    features are not binary. Empty cells (no eligible alpha) are emitted
    with blank metric fields.
    """
    rows: list[list] = []
    for rep_kind, variants in FIG4_REPRESENTATIONS:
        config = SweepConfig(
            env=f"mrp({k},{b},{sigma:g})",
            representation=rep_kind,
            variants=variants,
            alphas=paper_alpha_grid(),
            lambdas=paper_lambda_grid(),
            steps=steps,
            runs=runs,
            master_seed=master_seed,
        )
        curves = best_per_lambda(run_sweep(config, workers=workers))
        for variant, points in curves.items():
            for p in points:
                rows.append([
                    rep_kind, variant, p.lam,
                    "" if p.alpha is None else p.alpha,
                    "" if p.metric_mean is None else p.metric_mean,
                    "" if p.metric_se is None else p.metric_se,
                ])
    return ["representation", "variant", "lambda", "alpha", "metric_mean", "metric_se"], rows


def table_to_csv(table: FigureTable) -> str:
    header, rows = table
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_field(x) for x in row))
    return "\n".join(lines) + "\n"


def _format_field(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)
