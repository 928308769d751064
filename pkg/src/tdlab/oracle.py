"""Forward-view reference algorithms and diagnostics.

These are the ground truth the incremental learners are checked against.
They replay the full update sequence from the initial weights at every
time step, so per-step cost grows with time; that is acceptable here
because trust matters more than speed.

Weight-vector convention: theta_k^t is the k-th iterate of the update
sequence performed at time t, and theta_t (single index) means theta_t^t,
the final iterate. Bootstrapped value estimates inside the n-step return
G_t^(n) use theta_{t+n-1}, i.e. the single-index vectors; `theta_lookup`
callables supply them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algos import AccumulateTD, TrueOnlineWatkinsQ
from .core import ConfigError, Trajectory, action_values
from .envs import Mrp, Representation, stationary_distribution, true_values

ThetaLookup = Callable[[int], np.ndarray]


def constant_lookup(theta: np.ndarray) -> ThetaLookup:
    return lambda j: theta


def n_step_return(traj: Trajectory, t: int, n: int, theta_lookup: ThetaLookup) -> float:
    """G_t^(n): n discounted rewards plus the bootstrapped tail value.

    Truncates at a terminal state (whose value is exactly 0); a horizon
    past the end of a non-terminated trajectory is an error.
    """
    T = len(traj)
    if n < 1 or t < 0 or t >= T:
        raise ConfigError(f"invalid n-step query t={t}, n={n}")
    if t + n > T and not traj.episodic:
        raise ConfigError(f"horizon {t + n} beyond recorded data of length {T}")
    g = 0.0
    disc = 1.0
    for j in range(t, min(t + n, T)):
        step = traj.steps[j]
        g += disc * step.reward
        disc *= step.gamma
        if step.terminal:
            return g
    last = t + n - 1
    return g + disc * float(theta_lookup(last) @ traj.steps[last].phi_next)


def interim_lambda_return(
    traj: Trajectory, k: int, h: int, lam: float, theta_lookup: ThetaLookup
) -> float:
    """Lambda-mixture of n-step returns truncated at horizon h (definitional sum)."""
    if not k < h <= len(traj):
        raise ConfigError(f"need k < h <= data length, got k={k}, h={h}, T={len(traj)}")
    total = 0.0
    weight = 1.0  # lambda^(n-1)
    for n in range(1, h - k):
        total += (1.0 - lam) * weight * n_step_return(traj, k, n, theta_lookup)
        weight *= lam
    return total + weight * n_step_return(traj, k, h - k, theta_lookup)


def interim_lambda_returns_all(
    traj: Trajectory, h: int, lam: float, theta_lookup: ThetaLookup
) -> np.ndarray:
    """All targets G_k^{lambda|h} for 0 <= k < h in one backward sweep.

    Uses the recursion G_k = R_{k+1} + gamma*((1-lam)*V_k(S_{k+1}) +
    lam*G_{k+1}), an exact consequence of the definitional sum (the
    package's property tests pin the two against each other).
    """
    if not 0 < h <= len(traj):
        raise ConfigError(f"horizon {h} outside trajectory of length {len(traj)}")
    g = np.empty(h)
    last = traj.steps[h - 1]
    g[h - 1] = last.reward + last.gamma * float(theta_lookup(h - 1) @ last.phi_next)
    for k in range(h - 2, -1, -1):
        step = traj.steps[k]
        v_next = float(theta_lookup(k) @ step.phi_next)
        g[k] = step.reward + step.gamma * ((1.0 - lam) * v_next + lam * g[k + 1])
    return g


def offline_lambda_return(
    traj: Trajectory, t: int, lam: float, theta_lookup: ThetaLookup
) -> float:
    """The untruncated lambda-return of a complete episode (Monte Carlo tail)."""
    if not traj.episodic:
        raise ConfigError("offline lambda-return requires a complete episode")
    return interim_lambda_return(traj, t, len(traj), lam, theta_lookup)


@dataclass
class ForwardViewRun:
    """Weights produced by replaying forward-view updates at each step.

    theta_history[t] is theta_t^t; row 0 is the initial vector.
    """

    traj: Trajectory
    alpha: float
    lam: float
    theta_history: np.ndarray

    def theta(self, t: int) -> np.ndarray:
        return self.theta_history[t]

    def intermediate(self, t: int, k: int) -> np.ndarray:
        """theta_k^t: the k-th iterate of the sequence performed at time t."""
        if not 0 <= k <= t <= len(self.traj):
            raise ConfigError(f"need 0 <= k <= t <= T, got k={k}, t={t}")
        theta = self.theta_history[0].copy()
        if t == 0:
            return theta
        lookup = lambda j: self.theta_history[j]
        targets = interim_lambda_returns_all(self.traj, t, self.lam, lookup)
        for i in range(k):
            phi = self.traj.steps[i].phi
            theta += self.alpha * (targets[i] - float(theta @ phi)) * phi
        return theta


def online_lambda_return_algorithm(
    traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray
) -> ForwardViewRun:
    """At each time t, replay one update per visited state with horizon-t targets.

    Bootstraps use the run's own single-index vectors theta_j := theta_j^j,
    so the whole history is rebuilt from theta_init at every step.
    """
    T = len(traj)
    n = theta_init.shape[0]
    history = np.empty((T + 1, n))
    history[0] = theta_init
    phis = [traj.steps[k].phi for k in range(T)]
    v_next = np.empty(T)  # v_next[j] = theta_j . phi_{j+1}
    for t in range(1, T + 1):
        v_next[t - 1] = history[t - 1] @ traj.steps[t - 1].phi_next
        targets = _targets_from_cached(traj, t, lam, v_next)
        theta = history[0].copy()
        for k in range(t):
            phi = phis[k]
            theta += alpha * (targets[k] - theta @ phi) * phi
        history[t] = theta
    return ForwardViewRun(traj=traj, alpha=alpha, lam=lam, theta_history=history)


def _targets_from_cached(traj: Trajectory, h: int, lam: float, v_next: np.ndarray) -> np.ndarray:
    g = np.empty(h)
    last = traj.steps[h - 1]
    g[h - 1] = last.reward + last.gamma * v_next[h - 1]
    for k in range(h - 2, -1, -1):
        step = traj.steps[k]
        g[k] = step.reward + step.gamma * ((1.0 - lam) * v_next[k] + lam * g[k + 1])
    return g


def offline_lambda_return_algorithm(
    traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray
) -> np.ndarray:
    """One update per visited state at episode end; mid-episode weights stay put.

    All value estimates inside the lambda-returns use theta_init, the
    only weights available before any update happens.
    """
    if not traj.episodic:
        raise ConfigError("the offline algorithm requires a complete episode")
    lookup = constant_lookup(theta_init)
    targets = interim_lambda_returns_all(traj, len(traj), lam, lookup)
    theta = theta_init.copy()
    for k in range(len(traj)):
        phi = traj.steps[k].phi
        theta += alpha * (targets[k] - float(theta @ phi)) * phi
    return theta


def _first_nongreedy_after(traj: Trajectory, t: int) -> int:
    """tau: index of the first non-greedy action strictly after step t."""
    if traj.greedy is None:
        raise ConfigError("trajectory lacks greedy-flag annotations")
    for j in range(t + 1, len(traj)):
        if not traj.greedy[j]:
            return j
    return len(traj) + 1  # effectively infinity


def watkins_interim_target(
    traj: Trajectory, t: int, h: int, lam: float, theta_lookup: ThetaLookup
) -> float:
    """Greedy-policy interim target: growth stops at the first non-greedy action.

    U_t^h mixes max-bootstrapped n-step returns up to z = min(h, tau),
    where tau is the first step after t whose behavior action was not
    greedy. Bootstraps use max_a theta_{t+n-1} . psi(S_{t+n}, a).
    """
    if traj.num_actions is None:
        raise ConfigError("trajectory lacks action annotations")
    if not t < h <= len(traj):
        raise ConfigError(f"need t < h <= data length, got t={t}, h={h}")
    z = min(h, _first_nongreedy_after(traj, t))
    num_actions = traj.num_actions
    total = 0.0
    weight = 1.0
    reward_sum = 0.0
    disc = 1.0
    for n in range(1, z - t + 1):
        step = traj.steps[t + n - 1]
        reward_sum += disc * step.reward
        disc *= step.gamma
        if step.terminal:
            g_n = reward_sum
        else:
            q = action_values(theta_lookup(t + n - 1), traj.phi(t + n), num_actions)
            g_n = reward_sum + disc * float(np.max(q))
        if n < z - t:
            total += (1.0 - lam) * weight * g_n
            weight *= lam
        else:
            total += weight * g_n
    return total


def watkins_forward_view(
    traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray
) -> np.ndarray:
    """Replay of the truncated forward view behind the Watkins-style learner.

    The updated feature vector for step k >= 1 is the pair (S_k, A*_k)
    carried by the learner after its greedy re-selection (ties resolved
    toward the recorded behavior action); step 0 uses the behavior pair.
    Returns the (T+1) x n weight history.
    """
    if traj.actions is None or traj.greedy is None or traj.num_actions is None:
        raise ConfigError("Watkins replay needs action and greedy-flag annotations")
    T = len(traj)
    num_actions = traj.num_actions
    n = theta_init.shape[0]
    history = np.empty((T + 1, n))
    history[0] = theta_init
    psis: list[np.ndarray] = [traj.action_features(0)]
    for t in range(1, T + 1):
        if t >= 2:
            k = t - 1
            q = action_values(history[k - 1], traj.phi(k), num_actions)
            behavior = traj.actions[k]
            a_star = behavior if q[behavior] == q.max() else int(np.argmax(q))
            psi = np.zeros(n)
            block = traj.phi(k)
            psi[a_star * block.shape[0] : (a_star + 1) * block.shape[0]] = block
            psis.append(psi)
        lookup = lambda j: history[j]
        theta = history[0].copy()
        for k in range(t):
            u = watkins_interim_target(traj, k, t, lam, lookup)
            psi = psis[k]
            theta += alpha * (u - float(theta @ psi)) * psi
        history[t] = theta
    return history


def replay_watkins(
    traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray
) -> np.ndarray:
    """Run the incremental Watkins-style learner over a recorded trajectory.

    Reproduces the driver protocol exactly: the carried feature vector
    becomes the greedy pair's features after each step, and the greedy
    re-selection uses the learner's pre-update weights.
    """
    if traj.actions is None or traj.num_actions is None:
        raise ConfigError("Watkins replay needs action annotations")
    T = len(traj)
    num_actions = traj.num_actions
    learner = TrueOnlineWatkinsQ(
        n_state_features=traj.steps[0].phi.shape[0],
        num_actions=num_actions,
        alpha=alpha,
        lam=lam,
        theta_init=theta_init,
    )
    history = np.empty((T + 1, theta_init.shape[0]))
    history[0] = theta_init
    psi = traj.action_features(0)
    for j in range(T):
        step = traj.steps[j]
        if step.terminal:
            learner.step(psi, np.zeros(learner.n), step.reward, step.gamma, True)
        else:
            q = action_values(learner.theta, step.phi_next, num_actions)
            if j + 1 < T:
                behavior = traj.actions[j + 1]
            elif traj.final_action is not None:
                behavior = traj.final_action
            else:
                raise ConfigError("capped control trajectory lacks the final selected action")
            a_star = behavior if q[behavior] == q.max() else int(np.argmax(q))
            psi_star = np.zeros(learner.n)
            block = step.phi_next
            psi_star[a_star * block.shape[0] : (a_star + 1) * block.shape[0]] = block
            learner.step(psi, psi_star, step.reward, step.gamma, behavior == a_star)
            psi = psi_star
        history[j + 1] = learner.theta
    return history


def accumulating_trace_nonrecursive(traj: Trajectory, t: int, lam: float) -> np.ndarray:
    """Closed form of the accumulating trace after t steps: a decayed feature sum."""
    if not 0 < t <= len(traj):
        raise ConfigError(f"need 0 < t <= T, got t={t}")
    n = traj.steps[0].phi.shape[0]
    e = np.zeros(n)
    for k in range(t):
        e *= traj.steps[k].gamma * lam
        e += traj.steps[k].phi
    return e


def prop2_condition_holds(traj: Trajectory) -> bool:
    """True iff no feature is active at a step after any earlier activation.

    Checks e_{t-1}[i] * phi_t[i] == 0 exactly for every feature and step,
    with the trace accumulated undecayed, so the answer does not depend
    on gamma or lambda.
    """
    if len(traj) < 2:
        return True
    acc = traj.steps[0].phi.astype(np.float64).copy()
    for t in range(1, len(traj)):
        phi = traj.steps[t].phi
        if np.any(acc * phi != 0.0):
            return False
        acc += phi
    return True


@dataclass
class TheoremOneDiagnostics:
    """Step-size-free update directions and the closeness ratio they control."""

    delta_terms: np.ndarray
    ratio: float
    alpha: float
    lam: float


def theorem1_delta_terms(traj: Trajectory, lam: float, theta_init: np.ndarray) -> np.ndarray:
    """Delta_i^T = (G-bar_i^{lambda|T} - theta_0 . phi_i) phi_i, all bootstraps at theta_0."""
    T = len(traj)
    targets = interim_lambda_returns_all(traj, T, lam, constant_lookup(theta_init))
    out = np.empty((T, theta_init.shape[0]))
    for i in range(T):
        phi = traj.steps[i].phi
        out[i] = (targets[i] - float(theta_init @ phi)) * phi
    return out


def theorem1_ratio(
    traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray
) -> float:
    """||theta_td - theta_lambda|| / ||theta_td - theta_0|| at the final step.

    theta_td comes from the accumulating-trace learner and theta_lambda
    from the online lambda-return replay, both started at theta_init on
    the same trajectory. The ratio vanishes as alpha -> 0.
    """
    deltas = theorem1_delta_terms(traj, lam, theta_init)
    if np.linalg.norm(deltas.sum(axis=0)) == 0.0:
        raise ConfigError("degenerate input: the step-size-free updates sum to zero")
    learner = AccumulateTD(theta_init.shape[0], alpha=alpha, lam=lam, theta_init=theta_init)
    for step in traj.steps:
        learner.step(step)
    theta_td = learner.theta
    run = online_lambda_return_algorithm(traj, alpha, lam, theta_init)
    theta_lam = run.theta_history[-1]
    denom = float(np.linalg.norm(theta_td - theta_init))
    if denom == 0.0:
        raise ConfigError("degenerate input: accumulating TD never moved the weights")
    return float(np.linalg.norm(theta_td - theta_lam)) / denom


def theorem1_diagnostics(
    traj: Trajectory, alpha: float, lam: float, theta_init: np.ndarray
) -> TheoremOneDiagnostics:
    return TheoremOneDiagnostics(
        delta_terms=theorem1_delta_terms(traj, lam, theta_init),
        ratio=theorem1_ratio(traj, alpha, lam, theta_init),
        alpha=alpha,
        lam=lam,
    )


def lms_solution(
    mrp: Mrp,
    representation: Representation,
    weighting: str | np.ndarray = "stationary",
) -> tuple[np.ndarray, float]:
    """Best linear weights under a state-weighted squared value error.

    Minimizes sum_s w(s) (v(s) - theta . phi(s))^2 over the non-terminal
    states. `weighting` is the stationary distribution by default (valid
    for continuing chains), "uniform", or an explicit weight vector over
    all k states. Solved as a weighted least-squares problem through the
    pseudo-inverse, so rank-deficient feature tables are fine.
    """
    v = true_values(mrp)
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
    phi = representation.table[nt]
    sqrt_w = np.sqrt(w)
    theta_star, *_ = np.linalg.lstsq(sqrt_w[:, None] * phi, sqrt_w * v[nt], rcond=None)
    residual = v[nt] - phi @ theta_star
    mse_star = float(w @ residual**2)
    return theta_star, mse_star
