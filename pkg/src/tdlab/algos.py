"""Incremental TD(lambda)-family learners, O(n) per step.

Each learner is a single-threaded state machine over a weight vector and
an eligibility trace. Update order follows the published pseudocode
exactly; in particular the previous value estimate (v_old / q_old) is
always captured from pre-update weights, which the exact forward-view
equivalence of the true online variants depends on.

Episode boundaries reset the trace and the stored previous value. For
continuing tasks there is no boundary and the trace is never reset.
"""

from __future__ import annotations

import numpy as np

from .core import ConfigError, Trajectory, Transition, action_values, as_dense
from .envs import Mdp, Mrp, Representation, sample_mdp_step, sample_step
from .rng import SplitMix64

PREDICTION_VARIANTS = (
    "accumulate",
    "replace",
    "true-online",
    "true-online-alpha-t",
    "tabular-true-online",
)
CONTROL_VARIANTS = (
    "sarsa-accumulate",
    "sarsa-replace",
    "true-online-sarsa",
    "true-online-watkins-q",
)


class _LinearLearner:
    """Common weight/trace state shared by the prediction learners."""

    variant: str

    def __init__(self, n: int, alpha: float, lam: float, theta_init=None):
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        self.n = n
        self.alpha = alpha
        self.lam = lam
        self._theta = np.zeros(n) if theta_init is None else np.array(theta_init, dtype=np.float64)
        if self._theta.shape != (n,):
            raise ConfigError("theta_init length must equal the feature dimension")
        self.e = np.zeros(n)
        self.v_old = 0.0
        self.t = 0
        self.start_episode()

    @property
    def theta(self) -> np.ndarray:
        """Read-only view of the current weights."""
        view = self._theta.view()
        view.flags.writeable = False
        return view

    def start_episode(self) -> None:
        self.e[:] = 0.0
        self.v_old = 0.0

    def value(self, phi) -> float:
        return float(self._theta @ as_dense(phi))

    def _check(self, tr: Transition) -> None:
        if tr.phi.shape != (self.n,) or tr.phi_next.shape != (self.n,):
            raise ConfigError("transition feature dimension does not match learner")


class AccumulateTD(_LinearLearner):
    """TD(lambda) with the accumulating trace e <- gamma*lambda*e + phi."""

    variant = "accumulate"

    def step(self, tr: Transition) -> None:
        self._check(tr)
        theta, e = self._theta, self.e
        delta = tr.reward + tr.gamma * (theta @ tr.phi_next) - theta @ tr.phi
        e *= tr.gamma * self.lam
        e += tr.phi
        theta += (self.alpha * delta) * e
        self.t += 1


class ReplaceTD(_LinearLearner):
    """TD(lambda) with the replacing trace; defined for binary features only."""

    variant = "replace"

    def step(self, tr: Transition) -> None:
        self._check(tr)
        phi = tr.phi
        active = phi == 1.0
        if not np.all(active | (phi == 0.0)):
            raise ConfigError(
                "replacing traces are only defined for binary features; "
                f"got non-binary value(s) {phi[~(active | (phi == 0.0))][:3]}"
            )
        theta, e = self._theta, self.e
        delta = tr.reward + tr.gamma * (theta @ tr.phi_next) - theta @ phi
        e *= tr.gamma * self.lam
        e[active] = 1.0
        theta += (self.alpha * delta) * e
        self.t += 1


class TrueOnlineTD(_LinearLearner):
    """TD(lambda) with the dutch trace and value-correction term.

    delta = R + gamma*theta.phi' - theta.phi
    e     <- gamma*lambda*e + phi - alpha*gamma*lambda*(e.phi)*phi
    theta <- theta + alpha*(delta + V - V_old)*e - alpha*(V - V_old)*phi

    The resulting weights equal, at every step, those of the online
    lambda-return algorithm replayed from the episode start.
    """

    variant = "true-online"

    def step(self, tr: Transition) -> None:
        self._check(tr)
        theta, e = self._theta, self.e
        gl = tr.gamma * self.lam
        v = theta @ tr.phi
        v_next = theta @ tr.phi_next
        delta = tr.reward + tr.gamma * v_next - v
        e_dot_phi = e @ tr.phi
        e *= gl
        e += tr.phi
        e -= (self.alpha * gl * e_dot_phi) * tr.phi
        dv = v - self.v_old
        theta += (self.alpha * (delta + dv)) * e
        theta -= (self.alpha * dv) * tr.phi
        self.v_old = v_next
        self.t += 1


class TrueOnlineTDAlphaT(_LinearLearner):
    """True online TD(lambda) for a time-dependent step-size schedule.

    The trace absorbs the step-size (e+ = alpha*e for constant alpha) and
    the weight update uses the modified TD error
    delta' = R + gamma*theta.phi' - V_old. `alpha_schedule` is a pure
    function of the global step counter, which never resets.
    """

    variant = "true-online-alpha-t"

    def __init__(self, n: int, alpha_schedule, lam: float, theta_init=None):
        self.alpha_schedule = alpha_schedule
        super().__init__(n, alpha=float("nan"), lam=lam, theta_init=theta_init)

    def step(self, tr: Transition) -> None:
        self._check(tr)
        alpha_t = self.alpha_schedule(self.t)
        theta, e = self._theta, self.e
        gl = tr.gamma * self.lam
        v = theta @ tr.phi
        v_next = theta @ tr.phi_next
        delta_mod = tr.reward + tr.gamma * v_next - self.v_old
        e_dot_phi = e @ tr.phi
        e *= gl
        e += alpha_t * tr.phi
        e -= (alpha_t * gl * e_dot_phi) * tr.phi
        theta += delta_mod * e
        theta -= (alpha_t * (v - self.v_old)) * tr.phi
        self.v_old = v_next
        self.t += 1


class TabularTrueOnlineTD:
    """True online TD(lambda) specialized to one state value per entry.

    The dutch trace becomes a weighted average of an accumulating and a
    replacing trace on the visited state: e(S) <- (1-alpha)*e(S) + 1,
    with the gamma*lambda decay applied after the value sweep.
    """

    variant = "tabular-true-online"

    def __init__(self, k: int, alpha: float, lam: float, values_init=None):
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        self.k = k
        self.alpha = alpha
        self.lam = lam
        self._v = np.zeros(k) if values_init is None else np.array(values_init, dtype=np.float64)
        self.e = np.zeros(k)
        self.v_old = 0.0
        self.t = 0
        self.start_episode()

    @property
    def theta(self) -> np.ndarray:
        view = self._v.view()
        view.flags.writeable = False
        return view

    def start_episode(self) -> None:
        self.e[:] = 0.0
        self.v_old = 0.0

    def step(self, state: int, reward: float, next_state: int | None, gamma: float) -> None:
        """One transition; next_state None marks entry into a terminal state."""
        v, e = self._v, self.e
        v_next = 0.0 if next_state is None else v[next_state]
        dv = v[state] - self.v_old
        self.v_old = v_next
        delta = reward + gamma * v_next - v[state]
        e[state] = (1.0 - self.alpha) * e[state] + 1.0
        v += (self.alpha * (delta + dv)) * e
        e *= gamma * self.lam
        v[state] -= self.alpha * dv
        self.t += 1


def epsilon_greedy(
    theta: np.ndarray,
    phi_s: np.ndarray,
    num_actions: int,
    epsilon: float,
    rng: SplitMix64,
) -> tuple[int, bool]:
    """Epsilon-greedy action and whether the choice attains the max.

    Greedy ties are broken by the lowest action index. The flag is true
    iff the chosen action's value equals the maximum, so an exploratory
    draw that happens to hit the greedy action still counts as greedy.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError("epsilon must lie in [0, 1]")
    q = action_values(theta, phi_s, num_actions)
    q_max = float(np.max(q))
    if epsilon > 0.0 and rng.random() < epsilon:
        action = rng.below(num_actions)
    else:
        action = int(np.argmax(q))
    return action, bool(q[action] == q_max)


class _ControlLearner:
    variant: str

    def __init__(self, n_state_features: int, num_actions: int, alpha: float, lam: float,
                 theta_init=None):
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        self.n_state_features = n_state_features
        self.num_actions = num_actions
        self.n = n_state_features * num_actions
        self.alpha = alpha
        self.lam = lam
        self._theta = (
            np.zeros(self.n) if theta_init is None else np.array(theta_init, dtype=np.float64)
        )
        if self._theta.shape != (self.n,):
            raise ConfigError("theta_init length must equal n_state_features * num_actions")
        self.e = np.zeros(self.n)
        self.q_old = 0.0
        self.t = 0
        self.start_episode()

    @property
    def theta(self) -> np.ndarray:
        view = self._theta.view()
        view.flags.writeable = False
        return view

    def start_episode(self) -> None:
        self.e[:] = 0.0
        self.q_old = 0.0


class SarsaAccumulate(_ControlLearner):
    """Sarsa(lambda) with accumulating traces on action features."""

    variant = "sarsa-accumulate"

    def step(self, psi: np.ndarray, psi_next: np.ndarray, reward: float, gamma: float) -> None:
        theta, e = self._theta, self.e
        delta = reward + gamma * (theta @ psi_next) - theta @ psi
        e *= gamma * self.lam
        e += psi
        theta += (self.alpha * delta) * e
        self.t += 1


class SarsaReplace(_ControlLearner):
    """Sarsa(lambda) with replacing traces; binary action features only."""

    variant = "sarsa-replace"

    def step(self, psi: np.ndarray, psi_next: np.ndarray, reward: float, gamma: float) -> None:
        active = psi == 1.0
        if not np.all(active | (psi == 0.0)):
            raise ConfigError("replacing traces are only defined for binary features")
        theta, e = self._theta, self.e
        delta = reward + gamma * (theta @ psi_next) - theta @ psi
        e *= gamma * self.lam
        e[active] = 1.0
        theta += (self.alpha * delta) * e
        self.t += 1


class TrueOnlineSarsa(_ControlLearner):
    """True online TD(lambda) on state-action features."""

    variant = "true-online-sarsa"

    def step(self, psi: np.ndarray, psi_next: np.ndarray, reward: float, gamma: float) -> None:
        """psi_next must be the zero vector if the next state is terminal."""
        theta, e = self._theta, self.e
        gl = gamma * self.lam
        q = theta @ psi
        q_next = theta @ psi_next
        delta = reward + gamma * q_next - q
        e_dot_psi = e @ psi
        e *= gl
        e += psi
        e -= (self.alpha * gl * e_dot_psi) * psi
        dq = q - self.q_old
        theta += (self.alpha * (delta + dq)) * e
        theta -= (self.alpha * dq) * psi
        self.q_old = q_next
        self.t += 1


class TrueOnlineWatkinsQ(_ControlLearner):
    """True online learning of the greedy policy's values from any behavior.

    The bootstrap uses the features of the argmax action (ties resolved
    toward the behavior action by the caller), and the trace is zeroed
    after the weight update whenever the behavior action was non-greedy.
    """

    variant = "true-online-watkins-q"

    def step(
        self,
        psi: np.ndarray,
        psi_star_next: np.ndarray,
        reward: float,
        gamma: float,
        next_action_greedy: bool,
    ) -> None:
        theta, e = self._theta, self.e
        gl = gamma * self.lam
        q = theta @ psi
        q_next = theta @ psi_star_next
        delta = reward + gamma * q_next - q
        e_dot_psi = e @ psi
        e *= gl
        e += psi
        e -= (self.alpha * gl * e_dot_psi) * psi
        dq = q - self.q_old
        theta += (self.alpha * (delta + dq)) * e
        theta -= (self.alpha * dq) * psi
        if not next_action_greedy:
            e[:] = 0.0
        self.q_old = q_next
        self.t += 1


def make_prediction_learner(
    variant: str, n: int, alpha: float, lam: float, theta_init=None
) -> _LinearLearner:
    classes = {
        "accumulate": AccumulateTD,
        "replace": ReplaceTD,
        "true-online": TrueOnlineTD,
    }
    if variant == "true-online-alpha-t":
        return TrueOnlineTDAlphaT(n, alpha_schedule=lambda t: alpha, lam=lam, theta_init=theta_init)
    if variant not in classes:
        raise ConfigError(f"unknown prediction variant {variant!r}; expected {PREDICTION_VARIANTS}")
    return classes[variant](n, alpha=alpha, lam=lam, theta_init=theta_init)


def run_episode(
    learner,
    mrp: Mrp,
    representation: Representation,
    rng: SplitMix64,
    max_steps: int | None = None,
) -> Trajectory:
    """Drive a prediction learner through one episode (or a capped run).

    The trace and stored previous value are reset at the episode start.
    Continuing chains require max_steps and the run is treated as one
    uninterrupted trajectory; an episodic chain that outlives max_steps
    raises, since silently truncating would corrupt forward-view replay.
    """
    if mrp.continuing and max_steps is None:
        raise ConfigError("continuing chain requires a step cap")
    learner.start_episode()
    state = mrp.initial_state(rng)
    steps: list[Transition] = []
    while True:
        if max_steps is not None and len(steps) >= max_steps:
            if not mrp.continuing:
                raise RuntimeError(
                    f"episode exceeded the {max_steps}-step cap without terminating"
                )
            break
        nxt, reward = sample_step(mrp, state, rng)
        terminal = nxt in mrp.terminal_states
        tr = Transition(
            phi=representation.phi(state),
            reward=reward,
            phi_next=representation.phi(nxt),
            gamma=mrp.gamma,
            terminal=terminal,
        )
        if isinstance(learner, TabularTrueOnlineTD):
            learner.step(state, reward, None if terminal else nxt, mrp.gamma)
        else:
            learner.step(tr)
        steps.append(tr)
        state = nxt
        if terminal:
            break
    return Trajectory(steps=steps)


def run_control_episode(
    learner,
    mdp: Mdp,
    representation: Representation,
    rng: SplitMix64,
    epsilon: float,
    max_steps: int | None = None,
) -> Trajectory:
    """Drive a control learner with an epsilon-greedy behavior policy.

    Records per-step actions and greedy flags so the run can be replayed
    against the truncated forward view. Action selection always uses the
    pre-update weights, matching the pseudocode order.
    """
    if not mdp.terminal_states and max_steps is None:
        raise ConfigError("continuing MDP requires a step cap")
    learner.start_episode()
    num_actions = mdp.num_actions
    state = mdp.initial_state(rng)
    action, greedy = epsilon_greedy(
        learner.theta, representation.phi(state), num_actions, epsilon, rng
    )
    steps: list[Transition] = []
    actions: list[int] = []
    flags: list[bool] = []
    psi = _stack_dense(representation.phi(state), action, num_actions)
    final_action: int | None = None
    final_greedy: bool | None = None
    while True:
        if max_steps is not None and len(steps) >= max_steps:
            if mdp.terminal_states:
                raise RuntimeError(
                    f"episode exceeded the {max_steps}-step cap without terminating"
                )
            final_action, final_greedy = action, greedy
            break
        nxt, reward = sample_mdp_step(mdp, state, action, rng)
        terminal = nxt in mdp.terminal_states
        phi_next = representation.phi(nxt)
        steps.append(Transition(
            phi=representation.phi(state), reward=reward, phi_next=phi_next,
            gamma=mdp.gamma, terminal=terminal,
        ))
        actions.append(action)
        flags.append(greedy)
        if terminal:
            if isinstance(learner, TrueOnlineWatkinsQ):
                learner.step(psi, np.zeros(learner.n), reward, mdp.gamma, True)
            else:
                learner.step(psi, np.zeros(learner.n), reward, mdp.gamma)
            break
        next_action, next_greedy = epsilon_greedy(
            learner.theta, phi_next, num_actions, epsilon, rng
        )
        if isinstance(learner, TrueOnlineWatkinsQ):
            q_next = action_values(learner.theta, phi_next, num_actions)
            a_star = next_action if q_next[next_action] == q_next.max() else int(np.argmax(q_next))
            psi_star = _stack_dense(phi_next, a_star, num_actions)
            learner.step(psi, psi_star, reward, mdp.gamma, next_action == a_star)
            psi = psi_star
        else:
            psi_next = _stack_dense(phi_next, next_action, num_actions)
            learner.step(psi, psi_next, reward, mdp.gamma)
            psi = psi_next
        state, action, greedy = nxt, next_action, next_greedy
    return Trajectory(
        steps=steps, actions=actions, greedy=flags, num_actions=num_actions,
        final_action=final_action, final_greedy=final_greedy,
    )


def _stack_dense(phi: np.ndarray, action: int, num_actions: int) -> np.ndarray:
    out = np.zeros(phi.shape[0] * num_actions)
    out[action * phi.shape[0] : (action + 1) * phi.shape[0]] = phi
    return out
