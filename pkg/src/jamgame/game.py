"""Attacker-sensor stochastic game on top of the channel and plant models.

A state is ``(tau, g_s, g_a)``: the holding time since the last received
packet plus both players' current channel gains. The attacker picks a
jamming power, the sensor a transmission power; the attacker's stage
reward is ``Tr[h^tau(P_bar)] + alpha_s * b - alpha_a * a`` and the game
is zero-sum. Holding time is truncated at ``tau_max`` (failures saturate
there), which keeps the state space finite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, packet_arrival_prob, stationary_distribution
from .estimation import SystemModel, boundedness_threshold, steady_state_covariance

__all__ = [
    "GameSpec",
    "GameState",
    "enumerate_states",
    "reward_attacker",
    "transition_distribution",
    "simulate_trajectory",
    "write_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]

GAIN_MODES = ("stationary", "markov")

TRAJECTORY_COLUMNS = ("step", "tau", "g_s", "g_a", "a", "b", "q", "gamma", "trace_P", "r1")


@dataclass(frozen=True)
class GameState:
    """Holding time plus the current sensor/attacker channel gains."""

    tau: int
    g_s: float
    g_a: float


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Full description of the power-control game; derived tables cached.

    ``gain_mode`` selects how next-block gains enter the transition law:
    ``stationary`` draws them from the stationary distribution, ``markov``
    from the kernel rows of the current gains.
    """

    actions_attacker: tuple
    actions_sensor: tuple
    alpha_s: float
    alpha_a: float
    beta: float
    tau_max: int
    channel: ChannelSpec
    model: SystemModel
    gain_mode: str = "stationary"

    # Derived (filled in __post_init__).
    states: tuple = field(init=False, repr=False)
    steady: object = field(init=False, repr=False)
    mu: np.ndarray = field(init=False, repr=False)
    min_arrival_prob: float = field(init=False, repr=False)
    bound_threshold: float = field(init=False, repr=False)
    boundedness_ok: bool = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("actions_attacker", "actions_sensor"):
            acts = tuple(float(v) for v in getattr(self, name))
            if not acts:
                raise ValueError(f"{name} must be nonempty")
            if any(v <= 0 for v in acts):
                raise ValueError(f"{name} must be positive")
            if any(y <= x for x, y in zip(acts, acts[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, acts)
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.alpha_s < 0 or self.alpha_a < 0:
            raise ValueError("reward weights must be nonnegative")
        if self.tau_max < 1:
            raise ValueError("tau_max must be a positive integer")
        if self.gain_mode not in GAIN_MODES:
            raise ValueError(f"gain_mode must be one of {GAIN_MODES}")

        steady = steady_state_covariance(self.model, tau_max=self.tau_max)
        object.__setattr__(self, "steady", steady)
        object.__setattr__(self, "mu", stationary_distribution(self.channel).mu)

        # Gains within a tau block run high-to-low so the flat indexing puts
        # the best channel conditions first (stable dump ordering).
        desc = tuple(sorted(self.channel.gains, reverse=True))
        states = tuple(
            GameState(tau, gs, ga)
            for tau in range(self.tau_max + 1)
            for gs in desc
            for ga in desc
        )
        object.__setattr__(self, "states", states)
        object.__setattr__(
            self, "_index", {(s.tau, s.g_s, s.g_a): i for i, s in enumerate(states)}
        )

        q_min = min(
            packet_arrival_prob(self.channel, b, gs, a, ga)
            for a in self.actions_attacker
            for b in self.actions_sensor
            for gs in self.channel.gains
            for ga in self.channel.gains
        )
        threshold = boundedness_threshold(steady)
        object.__setattr__(self, "min_arrival_prob", q_min)
        object.__setattr__(self, "bound_threshold", threshold)
        object.__setattr__(self, "boundedness_ok", q_min > threshold)
        if not self.boundedness_ok:
            warnings.warn(
                f"worst-case arrival probability {q_min:.4f} does not exceed "
                f"1 - 1/rho(A)^2 = {threshold:.4f}; the attacker can force an "
                "unbounded estimation error",
                stacklevel=2,
            )

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_index(self, state: GameState) -> int:
        try:
            return self._index[(state.tau, state.g_s, state.g_a)]
        except KeyError:
            raise ValueError(f"{state} is not a state of this game") from None

    def attacker_index(self, a: float) -> int:
        try:
            return self.actions_attacker.index(float(a))
        except ValueError:
            raise ValueError(f"attacker action {a} not in {self.actions_attacker}") from None

    def sensor_index(self, b: float) -> int:
        try:
            return self.actions_sensor.index(float(b))
        except ValueError:
            raise ValueError(f"sensor action {b} not in {self.actions_sensor}") from None

    def arrival_prob(self, a: float, b: float, g_s: float, g_a: float) -> float:
        """Success probability of the sensor's packet in the current block."""
        return packet_arrival_prob(self.channel, b, g_s, a, g_a)

    def gain_weights(self, state: GameState) -> tuple:
        """Next-block weights over (g_s', g_a'), per ``gain_mode``."""
        if self.gain_mode == "stationary":
            return self.mu, self.mu
        k = self.channel.kernel
        return (
            k[self.channel.gain_index(state.g_s)],
            k[self.channel.gain_index(state.g_a)],
        )


def enumerate_states(spec: GameSpec) -> tuple:
    """All states in their canonical order (tau major, gains descending)."""
    return spec.states


def reward_attacker(spec: GameSpec, m: int, a: float, b: float) -> float:
    """Attacker stage reward at holding time ``m``; the sensor gets its negation."""
    if not 0 <= m <= spec.tau_max:
        raise ValueError(f"holding time {m} outside [0, {spec.tau_max}]")
    spec.attacker_index(a)
    spec.sensor_index(b)
    return spec.steady.trace_table[m] + spec.alpha_s * b - spec.alpha_a * a


def transition_distribution(spec: GameSpec, state: GameState, a: float, b: float) -> dict:
    """Distribution of the next state under joint action ``(a, b)``.

    On success the holding time resets to 0, on failure it saturates at
    ``tau_max``; next gains are weighted per ``gain_mode``. Probabilities
    sum to 1 over the support.
    """
    spec.state_index(state)
    q = spec.arrival_prob(a, b, state.g_s, state.g_a)
    w_s, w_a = spec.gain_weights(state)
    tau_fail = min(state.tau + 1, spec.tau_max)
    out: dict = {}
    for i, gs in enumerate(spec.channel.gains):
        for j, ga in enumerate(spec.channel.gains):
            w = w_s[i] * w_a[j]
            if w == 0.0:
                continue
            if q > 0.0:
                ok = GameState(0, gs, ga)
                out[ok] = out.get(ok, 0.0) + q * w
            if q < 1.0:
                fail = GameState(tau_fail, gs, ga)
                out[fail] = out.get(fail, 0.0) + (1.0 - q) * w
    return out


def _sample_gain(gains, weights, rng) -> float:
    u = rng.random()
    acc = 0.0
    for g, w in zip(gains, weights):
        acc += w
        if u < acc:
            return g
    return gains[-1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Columnar record of one closed-loop rollout."""

    steps: np.ndarray
    tau: np.ndarray
    g_s: np.ndarray
    g_a: np.ndarray
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    gamma: np.ndarray
    trace_p: np.ndarray
    r1: np.ndarray

    def discounted_return(self, beta: float) -> float:
        return float(np.sum(self.r1 * beta ** self.steps))


def simulate_trajectory(
    spec: GameSpec,
    policy_a,
    policy_s,
    horizon: int,
    rng: np.random.Generator,
    start: GameState = None,
) -> Trajectory:
    """Roll the closed loop forward under fixed per-state mixed policies.

    ``policy_a``/``policy_s`` are arrays of shape ``(n_states, n_actions)``
    whose rows are probability vectors. Records the pre-transition state,
    the joint action, the arrival outcome and the attacker reward at every
    step.
    """
    pa = np.asarray(policy_a, dtype=float)
    ps = np.asarray(policy_s, dtype=float)
    na, nb = len(spec.actions_attacker), len(spec.actions_sensor)
    if pa.shape != (spec.n_states, na) or ps.shape != (spec.n_states, nb):
        raise ValueError("policies must cover every state")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    state = spec.states[0] if start is None else start
    spec.state_index(state)

    cols = {name: [] for name in TRAJECTORY_COLUMNS}
    for k in range(horizon):
        si = spec.state_index(state)
        ai = _sample_index(pa[si], rng)
        bi = _sample_index(ps[si], rng)
        a = spec.actions_attacker[ai]
        b = spec.actions_sensor[bi]
        q = spec.arrival_prob(a, b, state.g_s, state.g_a)
        gamma = 1 if rng.random() < q else 0
        cols["step"].append(k)
        cols["tau"].append(state.tau)
        cols["g_s"].append(state.g_s)
        cols["g_a"].append(state.g_a)
        cols["a"].append(a)
        cols["b"].append(b)
        cols["q"].append(q)
        cols["gamma"].append(gamma)
        cols["trace_P"].append(spec.steady.trace_table[state.tau])
        cols["r1"].append(reward_attacker(spec, state.tau, a, b))
        tau_next = 0 if gamma else min(state.tau + 1, spec.tau_max)
        w_s, w_a = spec.gain_weights(state)
        state = GameState(
            tau_next,
            _sample_gain(spec.channel.gains, w_s, rng),
            _sample_gain(spec.channel.gains, w_a, rng),
        )
    return Trajectory(
        steps=np.array(cols["step"]),
        tau=np.array(cols["tau"]),
        g_s=np.array(cols["g_s"]),
        g_a=np.array(cols["g_a"]),
        a=np.array(cols["a"]),
        b=np.array(cols["b"]),
        q=np.array(cols["q"]),
        gamma=np.array(cols["gamma"]),
        trace_p=np.array(cols["trace_P"]),
        r1=np.array(cols["r1"]),
    )


def _sample_index(probs, rng) -> int:
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def write_trajectory_csv(traj: Trajectory, path) -> None:
    arrays = (
        traj.steps, traj.tau, traj.g_s, traj.g_a, traj.a,
        traj.b, traj.q, traj.gamma, traj.trace_p, traj.r1,
    )
    with open(path, "w") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if float(v) == int(v):
        return str(int(v))
    return repr(float(v))
