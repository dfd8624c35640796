"""Planning and learning on extended MDPs.

Value iteration solves the compiled product exactly; first-visit Monte
Carlo control learns from the monitored environment without ever seeing
the model. Both share the fixed lexicographic tie-break over actions so
their greedy policies are comparable. Potential-based shaping derives its
potential from monitor distances to acceptance, and the shield narrows
action choices before they are taken.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Union

from .automata import analyze, compile as compile_dfa
from .errors import NoConvergence
from .product import ExtendedMdp, ExtendedState, MonitoredEnv, Shield
from .rdp import Rdp

__all__ = ["ValueTable", "QTable", "EpisodeStats", "ShapingPotential",
           "ShapedEnv", "Shield", "value_iteration", "mc_control",
           "epsilon_greedy", "shaped_env", "shaped_rewards",
           "shield_actions"]

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class ValueTable:
    """Converged state values with the extracted greedy policy.

    Entries align with the MDP's state ids; terminal states carry value 0
    and no action.
    """

    v: tuple[float, ...]
    policy: tuple[Optional[str], ...]


def _backup(mdp: ExtendedMdp, v, gamma: float, sid: int, action: str) -> float:
    return sum(p * (mdp.rewards[(sid, action, t)] + gamma * v[t])
               for t, p in mdp.transitions[(sid, action)])


def value_iteration(mdp: ExtendedMdp, gamma: float, tol: float = 1e-9,
                    max_iters: int = 10_000) -> ValueTable:
    """In-place optimality sweeps until the sup-norm change drops to tol.

    Requires gamma < 1 or an episodic model (gamma = 1 with terminals
    reached under every relevant policy); the greedy tie-break is the
    fixed action order, where any action within 1e-9 of the best counts
    as attaining the maximum.
    """
    actions = [mdp.actions_of(sid) for sid in range(mdp.n_states)]
    v = [0.0] * mdp.n_states
    for _ in range(max_iters):
        delta = 0.0
        for sid in range(mdp.n_states):
            if not actions[sid]:
                continue
            best = max(_backup(mdp, v, gamma, sid, a) for a in actions[sid])
            delta = max(delta, abs(best - v[sid]))
            v[sid] = best
        if delta <= tol:
            break
    else:
        raise NoConvergence(f"no fixpoint within {max_iters} sweeps")
    policy: list[Optional[str]] = []
    for sid in range(mdp.n_states):
        if not actions[sid]:
            policy.append(None)
            continue
        backups = [(a, _backup(mdp, v, gamma, sid, a)) for a in actions[sid]]
        best = max(q for _, q in backups)
        policy.append(next(a for a, q in backups if q >= best - _TIE_TOL))
    return ValueTable(tuple(v), tuple(policy))


@dataclass
class QTable:
    """Running action-value estimates over encountered pairs only."""

    q: dict[tuple[ExtendedState, str], float]
    counts: dict[tuple[ExtendedState, str], int]

    def value(self, state: ExtendedState, action: str) -> float:
        return self.q.get((state, action), 0.0)

    def greedy(self, state: ExtendedState, allowed) -> str:
        best = max(self.value(state, a) for a in allowed)
        return next(a for a in allowed if self.value(state, a) == best)


def epsilon_greedy(table: QTable, state: ExtendedState, allowed,
                   epsilon: float, rng: random.Random) -> str:
    """Uniform over all allowed actions with probability epsilon.

    The greedy action therefore keeps probability 1 − ε + ε/|A| and every
    other allowed action gets ε/|A|. Exact ties among the estimates are
    resolved uniformly at random: ties occur chiefly at states whose
    actions are untried, and a fixed-order pick there would funnel every
    fresh state into the same action and starve exploration.
    """
    if rng.random() < epsilon:
        return allowed[rng.randrange(len(allowed))]
    best = max(table.value(state, a) for a in allowed)
    ties = [a for a in allowed if table.value(state, a) == best]
    if len(ties) == 1:
        return ties[0]
    return ties[rng.randrange(len(ties))]


@dataclass(frozen=True)
class EpisodeStats:
    """Per-episode learning record.

    `return_` is the discounted return of the episode as the learner
    experienced it, shaping adjustments included when the environment is
    shaped; `distinct_states` counts extended states seen since learning
    started, cumulatively.
    """

    return_: float
    steps: int
    distinct_states: int


Env = Union[MonitoredEnv, "ShapedEnv"]


def mc_control(env: Env, *, episodes: int, epsilon: float, gamma: float,
               seed: int, n_step_limit: Optional[int] = None,
               update_mode: str = "average") -> tuple[QTable, list[EpisodeStats]]:
    """First-visit Monte Carlo control with ε-greedy exploration.

    One seeded generator drives both action selection and the
    environment's transitions, so a (seed, env) pair fixes the whole run.
    `average` keeps true running means per (state, action); `overwrite`
    replaces the estimate with the latest first-visit return.
    """
    if update_mode not in ("average", "overwrite"):
        raise ValueError(f"unknown update mode {update_mode!r}")
    rng = random.Random(seed)
    env.rng = rng
    env.n_step_limit = n_step_limit
    table = QTable({}, {})
    seen: set[ExtendedState] = set()
    stats: list[EpisodeStats] = []
    for _ in range(episodes):
        state = env.reset()
        seen.add(state)
        trajectory: list[tuple[ExtendedState, str, float]] = []
        done = env.done
        while not done:
            allowed = env.allowed_actions()
            action = epsilon_greedy(table, state, allowed, epsilon, rng)
            succ, reward, done = env.step(action)
            trajectory.append((state, action, reward))
            state = succ
            seen.add(succ)
        returns = [0.0] * len(trajectory)
        g = 0.0
        for t in range(len(trajectory) - 1, -1, -1):
            g = gamma * g + trajectory[t][2]
            returns[t] = g
        first_visit: dict[tuple[ExtendedState, str], int] = {}
        for t, (s, a, _) in enumerate(trajectory):
            first_visit.setdefault((s, a), t)
        for t, (s, a, _) in enumerate(trajectory):
            key = (s, a)
            if first_visit[key] != t:
                continue
            count = table.counts.get(key, 0) + 1
            table.counts[key] = count
            if update_mode == "average":
                old = table.q.get(key, 0.0)
                table.q[key] = old + (returns[t] - old) / count
            else:
                table.q[key] = returns[t]
        episode_return = returns[0] if trajectory else 0.0
        stats.append(EpisodeStats(episode_return, len(trajectory), len(seen)))
    return table, stats


@dataclass(frozen=True)
class ShapingPotential:
    """Monitor-distance potential for positive reward rules.

    Each contributing rule i adds −κ_i · min(d_i(q_i), D_i) where d_i is
    the distance to acceptance in its monitor, D_i the largest finite
    distance, and κ_i = reward_i / (D_i + 1), so one step of progress is
    worth a bounded fraction of the eventual reward. The potential reads
    only the monitor components, so it is 0 exactly when every rule's
    monitor accepts; in particular a transition into a terminal carries no
    shaping of its own, which keeps ending an episode early worth nothing.
    """

    indices: tuple[int, ...]
    weights: tuple[float, ...]
    distances: tuple[tuple[float, ...], ...]
    caps: tuple[float, ...]

    @classmethod
    def from_model(cls, rdp: Rdp, *, max_states: int = 100_000) -> "ShapingPotential":
        indices, weights, distances, caps = [], [], [], []
        for i, rule in enumerate(rdp.rewards):
            if rule.reward <= 0:
                continue
            dfa = compile_dfa(rule.guard, rdp.props, max_states=max_states)
            distance = analyze(dfa).distance
            finite = [d for d in distance if d != float("inf")]
            cap = max(finite) if finite else 0.0
            indices.append(i)
            weights.append(rule.reward / (cap + 1.0))
            distances.append(distance)
            caps.append(cap)
        return cls(tuple(indices), tuple(weights), tuple(distances),
                   tuple(caps))

    def value(self, s: ExtendedState) -> float:
        total = 0.0
        for i, w, distance, cap in zip(self.indices, self.weights,
                                       self.distances, self.caps):
            total -= w * min(distance[s.monitors[i]], cap)
        return total


class ShapedEnv:
    """Potential-shaped view of an environment.

    Dynamics, shield, and episode boundaries are untouched; only the
    reward returned by `step` is adjusted. The wrapped environment's raw
    reward stays readable through `last_raw_reward`, and the attributes
    the learner manages (`rng`, `n_step_limit`) pass through.
    """

    def __init__(self, env: MonitoredEnv, phi: ShapingPotential, gamma: float):
        self.env = env
        self.phi = phi
        self.gamma = gamma

    def reset(self) -> ExtendedState:
        return self.env.reset()

    def allowed_actions(self) -> tuple[str, ...]:
        return self.env.allowed_actions()

    def step(self, action: str,
             u: Optional[float] = None) -> tuple[ExtendedState, float, bool]:
        prev = self.env.current
        succ, reward, done = self.env.step(action, u)
        shaped = (reward + self.gamma * self.phi.value(succ)
                  - self.phi.value(prev))
        return succ, shaped, done

    @property
    def current(self) -> Optional[ExtendedState]:
        return self.env.current

    @property
    def done(self) -> bool:
        return self.env.done

    @property
    def last_raw_reward(self) -> float:
        return self.env.last_raw_reward

    @property
    def unsafe_visits(self) -> int:
        return self.env.unsafe_visits

    @property
    def rdp(self) -> Rdp:
        return self.env.rdp

    @property
    def rng(self) -> random.Random:
        return self.env.rng

    @rng.setter
    def rng(self, value: random.Random) -> None:
        self.env.rng = value

    @property
    def n_step_limit(self) -> Optional[int]:
        return self.env.n_step_limit

    @n_step_limit.setter
    def n_step_limit(self, value: Optional[int]) -> None:
        self.env.n_step_limit = value


def shaped_env(env: MonitoredEnv, phi: ShapingPotential,
               gamma: float) -> ShapedEnv:
    """Wrap an environment so rewards become r + γΦ(s′) − Φ(s)."""
    return ShapedEnv(env, phi, gamma)


def shaped_rewards(mdp: ExtendedMdp, phi: ShapingPotential,
                   gamma: float) -> ExtendedMdp:
    """The same MDP with potential-shaped rewards, for planning checks."""
    rewards = {(sid, action, sid2):
               r + gamma * phi.value(mdp.states[sid2]) - phi.value(mdp.states[sid])
               for (sid, action, sid2), r in mdp.rewards.items()}
    return ExtendedMdp(states=mdp.states, initial=mdp.initial,
                       terminals=mdp.terminals, transitions=mdp.transitions,
                       rewards=rewards, index=mdp.index)


def shield_actions(env: Env) -> tuple[str, ...]:
    """Actions the shield lets through at the current state."""
    return env.allowed_actions()
