"""Products of a grid model with its formula monitors.

Two views of the same construction: `compile_offline` expands the full
reachable extended MDP up front (every monitor advanced on every successor
label, stochastic branching enumerated), and `MonitoredEnv` advances the
monitors lazily while an agent interacts step by step. Replaying a fixed
action sequence with the same random draws through either view visits the
same extended states and pays the same rewards.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .automata import Dfa, analyze, compile as compile_dfa, dfa_step
from .errors import EmptyShield, ResourceLimit
from .logic import Formula
from .rdp import (ACTIONS, Cell, Rdp, apply_transition, decode_label, label,
                  match_quadruple, move)

__all__ = ["ExtendedState", "ExtendedMdp", "MonitoredEnv", "Shield",
           "compile_offline", "project", "env_reset", "env_step",
           "to_dot", "to_json"]


@dataclass(frozen=True)
class ExtendedState:
    """Monitor states bundled with the underlying grid cell.

    `monitors` holds the reward-rule monitors first, then the quadruple
    monitors, in model order. `fired` carries one flag per reward rule for
    once-per-episode bookkeeping (always false for every-satisfaction
    rules); `safety` holds shield monitor states and stays empty when no
    shield is attached.
    """

    monitors: tuple[int, ...]
    base: Cell
    fired: tuple[bool, ...] = ()
    safety: tuple[int, ...] = ()


def project(s: ExtendedState) -> Cell:
    """Drop the monitor components."""
    return s.base


@dataclass(frozen=True)
class Shield:
    """Safety monitors plus their dead states, for preemptive filtering.

    An action passes the shield only if every successor cell in its
    support keeps every monitor out of the dead set.
    """

    monitors: tuple[Dfa, ...]
    dead: tuple[frozenset[int], ...]

    @classmethod
    def from_formulas(cls, formulas: Sequence[Formula], props: Sequence[str],
                      *, max_states: int = 100_000) -> "Shield":
        dfas = tuple(compile_dfa(f, props, max_states=max_states)
                     for f in formulas)
        return cls(dfas, tuple(analyze(d).dead for d in dfas))


class _Monitors:
    """Compiled monitors with dense (state, cell) advance tables."""

    def __init__(self, rdp: Rdp, shield: Optional[Shield],
                 max_states: int = 100_000):
        self.rdp = rdp
        props = rdp.props
        self.reward_dfas = tuple(
            compile_dfa(r.guard, props, max_states=max_states)
            for r in rdp.rewards)
        self.trans_dfas = tuple(
            compile_dfa(q.guard, props, max_states=max_states)
            for q in rdp.quadruples)
        self.safety_dfas = shield.monitors if shield else ()
        self.dead = shield.dead if shield else ()
        cells = rdp.world.cells()
        self.cell_index = {c: i for i, c in enumerate(cells)}
        labels = [label(rdp.world, c) for c in cells]

        def table(dfa: Dfa) -> tuple[tuple[int, ...], ...]:
            return tuple(tuple(dfa_step(dfa, q, lab) for lab in labels)
                         for q in range(dfa.n_states))

        self.reward_tables = tuple(table(d) for d in self.reward_dfas)
        self.trans_tables = tuple(table(d) for d in self.trans_dfas)
        self.safety_tables = tuple(table(d) for d in self.safety_dfas)

    def initial_state(self) -> ExtendedState:
        """All monitors advanced on the start label; it is observed."""
        ci = self.cell_index[self.rdp.world.start]
        rq = tuple(t[d.initial][ci]
                   for t, d in zip(self.reward_tables, self.reward_dfas))
        tq = tuple(t[d.initial][ci]
                   for t, d in zip(self.trans_tables, self.trans_dfas))
        sq = tuple(t[d.initial][ci]
                   for t, d in zip(self.safety_tables, self.safety_dfas))
        fired = tuple(rule.mode == "once" and q in dfa.accepting
                      for rule, dfa, q in zip(self.rdp.rewards,
                                              self.reward_dfas, rq))
        return ExtendedState(rq + tq, self.rdp.world.start, fired, sq)

    def advance(self, s: ExtendedState, cell: Cell) -> tuple[ExtendedState, float]:
        """Advance every monitor on the successor label; pay what accepts.

        Once-per-episode rules pay only while their flag is down; entering
        acceptance raises it, including silently when the reward was
        already collected.
        """
        ci = self.cell_index[cell]
        n_r = len(self.reward_dfas)
        rq = tuple(self.reward_tables[i][s.monitors[i]][ci]
                   for i in range(n_r))
        tq = tuple(self.trans_tables[j][s.monitors[n_r + j]][ci]
                   for j in range(len(self.trans_dfas)))
        sq = tuple(self.safety_tables[k][s.safety[k]][ci]
                   for k in range(len(self.safety_dfas)))
        reward = 0.0
        fired = list(s.fired)
        for i, (rule, dfa) in enumerate(zip(self.rdp.rewards, self.reward_dfas)):
            if rq[i] in dfa.accepting:
                if rule.mode == "every":
                    reward += rule.reward
                elif not fired[i]:
                    reward += rule.reward
                    fired[i] = True
        return ExtendedState(rq + tq, cell, tuple(fired), sq), reward

    def outcomes(self, s: ExtendedState, action: str) -> list[tuple[Cell, float]]:
        """Successor-cell support with probabilities, in declared order."""
        n_r = len(self.reward_dfas)
        quad = match_quadruple(self.rdp, self.trans_dfas,
                               s.monitors[n_r:], action)
        world = self.rdp.world
        if quad is None:
            target = move(world, s.base, action)
            p = self.rdp.success_prob
            if target == s.base:
                return [(s.base, 1.0)]
            if p >= 1.0:
                return [(target, 1.0)]
            if p <= 0.0:
                return [(s.base, 1.0)]
            return [(target, p), (s.base, 1.0 - p)]
        merged: dict[Cell, float] = {}
        base_label = label(world, s.base)
        for assignment, prob in quad.dist:
            if prob == 0.0:
                continue
            target = decode_label(world, (base_label - quad.affected) | assignment)
            merged[target] = merged.get(target, 0.0) + prob
        return list(merged.items())

    def allowed(self, s: ExtendedState) -> tuple[str, ...]:
        """Actions whose whole successor support stays shield-safe."""
        if not self.safety_dfas:
            return ACTIONS
        out = []
        for action in ACTIONS:
            safe = True
            for cell, _ in self.outcomes(s, action):
                ci = self.cell_index[cell]
                for k in range(len(self.safety_dfas)):
                    if self.safety_tables[k][s.safety[k]][ci] in self.dead[k]:
                        safe = False
                        break
                if not safe:
                    break
            if safe:
                out.append(action)
        if not out:
            raise EmptyShield(f"no safe action at {s}")
        return tuple(out)

    def is_unsafe(self, s: ExtendedState) -> bool:
        return any(q in self.dead[k] for k, q in enumerate(s.safety))


@dataclass(frozen=True, eq=False)
class ExtendedMdp:
    """Reachable-only extended MDP over ExtendedStates.

    Transitions exist only for actions available in a state (all of them
    without a shield, the shield-approved subset with one); terminal
    states have none.
    """

    states: tuple[ExtendedState, ...]
    initial: int
    terminals: frozenset[int]
    transitions: dict[tuple[int, str], tuple[tuple[int, float], ...]]
    rewards: dict[tuple[int, str, int], float]
    index: dict[ExtendedState, int] = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def actions_of(self, sid: int) -> tuple[str, ...]:
        return tuple(a for a in ACTIONS if (sid, a) in self.transitions)


def compile_offline(rdp: Rdp, *, step_cost: float = 0.0,
                    shield: Optional[Shield] = None,
                    max_states: int = 1_000_000) -> ExtendedMdp:
    """Expand the reachable extended MDP by frontier search from the start.

    Every monitor starts advanced on the start label. For each state and
    allowed action the full successor support is enumerated, so stochastic
    branching is captured exactly; rewards attach to (state, action,
    successor) triples. Terminal cells absorb. States beyond `max_states`
    raise ResourceLimit.
    """
    mon = _Monitors(rdp, shield)
    start = mon.initial_state()
    states = [start]
    index = {start: 0}
    transitions: dict[tuple[int, str], tuple[tuple[int, float], ...]] = {}
    rewards: dict[tuple[int, str, int], float] = {}
    terminals = set()
    queue = deque([0])
    while queue:
        sid = queue.popleft()
        s = states[sid]
        if s.base in rdp.world.terminals:
            terminals.add(sid)
            continue
        for action in mon.allowed(s):
            pairs = []
            total = 0.0
            for cell, prob in mon.outcomes(s, action):
                succ, reward = mon.advance(s, cell)
                if succ not in index:
                    if len(states) >= max_states:
                        raise ResourceLimit(
                            f"extended MDP exceeds {max_states} states")
                    index[succ] = len(states)
                    states.append(succ)
                    queue.append(index[succ])
                sid2 = index[succ]
                pairs.append((sid2, prob))
                rewards[(sid, action, sid2)] = reward + step_cost
                total += prob
            assert abs(total - 1.0) <= 1e-9, \
                f"outgoing probabilities sum to {total}"
            transitions[(sid, action)] = tuple(pairs)
    return ExtendedMdp(states=tuple(states), initial=0,
                       terminals=frozenset(terminals),
                       transitions=transitions, rewards=rewards, index=index)


class MonitoredEnv:
    """Step-by-step environment that keeps the monitors in sync.

    The learner owns the interaction loop: `reset` begins an episode,
    `step` applies one action, `allowed_actions` consults the shield (all
    actions when none is attached). The RNG is plain `random.Random` and
    may be replaced between episodes; passing an explicit draw to `step`
    bypasses it for replay. `unsafe_visits` accumulates across episodes.
    """

    def __init__(self, rdp: Rdp, *, step_cost: float = 0.0,
                 shield: Optional[Shield] = None,
                 n_step_limit: Optional[int] = None,
                 rng: Optional[random.Random] = None):
        self._mon = _Monitors(rdp, shield)
        self.rdp = rdp
        self.step_cost = step_cost
        self.n_step_limit = n_step_limit
        self.rng = rng if rng is not None else random.Random()
        self.current: Optional[ExtendedState] = None
        self.done = False
        self.steps = 0
        self.unsafe_visits = 0
        self.last_raw_reward = 0.0

    def reset(self) -> ExtendedState:
        """Start an episode; monitors observe the start label."""
        self.current = self._mon.initial_state()
        self.steps = 0
        self.done = self.current.base in self.rdp.world.terminals
        return self.current

    def allowed_actions(self) -> tuple[str, ...]:
        if self.current is None:
            raise RuntimeError("reset the environment before querying actions")
        return self._mon.allowed(self.current)

    def step(self, action: str,
             u: Optional[float] = None) -> tuple[ExtendedState, float, bool]:
        """Apply one action; optionally replay a fixed uniform draw."""
        if self.current is None:
            raise RuntimeError("reset the environment before stepping")
        if self.done:
            raise RuntimeError("episode finished; reset the environment")
        n_r = len(self.rdp.rewards)
        quad = match_quadruple(self.rdp, self._mon.trans_dfas,
                               self.current.monitors[n_r:], action)
        if u is None:
            u = self.rng.random()
        cell = apply_transition(self.rdp, self.current.base, action, quad, u)
        succ, reward = self._mon.advance(self.current, cell)
        reward += self.step_cost
        if self._mon.is_unsafe(succ):
            self.unsafe_visits += 1
        self.steps += 1
        self.current = succ
        self.done = (cell in self.rdp.world.terminals or
                     (self.n_step_limit is not None
                      and self.steps >= self.n_step_limit))
        self.last_raw_reward = reward
        return succ, reward, self.done


def env_reset(env: MonitoredEnv) -> ExtendedState:
    return env.reset()


def env_step(env: MonitoredEnv, action: str,
             u: Optional[float] = None) -> tuple[ExtendedState, float, bool]:
    return env.step(action, u)


def _state_text(s: ExtendedState) -> str:
    parts = [",".join(map(str, s.monitors)) or "-",
             f"({s.base[0]},{s.base[1]})"]
    if s.fired:
        parts.append("fired=" + "".join("1" if b else "0" for b in s.fired))
    if s.safety:
        parts.append("safe=" + ",".join(map(str, s.safety)))
    return " | ".join(parts)


def _sorted_edges(mdp: ExtendedMdp):
    return sorted(mdp.transitions.items(),
                  key=lambda kv: (kv[0][0], ACTIONS.index(kv[0][1])))


def to_dot(mdp: ExtendedMdp, max_states: int = 2_000) -> str:
    """Graphviz rendering of the extended MDP, for small products only."""
    if mdp.n_states > max_states:
        raise ResourceLimit(
            f"refusing to render {mdp.n_states} states (cap {max_states})")
    lines = ["digraph product {", "  rankdir=LR;", "  node [shape=box];",
             '  __start [shape=point, label=""];',
             f"  __start -> s{mdp.initial};"]
    for sid, state in enumerate(mdp.states):
        shape = ', shape=doubleoctagon' if sid in mdp.terminals else ""
        text = _state_text(state).replace('"', '\\"')
        lines.append(f'  s{sid} [label="{text}"{shape}];')
    for (sid, action), pairs in _sorted_edges(mdp):
        for sid2, prob in pairs:
            reward = mdp.rewards[(sid, action, sid2)]
            lines.append(f'  s{sid} -> s{sid2} '
                         f'[label="{action} p={prob:g} r={reward:g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(mdp: ExtendedMdp) -> str:
    """Stable JSON description of the extended MDP for golden tests."""
    payload = {
        "states": [{"monitors": list(s.monitors), "cell": list(s.base),
                    "fired": [int(b) for b in s.fired],
                    "safety": list(s.safety)} for s in mdp.states],
        "initial": mdp.initial,
        "terminals": sorted(mdp.terminals),
        "transitions": [[sid, action, [[sid2, prob] for sid2, prob in pairs]]
                        for (sid, action), pairs in _sorted_edges(mdp)],
        "rewards": [[sid, action, sid2, r]
                    for (sid, action, sid2), r in
                    sorted(mdp.rewards.items(),
                           key=lambda kv: (kv[0][0], ACTIONS.index(kv[0][1]),
                                           kv[0][2]))],
    }
    return json.dumps(payload, indent=2) + "\n"
