"""Grid-world regular decision processes.

A model couples a labelled grid with transition quadruples, whose formula
guards make dynamics depend on the history, and reward rules, whose guards
make rewards depend on it. Cells are 1-based (x grows rightward, y grows
downward, so (1,1) is the top-left corner) and carry one-hot coordinate
labels {x_is<i>, y_is<j>}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .automata import Dfa
from .errors import (InvalidPostState, MutualExclusionViolation, OutOfBounds,
                     UnknownProposition)
from .logic import Formula

__all__ = ["ACTIONS", "Cell", "GridWorld", "TransitionQuadruple", "RewardRule",
           "Rdp", "label", "move", "decode_label", "match_quadruple",
           "apply_transition"]

# Fixed action order; ties everywhere break in this order.
ACTIONS: tuple[str, ...] = ("n", "e", "s", "w")

_MOVES = {"n": (0, -1), "e": (1, 0), "s": (0, 1), "w": (-1, 0)}

Cell = tuple[int, int]


@dataclass(frozen=True)
class GridWorld:
    """Rectangular grid with a start cell and absorbing terminal cells."""

    width: int
    height: int
    start: Cell
    terminals: frozenset[Cell] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise OutOfBounds(f"grid {self.width}x{self.height} is empty")
        object.__setattr__(self, "terminals", frozenset(self.terminals))
        for cell in (self.start, *self.terminals):
            self._check(cell)

    def _check(self, cell: Cell) -> None:
        x, y = cell
        if not (1 <= x <= self.width and 1 <= y <= self.height):
            raise OutOfBounds(
                f"cell ({x},{y}) outside {self.width}x{self.height} grid")

    @property
    def props(self) -> tuple[str, ...]:
        return tuple(f"x_is{i}" for i in range(1, self.width + 1)) + \
               tuple(f"y_is{j}" for j in range(1, self.height + 1))

    def cells(self) -> tuple[Cell, ...]:
        return tuple((x, y) for y in range(1, self.height + 1)
                     for x in range(1, self.width + 1))


def label(world: GridWorld, cell: Cell) -> frozenset[str]:
    """One-hot coordinate label of a cell."""
    world._check(cell)
    return frozenset({f"x_is{cell[0]}", f"y_is{cell[1]}"})


def move(world: GridWorld, cell: Cell, action: str) -> Cell:
    """Intended destination of an action; moves into a wall stay in place."""
    world._check(cell)
    dx, dy = _MOVES[action]
    x, y = cell[0] + dx, cell[1] + dy
    if 1 <= x <= world.width and 1 <= y <= world.height:
        return (x, y)
    return cell


def decode_label(world: GridWorld, props: frozenset[str]) -> Cell:
    """Inverse of `label`; the prop set must name exactly one in-bounds cell."""
    xs = [p for p in props if p.startswith("x_is")]
    ys = [p for p in props if p.startswith("y_is")]
    if len(xs) != 1 or len(ys) != 1 or len(props) != 2:
        raise InvalidPostState(f"{sorted(props)} is not a one-hot cell label")
    try:
        cell = (int(xs[0][4:]), int(ys[0][4:]))
    except ValueError:
        raise InvalidPostState(f"{sorted(props)} is not a one-hot cell label") from None
    try:
        world._check(cell)
    except OutOfBounds:
        raise InvalidPostState(
            f"{sorted(props)} names out-of-bounds cell {cell}") from None
    return cell


@dataclass(frozen=True)
class TransitionQuadruple:
    """History-guarded stochastic transition override for one action.

    When the guard's monitor accepts the history and the action matches,
    the successor is drawn from `dist`: an assignment to the affected props
    replaces them in the current label, everything else is untouched.
    """

    guard: Formula
    action: str
    affected: frozenset[str]
    dist: tuple[tuple[frozenset[str], float], ...]

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        object.__setattr__(self, "affected", frozenset(self.affected))
        object.__setattr__(self, "dist",
                           tuple((frozenset(a), float(p)) for a, p in self.dist))
        total = 0.0
        for assignment, prob in self.dist:
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"probability {prob} outside [0,1]")
            if not assignment <= self.affected:
                raise ValueError("outcome assigns props outside the affected set")
            total += prob
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"outcome probabilities sum to {total}, not 1")


@dataclass(frozen=True)
class RewardRule:
    """Formula-guarded reward, paid on steps whose monitor accepts."""

    guard: Formula
    reward: float
    mode: str = "every"  # or "once": at most one payment per episode

    def __post_init__(self):
        if self.mode not in ("every", "once"):
            raise ValueError(f"unknown reward mode {self.mode!r}")
        if not math.isfinite(self.reward):
            raise ValueError(f"reward {self.reward} is not finite")


@dataclass(frozen=True)
class Rdp:
    """World, history-dependent dynamics and rewards, default dynamics."""

    world: GridWorld
    quadruples: tuple[TransitionQuadruple, ...] = ()
    rewards: tuple[RewardRule, ...] = ()
    success_prob: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "quadruples", tuple(self.quadruples))
        object.__setattr__(self, "rewards", tuple(self.rewards))
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError(f"success probability {self.success_prob} outside [0,1]")
        declared = set(self.world.props)
        for i, quad in enumerate(self.quadruples):
            stray = quad.affected - declared
            if stray:
                raise UnknownProposition(
                    f"quadruple {i} affects undeclared props: {', '.join(sorted(stray))}")

    @property
    def props(self) -> tuple[str, ...]:
        return self.world.props


def match_quadruple(rdp: Rdp, monitors: Sequence[Dfa], states: Sequence[int],
                    action: str) -> Optional[TransitionQuadruple]:
    """The unique quadruple firing for this action on the current history.

    `states` are the current transition-monitor states, aligned with
    `rdp.quadruples`; a quadruple fires when its monitor accepts. Two or
    more firing at once means the model violates mutual exclusion.
    """
    hits = [i for i, quad in enumerate(rdp.quadruples)
            if quad.action == action and states[i] in monitors[i].accepting]
    if len(hits) > 1:
        raise MutualExclusionViolation(
            f"quadruples {hits} all match action {action!r}")
    return rdp.quadruples[hits[0]] if hits else None


def apply_transition(rdp: Rdp, cell: Cell, action: str,
                     fired: Optional[TransitionQuadruple], u: float) -> Cell:
    """Sample the successor cell from one uniform draw in [0,1).

    With no fired quadruple, the intended move succeeds when u falls below
    the default success probability, otherwise the agent stays. A fired
    quadruple is sampled by inverse CDF in its declared outcome order; the
    drawn assignment overwrites the affected props of the current label.
    """
    if fired is None:
        target = move(rdp.world, cell, action)
        return target if u < rdp.success_prob else cell
    acc = 0.0
    chosen = fired.dist[-1][0]
    for assignment, prob in fired.dist:
        acc += prob
        if u < acc:
            chosen = assignment
            break
    props = (label(rdp.world, cell) - fired.affected) | chosen
    return decode_label(rdp.world, props)
