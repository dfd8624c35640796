"""Shared model builders and formula fuzzing helpers for the test suite."""

import itertools

from rdpgrid.logic import parse_ldlf
from rdpgrid.product import Shield
from rdpgrid.rdp import GridWorld, Rdp, RewardRule, TransitionQuadruple


def worked_example_model() -> Rdp:
    """3x3 model whose move east out of (2,3) depends on the path there."""
    world = GridWorld(3, 3, (1, 1), frozenset())
    affected = frozenset({"x_is2", "x_is3"})
    via_corner = TransitionQuadruple(
        parse_ldlf("<true*; x_is1 & y_is3; x_is2 & y_is3>end"), "e", affected,
        ((frozenset({"x_is3"}), 1.0),))
    otherwise = TransitionQuadruple(
        parse_ldlf("<true*; (!x_is1 | !y_is3); x_is2 & y_is3>end"), "e", affected,
        ((frozenset({"x_is3"}), 0.1), (frozenset({"x_is2"}), 0.9)))
    return Rdp(world, quadruples=(via_corner, otherwise))


def corridor_goal_rule() -> RewardRule:
    return RewardRule(parse_ldlf("<true*; x_is3 & y_is1; true*>end"), 10.0,
                      mode="once")


def corridor_regular_model() -> Rdp:
    """5x2 corridor where moving east out of (3,1) depends on the history.

    Arriving straight from (2,1) makes the move mostly fail (0.1/0.9);
    any other history uses the default 0.8 success probability.
    """
    world = GridWorld(5, 2, (1, 1), frozenset({(5, 1)}))
    quad = TransitionQuadruple(
        parse_ldlf("<true*; x_is2 & y_is1; x_is3 & y_is1>end"), "e",
        frozenset({"x_is3", "x_is4"}),
        ((frozenset({"x_is4"}), 0.1), (frozenset({"x_is3"}), 0.9)))
    return Rdp(world, quadruples=(quad,), rewards=(corridor_goal_rule(),),
               success_prob=0.8)


def corridor_plain_model() -> Rdp:
    """History-free variant: east out of (3,1) is always 0.8/0.2."""
    world = GridWorld(5, 2, (1, 1), frozenset({(5, 1)}))
    quad = TransitionQuadruple(
        parse_ldlf("<true*; x_is3 & y_is1>end"), "e",
        frozenset({"x_is3", "x_is4"}),
        ((frozenset({"x_is4"}), 0.8), (frozenset({"x_is3"}), 0.2)))
    return Rdp(world, quadruples=(quad,), rewards=(corridor_goal_rule(),),
               success_prob=0.8)


def safe_corner_model() -> Rdp:
    """3x3 world rewarding the bottom-left corner once, terminal top-right."""
    world = GridWorld(3, 3, (1, 1), frozenset({(3, 1)}))
    goal = RewardRule(parse_ldlf("<true*; x_is1 & y_is3; true*>end"), 50.0,
                      mode="once")
    return Rdp(world, rewards=(goal,))


def safe_corner_shield() -> Shield:
    """Shield declaring cell (1,2) unsafe for the 3x3 corner model."""
    world = GridWorld(3, 3, (1, 1), frozenset({(3, 1)}))
    return Shield.from_formulas(
        [parse_ldlf("[true*]<(!(x_is1 & y_is2))*>end")], world.props)


# ------------------------------------------------ formula fuzzing helpers

LOGIC_PROPS = ("a", "b", "c")


def all_labels(props):
    return [frozenset(combo) for r in range(len(props) + 1)
            for combo in itertools.combinations(props, r)]


def all_traces(props, max_len):
    labels = all_labels(props)
    for n in range(max_len + 1):
        yield from (list(t) for t in itertools.product(labels, repeat=n))


def random_formula(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        return rng.choice(["tt", "ff", "end"])
    kind = rng.randrange(6)
    if kind == 0:
        return f"!({random_formula(rng, depth - 1)})"
    if kind == 1:
        return (f"({random_formula(rng, depth - 1)}) & "
                f"({random_formula(rng, depth - 1)})")
    if kind == 2:
        return (f"({random_formula(rng, depth - 1)}) | "
                f"({random_formula(rng, depth - 1)})")
    bracket = "<{}>{}" if kind in (3, 4) else "[{}]({})"
    return bracket.format(random_path(rng, depth - 1),
                          random_formula(rng, depth - 1))


def random_path(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        atoms = ["a", "b", "c", "true", "false", "!a", "a & b", "a | !c"]
        return rng.choice(atoms)
    kind = rng.randrange(4)
    if kind == 0:
        return f"({random_path(rng, depth - 1)}); ({random_path(rng, depth - 1)})"
    if kind == 1:
        return f"({random_path(rng, depth - 1)}) + ({random_path(rng, depth - 1)})"
    if kind == 2:
        return f"({random_path(rng, depth - 1)})*"
    return f"({random_formula(rng, depth - 1)})?"
