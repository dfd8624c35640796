"""Bundled experiment configs, stored as plain TOML text.

Every preset goes through the regular config parser, so anything a preset
does can also be written by hand. The grid layout is shared: the agent
starts in corner cell (1, 1) and the episode ends in the opposite corner
of that row, so finishing a goal tour always leaves a walk back through
the grid.
"""

from __future__ import annotations

from ..errors import ConfigError, UnknownPreset
from .config import ExperimentConfig, parse_config

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

__all__ = ["PRESET_NAMES", "preset", "preset_text"]


_MC_BLOCK = """\
[algorithm.mc]
runs = 50
episodes = 1000
n_step_limit = 50
epsilon = 0.1
gamma = 1.0
update_mode = "average"
seed = 0
"""

# The three tour goals name fixed cells, so the identical formula text is
# reused at every grid size; only the walk to the terminal grows.
_EXP1_GOALS = {
    "adjacent": "<true*; x_is2 & y_is3; true*; x_is3 & y_is3; true*>end",
    "center": ("<true*; x_is1 & y_is3; true*; x_is2 & y_is2; true*; "
               "x_is3 & y_is3; true*>end"),
    "diagonal": "<true*; x_is3 & y_is3; true*; x_is1 & y_is1; true*>end",
}

_EXP1_TEMPLATE = """\
# Deterministic {size}x{size} grid; one tour goal worth 1000, paid once.
step_cost = 0.0

[grid]
width = {size}
height = {size}
start = [1, 1]
terminals = [[{size}, 1]]

[[rewards]]
guard = "{goal}"
value = 1000.0
mode = "once"

{mc}
[options]
shaping = false
shield = []
"""

_EXP2 = """\
# Deterministic 5x5 grid with a three-stop tour worth 1000, paid once.
# Shaping is on; pass --set options.shaping=false for the unshaped arm.
step_cost = 0.0

[grid]
width = 5
height = 5
start = [1, 1]
terminals = [[5, 1]]

[[rewards]]
guard = "<true*; x_is1 & y_is5; true*; x_is3 & y_is3; true*; x_is5 & y_is5; true*>end"
value = 1000.0
mode = "once"

{mc}
[options]
shaping = true
shield = []
"""

_EXP3 = """\
# 3x3 grid, one corner goal worth 50, a step cost of -1, and a shield
# that keeps the agent out of cell (1, 2) before it can step there.
step_cost = -1.0

[grid]
width = 3
height = 3
start = [1, 1]
terminals = [[3, 1]]

[[rewards]]
guard = "<true*; x_is1 & y_is3; true*>end"
value = 50.0
mode = "once"

{mc}
[options]
shaping = false
shield = ["[true*]<(!(x_is1 & y_is2))*>end"]
"""

# The corridor pair differs only in how moving east out of (3, 1) is
# modelled: the regular variant keys the outcome on having arrived
# straight from (2, 1), the plain variant uses one fixed distribution.
_EXP4_REGULAR = """\
step_cost = -1.0

[grid]
width = 5
height = 2
start = [1, 1]
terminals = [[5, 1]]

[dynamics]
success_prob = 0.8

[[quadruples]]
guard = "<true*; x_is2 & y_is1; x_is3 & y_is1>end"
action = "e"
affected = ["x_is3", "x_is4"]
distribution = [[["x_is4"], 0.1], [["x_is3"], 0.9]]

[[rewards]]
guard = "<true*; x_is3 & y_is1; true*>end"
value = 10.0
mode = "once"

[algorithm.vi]
gamma = 1.0
tol = 1e-9

[options]
shaping = false
shield = []
"""

_EXP4_PLAIN = """\
step_cost = -1.0

[grid]
width = 5
height = 2
start = [1, 1]
terminals = [[5, 1]]

[dynamics]
success_prob = 0.8

[[quadruples]]
guard = "<true*; x_is3 & y_is1>end"
action = "e"
affected = ["x_is3", "x_is4"]
distribution = [[["x_is4"], 0.8], [["x_is3"], 0.2]]

[[rewards]]
guard = "<true*; x_is3 & y_is1; true*>end"
value = 10.0
mode = "once"

[algorithm.vi]
gamma = 1.0
tol = 1e-9

[options]
shaping = false
shield = []
"""

PRESET_NAMES = ("exp1-adjacent", "exp1-center", "exp1-diagonal", "exp2",
                "exp3", "exp4-plain", "exp4-regular")


def preset_text(name: str, size: int | None = None) -> str:
    """The TOML text of a bundled preset, sized where that applies."""
    if name.startswith("exp1-"):
        goal = _EXP1_GOALS.get(name[len("exp1-"):])
        if goal is None:
            raise UnknownPreset(f"no preset named {name!r}; choose from "
                                + ", ".join(PRESET_NAMES))
        size = 3 if size is None else size
        if not 3 <= size <= 7:
            raise ConfigError("size: exp1 grids range from 3 to 7")
        return _EXP1_TEMPLATE.format(size=size, goal=goal, mc=_MC_BLOCK)
    if size is not None:
        raise ConfigError(f"size: the {name!r} preset has a fixed grid")
    fixed = {"exp2": _EXP2, "exp3": _EXP3, "exp4-plain": _EXP4_PLAIN,
             "exp4-regular": _EXP4_REGULAR}
    if name not in fixed:
        raise UnknownPreset(f"no preset named {name!r}; choose from "
                            + ", ".join(PRESET_NAMES))
    return fixed[name].format(mc=_MC_BLOCK) if "{mc}" in fixed[name] \
        else fixed[name]


def preset(name: str, size: int | None = None) -> ExperimentConfig:
    """A bundled preset parsed and validated like any other config."""
    return parse_config(tomllib.loads(preset_text(name, size)))
