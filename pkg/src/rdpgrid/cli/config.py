"""Experiment configuration files and their validation.

A config is a flat TOML document: a `[grid]` table, optional `[dynamics]`,
optional `[[quadruples]]` and `[[rewards]]` arrays, a `step_cost` scalar,
exactly one of `[algorithm.mc]` or `[algorithm.vi]`, and an `[options]`
table for shaping and shield formulas. Every validation failure raises
`ConfigError` with the offending field named by path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from ..errors import ConfigError, LdlfSyntaxError, RdpgridError
from ..logic import Formula, parse_ldlf, props_of
from ..product import Shield
from ..rdp import ACTIONS, GridWorld, Rdp, RewardRule, TransitionQuadruple

__all__ = ["ExperimentConfig", "McParams", "ViParams", "load_config",
           "apply_overrides", "parse_config", "build_model"]


@dataclass(frozen=True)
class McParams:
    """Monte Carlo control settings for one experiment."""

    runs: int
    episodes: int
    n_step_limit: Optional[int]
    epsilon: float
    gamma: float
    update_mode: str
    seed: int


@dataclass(frozen=True)
class ViParams:
    """Value iteration settings for one experiment."""

    gamma: float
    tol: float


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment: built model pieces plus run settings."""

    world: GridWorld
    success_prob: float
    quadruples: tuple[TransitionQuadruple, ...]
    rewards: tuple[RewardRule, ...]
    step_cost: float
    algorithm: Union[McParams, ViParams]
    shaping: bool
    shield_formulas: tuple[Formula, ...]


def load_config(path: Union[str, Path]) -> dict:
    """Read a TOML config file into a raw dictionary."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc


def apply_overrides(raw: dict, assignments: list[str]) -> dict:
    """Apply `dotted.key=value` overrides to a raw config dictionary.

    Values are parsed as TOML literals and fall back to plain strings, so
    `--set options.shaping=false` and `--set rewards.guard=...` both work.
    List indexes are not supported; overrides address tables by key only.
    """
    for assignment in assignments:
        key, sep, value = assignment.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {assignment!r}: expected key=value")
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(
                    f"override {key}: {part} is not a table")
            node = nxt
        node[parts[-1]] = parsed
    return raw


def _require(table: dict, key: str, kind, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}: missing")
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, "
                          f"got {type(value).__name__}")
    return value


def _cell(value, path: str) -> tuple[int, int]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool)
                       for v in value)):
        raise ConfigError(f"{path}: expected a two-integer cell [x, y]")
    return (value[0], value[1])


def _formula(text, props, path: str) -> Formula:
    if not isinstance(text, str):
        raise ConfigError(f"{path}: expected an LDLf formula string")
    try:
        formula = parse_ldlf(text)
    except LdlfSyntaxError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = sorted(props_of(formula) - set(props))
    if unknown:
        raise ConfigError(f"{path}: unknown propositions {', '.join(unknown)}")
    return formula


def _parse_grid(raw: dict) -> GridWorld:
    grid = raw.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("grid: missing table")
    width = _require(grid, "width", int, "grid")
    height = _require(grid, "height", int, "grid")
    start = _cell(_require(grid, "start", list, "grid"), "grid.start")
    raw_terms = grid.get("terminals", [])
    if not isinstance(raw_terms, list):
        raise ConfigError("grid.terminals: expected a list of cells")
    terminals = frozenset(
        _cell(t, f"grid.terminals[{i}]") for i, t in enumerate(raw_terms))
    try:
        return GridWorld(width, height, start, terminals)
    except RdpgridError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _parse_distribution(value, props, path: str):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of "
                          "[props, probability] pairs")
    out = []
    for i, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{path}[{i}]: expected [props, probability]")
        names, prob = pair
        if (not isinstance(names, list)
                or not all(isinstance(n, str) for n in names)):
            raise ConfigError(f"{path}[{i}]: expected a list of proposition "
                              "names first")
        unknown = [n for n in names if n not in props]
        if unknown:
            raise ConfigError(f"{path}[{i}]: unknown propositions "
                              f"{', '.join(sorted(unknown))}")
        if isinstance(prob, int) and not isinstance(prob, bool):
            prob = float(prob)
        if not isinstance(prob, float):
            raise ConfigError(f"{path}[{i}]: expected a probability second")
        out.append((frozenset(names), prob))
    return tuple(out)


def _parse_quadruples(raw: dict, props) -> tuple[TransitionQuadruple, ...]:
    items = raw.get("quadruples", [])
    if not isinstance(items, list):
        raise ConfigError("quadruples: expected an array of tables")
    out = []
    for i, item in enumerate(items):
        path = f"quadruples[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{path}: expected a table")
        guard = _formula(item.get("guard"), props, f"{path}.guard")
        action = _require(item, "action", str, path)
        if action not in ACTIONS:
            raise ConfigError(f"{path}.action: {action!r} is not one of "
                              f"{', '.join(ACTIONS)}")
        affected = item.get("affected")
        if (not isinstance(affected, list)
                or not all(isinstance(a, str) for a in affected)):
            raise ConfigError(f"{path}.affected: expected a list of "
                              "proposition names")
        dist = _parse_distribution(item.get("distribution"), props,
                                   f"{path}.distribution")
        try:
            out.append(TransitionQuadruple(guard, action,
                                           frozenset(affected), dist))
        except RdpgridError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return tuple(out)


def _parse_rewards(raw: dict, props) -> tuple[RewardRule, ...]:
    items = raw.get("rewards", [])
    if not isinstance(items, list):
        raise ConfigError("rewards: expected an array of tables")
    out = []
    for i, item in enumerate(items):
        path = f"rewards[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{path}: expected a table")
        guard = _formula(item.get("guard"), props, f"{path}.guard")
        value = _require(item, "value", float, path)
        mode = item.get("mode", "once")
        if mode not in ("once", "every"):
            raise ConfigError(f"{path}.mode: expected 'once' or 'every', "
                              f"got {mode!r}")
        try:
            out.append(RewardRule(guard, value, mode=mode))
        except RdpgridError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return tuple(out)


def _parse_algorithm(raw: dict) -> Union[McParams, ViParams]:
    algorithm = raw.get("algorithm")
    if not isinstance(algorithm, dict) or not algorithm:
        raise ConfigError("algorithm: missing table; declare algorithm.mc "
                          "or algorithm.vi")
    if set(algorithm) - {"mc", "vi"}:
        extra = ", ".join(sorted(set(algorithm) - {"mc", "vi"}))
        raise ConfigError(f"algorithm: unknown solver {extra}")
    if len(algorithm) != 1:
        raise ConfigError("algorithm: declare exactly one of mc or vi")
    if "vi" in algorithm:
        vi = algorithm["vi"]
        gamma = _require(vi, "gamma", float, "algorithm.vi")
        tol = vi.get("tol", 1e-9)
        if isinstance(tol, int) and not isinstance(tol, bool):
            tol = float(tol)
        if not isinstance(tol, float) or tol <= 0:
            raise ConfigError("algorithm.vi.tol: expected a positive number")
        return ViParams(gamma, tol)
    mc = algorithm["mc"]
    path = "algorithm.mc"
    runs = _require(mc, "runs", int, path)
    episodes = _require(mc, "episodes", int, path)
    if runs < 1:
        raise ConfigError(f"{path}.runs: must be at least 1")
    if episodes < 1:
        raise ConfigError(f"{path}.episodes: must be at least 1")
    limit = mc.get("n_step_limit")
    if limit is not None and (not isinstance(limit, int)
                              or isinstance(limit, bool) or limit < 1):
        raise ConfigError(f"{path}.n_step_limit: expected a positive integer")
    epsilon = _require(mc, "epsilon", float, path)
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"{path}.epsilon: must lie in [0, 1]")
    gamma = _require(mc, "gamma", float, path)
    update_mode = mc.get("update_mode", "average")
    if update_mode not in ("average", "overwrite"):
        raise ConfigError(f"{path}.update_mode: expected 'average' or "
                          f"'overwrite', got {update_mode!r}")
    seed = _require(mc, "seed", int, path)
    return McParams(runs, episodes, limit, epsilon, gamma, update_mode, seed)


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw dictionary and build the model pieces it describes."""
    world = _parse_grid(raw)
    props = world.props
    dynamics = raw.get("dynamics", {})
    if not isinstance(dynamics, dict):
        raise ConfigError("dynamics: expected a table")
    success_prob = dynamics.get("success_prob", 1.0)
    if isinstance(success_prob, int) and not isinstance(success_prob, bool):
        success_prob = float(success_prob)
    if not isinstance(success_prob, float) or not 0.0 <= success_prob <= 1.0:
        raise ConfigError("dynamics.success_prob: must lie in [0, 1]")
    quadruples = _parse_quadruples(raw, props)
    rewards = _parse_rewards(raw, props)
    step_cost = raw.get("step_cost", 0.0)
    if isinstance(step_cost, int) and not isinstance(step_cost, bool):
        step_cost = float(step_cost)
    if not isinstance(step_cost, float):
        raise ConfigError("step_cost: expected a number")
    algorithm = _parse_algorithm(raw)
    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError("options: expected a table")
    shaping = options.get("shaping", False)
    if not isinstance(shaping, bool):
        raise ConfigError("options.shaping: expected a boolean")
    if shaping and isinstance(algorithm, ViParams):
        raise ConfigError("options.shaping: shaping applies to algorithm.mc "
                          "runs only")
    raw_shield = options.get("shield", [])
    if not isinstance(raw_shield, list):
        raise ConfigError("options.shield: expected a list of formulas")
    shield_formulas = tuple(
        _formula(f, props, f"options.shield[{i}]")
        for i, f in enumerate(raw_shield))
    return ExperimentConfig(world, success_prob, quadruples, rewards,
                            step_cost, algorithm, shaping, shield_formulas)


def build_model(cfg: ExperimentConfig) -> tuple[Rdp, Optional[Shield]]:
    """Assemble the decision process and optional shield for a config."""
    try:
        rdp = Rdp(cfg.world, quadruples=cfg.quadruples, rewards=cfg.rewards,
                  success_prob=cfg.success_prob)
    except RdpgridError as exc:
        raise ConfigError(f"model: {exc}") from exc
    shield = None
    if cfg.shield_formulas:
        shield = Shield.from_formulas(cfg.shield_formulas, cfg.world.props)
    return rdp, shield
