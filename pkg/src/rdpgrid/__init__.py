"""Grid-world regular decision processes with temporal-logic monitors.

The usual workflow: parse LDLf formulas (`parse_ldlf`), attach them to a
grid world as reward rules, transition quadruples, or safety shields
(`Rdp`, `RewardRule`, `TransitionQuadruple`, `Shield`), compile the model
off-line (`compile_offline`) or interact on-line (`MonitoredEnv`), then
solve with `value_iteration` or `mc_control`, optionally through
`shaped_env`. The `cli` subpackage wraps the same pipeline behind TOML
configs and experiment presets. Automaton and product DOT/JSON exporters
keep their module namespaces (`automata.to_dot`, `product.to_dot`).
"""

from .cli import ExperimentConfig, load_config, parse_config, preset, run_experiment
from .errors import RdpgridError
from .logic import eval_trace, parse_ldlf, print_ldlf, props_of
from .product import (ExtendedMdp, ExtendedState, MonitoredEnv, Shield,
                      compile_offline, project)
from .rdp import ACTIONS, GridWorld, Rdp, RewardRule, TransitionQuadruple
from .solve import (EpisodeStats, QTable, ShapingPotential, ValueTable,
                    mc_control, shaped_env, shaped_rewards, shield_actions,
                    value_iteration)

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "EpisodeStats",
    "ExperimentConfig",
    "ExtendedMdp",
    "ExtendedState",
    "GridWorld",
    "MonitoredEnv",
    "QTable",
    "Rdp",
    "RdpgridError",
    "RewardRule",
    "ShapingPotential",
    "Shield",
    "TransitionQuadruple",
    "ValueTable",
    "compile_offline",
    "eval_trace",
    "load_config",
    "mc_control",
    "parse_config",
    "parse_ldlf",
    "preset",
    "print_ldlf",
    "project",
    "props_of",
    "run_experiment",
    "shaped_env",
    "shaped_rewards",
    "shield_actions",
    "value_iteration",
    "__version__",
]
