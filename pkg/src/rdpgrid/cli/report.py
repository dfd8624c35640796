"""Experiment execution and artifact writing.

`run_experiment` executes a validated config and writes three artifacts
into the output directory: `episodes.csv` with one row per (run, episode),
`summary.json` with the aggregate metrics, and `learning_curve.png` with
the mean-return curve for Monte Carlo runs. CSV and JSON are byte-stable
for a fixed config and seed; the PNG and the `wall_time_ms` entry are the
two deliberate exceptions. `emit_dot` renders every formula automaton and,
when small enough, the compiled product.
"""

from __future__ import annotations

import json
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from hashlib import sha256
from pathlib import Path
from typing import Optional, Union

from ..automata import compile as compile_dfa, to_dot as dfa_to_dot
from ..product import MonitoredEnv, Shield, compile_offline, to_dot
from ..rdp import Rdp
from ..solve import (ShapingPotential, mc_control, shaped_env,
                     value_iteration)
from .config import ExperimentConfig, McParams, ViParams, build_model

__all__ = ["run_experiment", "emit_dot", "EVAL_EPISODES"]

EVAL_EPISODES = 100

_PRODUCT_DOT_CAP = 2_000


def _derive_seed(master: int, run: int, suffix: str = "") -> int:
    """A 64-bit stream seed for one run, stable across processes."""
    digest = sha256(f"{master}:{run}{suffix}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _greedy_eval(rdp: Rdp, shield: Optional[Shield], table,
                 mc: McParams, step_cost: float, eval_seed: int
                 ) -> tuple[float, int]:
    """Mean raw return of the greedy policy over the evaluation episodes."""
    env = MonitoredEnv(rdp, step_cost=step_cost, shield=shield,
                       n_step_limit=mc.n_step_limit,
                       rng=random.Random(eval_seed))
    total = 0.0
    for _ in range(EVAL_EPISODES):
        state = env.reset()
        done = env.done
        g = 0.0
        discount = 1.0
        while not done:
            action = table.greedy(state, env.allowed_actions())
            state, reward, done = env.step(action)
            g += discount * reward
            discount *= mc.gamma
        total += g
    return total / EVAL_EPISODES, env.unsafe_visits


def _run_one(payload) -> tuple[int, list[tuple[float, int, int]], float, int]:
    """Train one seeded run and evaluate its final greedy policy."""
    (run_idx, rdp, shield, step_cost, phi, mc, train_seed,
     eval_seed) = payload
    env = MonitoredEnv(rdp, step_cost=step_cost, shield=shield)
    train_env = shaped_env(env, phi, mc.gamma) if phi is not None else env
    table, stats = mc_control(train_env, episodes=mc.episodes,
                              epsilon=mc.epsilon, gamma=mc.gamma,
                              seed=train_seed, n_step_limit=mc.n_step_limit,
                              update_mode=mc.update_mode)
    eval_mean, eval_unsafe = _greedy_eval(rdp, shield, table, mc, step_cost,
                                          eval_seed)
    rows = [(s.return_, s.steps, s.distinct_states) for s in stats]
    return run_idx, rows, eval_mean, env.unsafe_visits + eval_unsafe


def _execute_runs(cfg: ExperimentConfig, rdp: Rdp, shield: Optional[Shield],
                  master_seed: int, workers: Optional[int]):
    mc = cfg.algorithm
    phi = ShapingPotential.from_model(rdp) if cfg.shaping else None
    payloads = [(run, rdp, shield, cfg.step_cost, phi, mc,
                 _derive_seed(master_seed, run),
                 _derive_seed(master_seed, run, ":eval"))
                for run in range(mc.runs)]
    if workers is None:
        workers = os.cpu_count() or 1
    workers = min(workers, mc.runs)
    if workers <= 1:
        results = [_run_one(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, payloads))
    return sorted(results, key=lambda r: r[0])


def _write_csv(path: Path, results) -> None:
    lines = ["run,episode,return,steps,distinct_states"]
    for run_idx, rows, _, _ in results:
        for episode, (ret, steps, distinct) in enumerate(rows):
            lines.append(f"{run_idx},{episode},{ret!r},{steps},{distinct}")
    path.write_text("\n".join(lines) + "\n")


def _relfreq_within_10pct(eval_means: list[float]) -> float:
    best = max(eval_means)
    if best <= 0:
        return 0.0
    hits = sum(1 for m in eval_means if m >= 0.9 * best)
    return hits / len(eval_means)


def _write_curve(path: Path, curve: list[float]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(len(curve)), curve)
    ax.set_xlabel("episode")
    ax.set_ylabel("mean return over runs")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def run_experiment(cfg: ExperimentConfig, out_dir: Union[str, Path],
                   seed: Optional[int] = None,
                   workers: Optional[int] = None) -> dict:
    """Execute a config and write episodes.csv, summary.json, and the plot.

    `seed` overrides the config's master seed; `workers` caps the process
    pool (runs execute in parallel with per-run derived seed streams, so
    the artifacts do not depend on scheduling). The returned dictionary is
    the summary that was written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    rdp, shield = build_model(cfg)
    mdp = compile_offline(rdp, step_cost=cfg.step_cost, shield=shield)
    if isinstance(cfg.algorithm, ViParams):
        value_iteration(mdp, gamma=cfg.algorithm.gamma,
                        tol=cfg.algorithm.tol)
        results = []
        eval_means: list[float] = []
        unsafe = 0
    else:
        master = cfg.algorithm.seed if seed is None else seed
        results = _execute_runs(cfg, rdp, shield, master, workers)
        eval_means = [r[2] for r in results]
        unsafe = sum(r[3] for r in results)
    _write_csv(out / "episodes.csv", results)
    episodes = cfg.algorithm.episodes if isinstance(cfg.algorithm,
                                                    McParams) else 0
    curve = [sum(rows[e][0] for _, rows, _, _ in results) / len(results)
             for e in range(episodes)] if results else []
    summary = {
        "mean_return_by_episode": curve,
        "relfreq_within_10pct":
            _relfreq_within_10pct(eval_means) if eval_means else None,
        "extended_mdp_size": mdp.n_states,
        "unsafe_visits": unsafe,
        "wall_time_ms": int((time.monotonic() - started) * 1000),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if curve:
        _write_curve(out / "learning_curve.png", curve)
    return summary


def emit_dot(cfg: ExperimentConfig, out_dir: Union[str, Path]) -> list[Path]:
    """Render every formula automaton, and the product when small enough."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rdp, shield = build_model(cfg)
    props = cfg.world.props
    written = []

    def emit(name: str, formula) -> None:
        dfa = compile_dfa(formula, props)
        path = out / f"{name}.dot"
        path.write_text(dfa_to_dot(dfa))
        written.append(path)

    for i, rule in enumerate(cfg.rewards):
        emit(f"reward_{i}", rule.guard)
    for i, quad in enumerate(cfg.quadruples):
        emit(f"quadruple_{i}", quad.guard)
    for i, formula in enumerate(cfg.shield_formulas):
        emit(f"shield_{i}", formula)
    mdp = compile_offline(rdp, step_cost=cfg.step_cost, shield=shield)
    if mdp.n_states <= _PRODUCT_DOT_CAP:
        path = out / "product.dot"
        path.write_text(to_dot(mdp))
        written.append(path)
    return written
