"""Command-line entry point: run, zero-shot, implicit, plot, inspect-model."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import List, Optional

from .agent import AGENTS, AgentOWL
from .env.gridworld import ConfigError, load_config
from .goals import goals_from_config
from .harness.experiment import (EXIT_CONFIG, EXIT_OK, EXIT_UNMASTERED, PROFILES, ExperimentConfig,
                                 run_experiment)
from .harness.plot import emit_plot_data
from .harness.protocols import EPISODES, run_implicit_learning, run_zero_shot
from .proposer import make_proposer
from .worldmodel.model import AbstractWorldModel

log = logging.getLogger("agentowl")


def _add_run(sub) -> None:
    p = sub.add_parser("run", help="train an agent through the goal sequence")
    p.add_argument("--config", help="YAML experiment config; flags override its fields")
    p.add_argument("--env")
    p.add_argument("--agent", choices=AGENTS)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-env-steps", type=int)
    p.add_argument("--no-proposer", action="store_true", default=None)
    p.add_argument("--no-world-model", action="store_true", default=None)
    p.add_argument("--n-threshold", dest="n_threshold_override", type=float)
    p.add_argument("--tight-change-priors", action="store_true", default=None)
    p.add_argument("--proposer", choices=("llm", "stub", "replay"))
    p.add_argument("--llm-endpoint")
    p.add_argument("--llm-model")
    p.add_argument("--llm-temperature", type=float)
    p.add_argument("--llm-max-retries", type=int)
    p.add_argument("--replay-path")
    p.add_argument("--profile", choices=PROFILES)
    p.add_argument("--n-envs", type=int)
    p.add_argument("--checkpoint-every", type=int, help="rounds between checkpoints")
    p.add_argument("--output-dir")
    p.add_argument("--resume", help="checkpoint directory to continue from")


def _checkpoint_args(p) -> None:
    p.add_argument("--checkpoint", required=True, help="checkpoint directory of a trained owl run")
    p.add_argument("--env", default="chain6")
    p.add_argument("--episodes", type=int, default=EPISODES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report table here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agentowl", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _add_run(sub)

    z = sub.add_parser("zero-shot", help="bridge a new spawn and compose trained options")
    _checkpoint_args(z)
    z.add_argument("--new-spawn", type=int, nargs=3, metavar=("ROOM", "X", "Y"))
    z.add_argument("--bridging-goal")
    z.add_argument("--downstream", nargs="+")
    z.add_argument("--bridge-budget", type=int, default=20_000)

    i = sub.add_parser("implicit", help="re-initialize policies and train only the top goal")
    _checkpoint_args(i)
    i.add_argument("--top-goal")
    i.add_argument("--budget", type=int, default=30_000)

    pl = sub.add_parser("plot", help="aggregate metrics files into a plot-ready series")
    pl.add_argument("files", nargs="+")
    pl.add_argument("--out", required=True)
    pl.add_argument("--column", default="options_mastered")

    m = sub.add_parser("inspect-model", help="print the option models of a checkpoint")
    m.add_argument("--checkpoint", required=True)
    m.add_argument("--env", default="chain6")
    m.add_argument("--json", action="store_true")
    return ap


def _experiment_config(args) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**overrides)


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    result = run_experiment(cfg, resume=args.resume)
    print(f"mastered {result.n_mastered} goals in {result.env_steps} env steps: "
          f"{json.dumps(result.mastered)}")
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_dir}")
    return result.exit_code


def _load(args) -> AgentOWL:
    env = load_config(args.env)
    return AgentOWL.load(args.checkpoint, env, make_proposer("stub", env, goals_from_config(env)))


def _emit(text: str, out: Optional[str]) -> None:
    print(text, end="")
    if out:
        Path(out).write_text(text)


def cmd_zero_shot(args) -> int:
    agent = _load(args)
    extras = agent.env_config.extras.get("zero_shot", {})
    spawn = args.new_spawn
    if spawn is None and "new_spawn" in extras:
        spawn = [extras["new_spawn"][k] for k in ("room", "x", "y")]
    bridging = args.bridging_goal or extras.get("bridging_goal")
    downstream = args.downstream or extras.get("downstream_goals")
    if spawn is None or bridging is None or not downstream:
        raise ConfigError("zero-shot needs --new-spawn, --bridging-goal and --downstream "
                          "(or an extras.zero_shot block in the env config)")
    report = run_zero_shot(agent, spawn, bridging, downstream, args.bridge_budget, args.episodes, args.seed)
    _emit(report.table(), args.out)
    return EXIT_OK if report.bridge_mastered else EXIT_UNMASTERED


def cmd_implicit(args) -> int:
    agent = _load(args)
    extras = agent.env_config.extras.get("implicit", {})
    top = args.top_goal or extras.get("top_goal")
    if top is None:
        raise ConfigError("implicit needs --top-goal (or an extras.implicit block in the env config)")
    report = run_implicit_learning(agent, top, extras.get("on_path", []), extras.get("off_path", []),
                                   args.budget, args.episodes, args.seed)
    _emit(report.table(), args.out)
    return EXIT_OK if report.root_mastered else EXIT_UNMASTERED


def cmd_plot(args) -> int:
    series = emit_plot_data(args.files, args.out, args.column)
    print(f"{len(series.steps)} points over {series.n_runs} runs -> {args.out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    env = load_config(args.env)
    wm = AbstractWorldModel.load(Path(args.checkpoint) / "world_model.json", goals_from_config(env))
    if args.json:
        print(json.dumps(wm.to_dict(), sort_keys=True, indent=1))
        return EXIT_OK
    names = [g.name for g in wm.goals]
    for oid in sorted(wm.models):
        m = wm.models[oid]
        print(f"option {oid} -> {names[m.target]}")
        for e in m.success_experts:
            cond = e.condition.describe() if e.condition is not None else "(blanket)"
            print(f"  theta={e.theta:.4f}  {e.role:<12} {cond}")
        moved = [(i, e) for i, exps in sorted(m.conditional_experts.items()) for e in exps
                 if abs(e.theta - e.mu) > 1e-3]
        for i, e in moved:
            print(f"  theta={e.theta:.4f}  {e.role:<12} f[{names[i]}]")
    print(f"weighting table: {len(wm.table)} abstract states")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "zero-shot": cmd_zero_shot, "implicit": cmd_implicit,
            "plot": cmd_plot, "inspect-model": cmd_inspect}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
