"""Experiment configuration, the training run and the metrics file."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import yaml

from ..agent import AGENTS, AgentConfig, AgentOWL, MetricsRow
from ..env.gridworld import ConfigError, EnvConfig, load_config
from ..goals import goals_from_config
from ..proposer import make_proposer
from ..qlearner.learner import TrainConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNMASTERED = 3

PROFILES = ("desk", "paper")

# Env-step budget for chain6 comparisons under the desk profile (750 rounds).  Calibrated
# once on a seed-0 owl run, whose fourth goal was mastered at 43 200 steps, then frozen.
BUDGET_B = 48_000


@dataclass
class ExperimentConfig:
    env: str = "chain6"
    agent: str = "owl"
    seed: int = 0
    max_env_steps: int = BUDGET_B
    no_proposer: bool = False
    no_world_model: bool = False
    n_threshold_override: Optional[float] = None
    tight_change_priors: bool = False
    proposer: str = "stub"
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_temperature: float = 0.0
    llm_max_retries: int = 3
    replay_path: Optional[str] = None
    profile: str = "desk"
    n_envs: int = 4
    checkpoint_every: int = 0  # rounds; 0 = only at the end
    output_dir: str = "runs/out"

    def __post_init__(self):
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}; expected one of {AGENTS}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")
        if self.agent != "owl" and (self.no_proposer or self.no_world_model or self.tight_change_priors):
            raise ConfigError("ablations apply to the owl agent only")
        if self.n_threshold_override is not None and self.agent not in ("owl", "hdqn"):
            raise ConfigError("n_threshold_override applies to owl and hdqn only")
        if self.max_env_steps <= 0:
            raise ConfigError("max_env_steps must be positive")
        if self.proposer not in ("stub", "llm", "replay"):
            raise ConfigError(f"unknown proposer backend {self.proposer!r}")

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        raw = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown fields {unknown}")
        return cls(**raw)

    @property
    def tag(self) -> str:
        parts = [self.agent]
        if self.no_proposer:
            parts.append("noproposer")
        if self.no_world_model:
            parts.append("nowm")
        if self.n_threshold_override is not None:
            parts.append(f"nthr{self.n_threshold_override:g}")
        return "-".join(parts) + f"_seed{self.seed}"


def agent_config(cfg: ExperimentConfig) -> AgentConfig:
    """Hyperparameters for a profile.  ``paper`` keeps the published values; ``desk``
    shrinks the batch, the network width, the stability threshold and the in-model
    training so a run fits in minutes on one CPU core."""
    if cfg.profile == "paper":
        train = TrainConfig(explore_eps=0.05)
        base = AgentConfig(train=train)
    else:
        train = TrainConfig(batch_size=64, hidden=128, explore_eps=0.05)
        base = AgentConfig(train=train, n_threshold=500, anneal_samples=250, wm_budget=500,
                           wm_min_rounds=40)
    out = replace(base, agent=cfg.agent, seed=cfg.seed, n_envs=cfg.n_envs, no_proposer=cfg.no_proposer,
                  no_world_model=cfg.no_world_model, tight_change_priors=cfg.tight_change_priors)
    if cfg.n_threshold_override is not None:
        out = replace(out, n_threshold=float(cfg.n_threshold_override))
    return out


def build_agent(cfg: ExperimentConfig, env_config: Optional[EnvConfig] = None) -> AgentOWL:
    env_config = env_config or load_config(cfg.env)
    goals = goals_from_config(env_config)
    proposer = make_proposer(cfg.proposer, env_config, goals, cfg.llm_endpoint, cfg.llm_model,
                             cfg.llm_temperature, cfg.llm_max_retries, cfg.replay_path)
    return AgentOWL(env_config, agent_config(cfg), proposer)


def metrics_header(goal_names: List[str]) -> List[str]:
    return (["env_steps", "options_mastered", "current_goal", "epsilon", "loss", "mean_q"]
            + [f"delta_{g}" for g in goal_names] + [f"n_{g}" for g in goal_names])


def metrics_line(row: MetricsRow, goal_names: List[str]) -> List[str]:
    return ([str(row.env_steps), str(row.options_mastered), row.current_goal, f"{row.epsilon:.6f}",
             f"{row.loss:.6g}", f"{row.mean_q:.6g}"]
            + [f"{row.delta[g]:.4f}" for g in goal_names] + [str(row.n[g]) for g in goal_names])


def write_metrics(path, rows: List[MetricsRow], goal_names: List[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(metrics_header(goal_names))
    for r in rows:
        w.writerow(metrics_line(r, goal_names))
    Path(path).write_text(buf.getvalue())


def read_metrics(path) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class RunResult:
    exit_code: int
    mastered: Dict[str, int]
    env_steps: int
    metrics_path: Path
    checkpoint_dir: Path
    agent: AgentOWL = field(repr=False, default=None)

    @property
    def n_mastered(self) -> int:
        return len(self.mastered)


def run_experiment(cfg: ExperimentConfig, resume: Optional[str] = None,
                   env_config: Optional[EnvConfig] = None) -> RunResult:
    """Trains through the goal sequence, writing metrics and a checkpoint under ``output_dir``."""
    env_config = env_config or load_config(cfg.env)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if resume:
        goals = goals_from_config(env_config)
        proposer = make_proposer(cfg.proposer, env_config, goals, cfg.llm_endpoint, cfg.llm_model,
                                 cfg.llm_temperature, cfg.llm_max_retries, cfg.replay_path)
        agent = AgentOWL.load(resume, env_config, proposer)
    else:
        agent = build_agent(cfg, env_config)
    names = [g.name for g in agent.goals]
    metrics_path = out / f"metrics_{cfg.tag}.csv"
    ckpt = out / f"checkpoint_{cfg.tag}"

    def on_round(a: AgentOWL) -> None:
        if cfg.checkpoint_every and a.rounds % cfg.checkpoint_every == 0:
            a.save(ckpt)
            write_metrics(metrics_path, a.rows, names)

    done = agent.run(cfg.max_env_steps, on_round)
    agent.save(ckpt)
    write_metrics(metrics_path, agent.rows, names)
    summary = {"config": asdict(cfg), "env_steps": agent.env_steps,
               "mastered": {agent.goals[g].name: s for g, s in sorted(agent.mastered.items())},
               "hypotheses": agent.hypotheses, "proposer": agent.proposer.stats}
    (out / f"summary_{cfg.tag}.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
    mastered = {agent.goals[g].name: s for g, s in sorted(agent.mastered.items())}
    return RunResult(EXIT_OK if done else EXIT_UNMASTERED, mastered, agent.env_steps,
                     metrics_path, ckpt, agent)
