"""Transfer protocols run on a trained checkpoint: zero-shot composition and implicit learning."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..agent import AgentOWL
from ..env.gridworld import ConfigError, EnvConfig, GridWorld
from ..goals import eval_goal
from ..options import GreedyQPolicy, MixedPolicy, OptionDef
from ..proposer.base import Proposer
from ..qlearner.learner import DQNLearner

log = logging.getLogger(__name__)

EPISODES = 100
PLANNER_CANDIDATES = 8  # pi_wm trained per zero-shot planner; the best in simulation is executed


def _goal_id(agent: AgentOWL, name: str) -> int:
    for g in agent.goals:
        if g.name == name:
            return g.id
    raise ConfigError(f"unknown goal {name!r}")


def random_completion(env_config: EnvConfig, goal, episodes: int = EPISODES, seed: int = 0) -> float:
    """Uniform random primitive actions until the goal holds or the episode times out."""
    rng = np.random.default_rng([seed, 11])
    env = GridWorld(env_config, seed=seed)
    actions = env.actions
    wins = 0
    for _ in range(episodes):
        s = env.reset()
        while True:
            s, timeout = env.step(actions[int(rng.integers(len(actions)))])
            if eval_goal(goal, s):
                wins += 1
                break
            if timeout:
                break
    return wins / episodes


@dataclass
class ZeroShotRow:
    goal: str
    random: float
    without_bridge: float
    with_bridge: float


@dataclass
class ZeroShotReport:
    bridge_option: int
    bridge_mastered: bool
    bridge_env_steps: int
    rows: List[ZeroShotRow]
    skipped: List[str] = field(default_factory=list)  # downstream goals the checkpoint never mastered

    def table(self) -> str:
        lines = ["goal,random,without_new_option,with_new_option"]
        lines += [f"{r.goal},{r.random:.2f},{r.without_bridge:.2f},{r.with_bridge:.2f}" for r in self.rows]
        return "\n".join(lines) + "\n"


def run_zero_shot(agent: AgentOWL, new_spawn: Sequence[int], bridging_goal: str,
                  downstream: Sequence[str], bridge_budget: int = 20_000,
                  episodes: int = EPISODES, seed: int = 0,
                  candidates: int = PLANNER_CANDIDATES) -> ZeroShotReport:
    """Trains one primitive-level option from ``new_spawn`` to the bridging goal, then, with no
    further training, plans in T over the option set from the new spawn for every downstream goal
    the checkpoint has already mastered; the others are listed in ``skipped``."""
    known = {agent.goals[g].name for g in agent.mastered}
    skipped = [name for name in downstream if name not in known]
    if skipped:
        log.warning("zero-shot: skipping goals without a mastered option: %s", ", ".join(skipped))
    new_env = agent.env_config.with_spawn(*new_spawn)
    spawn_state = GridWorld(new_env).reset()
    before = sorted(agent.options)
    bridge_goal = agent.goals[_goal_id(agent, bridging_goal)]
    agent.start_goal(bridge_goal, actions=list(agent.primitives), kind="bridge", env_config=new_env)
    start = agent.env_steps
    mastered = agent.learn_option(start + bridge_budget)
    bridge = agent.root
    agent.commit_root()
    starts = agent.wm_start_states([spawn_state])
    rows = []
    for name in downstream:
        if name in skipped:
            continue
        goal = agent.goals[_goal_id(agent, name)]
        with_b = agent.planner_option(goal, sorted(agent.options), starts, candidates)
        without = agent.planner_option(goal, before, starts, candidates)
        rows.append(ZeroShotRow(name, random_completion(new_env, goal, episodes, seed),
                                agent.evaluate(without, episodes, new_env, seed),
                                agent.evaluate(with_b, episodes, new_env, seed)))
        log.info("zero-shot %s: %s", name, rows[-1])
    return ZeroShotReport(bridge.id, mastered, agent.env_steps - start, rows, skipped)


@dataclass
class ImplicitRow:
    option: int
    label: str
    goal: str
    path: str  # on | off | top | other (hypothesized options are always "other")
    before: float
    control: float
    after: float


@dataclass
class ImplicitReport:
    top_goal: str
    root_mastered: bool
    env_steps: int
    rows: List[ImplicitRow]

    def table(self) -> str:
        lines = ["option,label,goal,path,before,control,after"]
        lines += [f"{r.option},{r.label},{r.goal},{r.path},{r.before:.2f},{r.control:.2f},{r.after:.2f}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"


def reinitialize_policies(agent: AgentOWL, salt: int = 99) -> None:
    """Fresh random networks and statistics for every option, as at creation; T is left untouched.

    Options over sub-options restart at full pi_wm mixing with a pi_wm retrained in T."""
    agent.wm_learners.clear()
    agent.wm_actions.clear()
    for o in agent.options.values():
        learner = DQNLearner(o.learner.input_dim, o.learner.n_actions, agent.cfg.train,
                             agent._seed(salt, o.id))
        o.learner = learner
        eps = 1.0 if (agent.cfg.uses_world_model and o.kind == "root") else 0.0
        o.policy = MixedPolicy(GreedyQPolicy(learner, o.goal, agent.cfg.train.explore_eps,
                                             suffix=o.obs_suffix), None, eps, 0, agent.cfg.anneal_samples)
        o.n_samples = o.ct = o.executions = 0
        o.window.clear()
        if eps > 0:
            agent.train_wm_policy(o)


def run_implicit_learning(agent: AgentOWL, top_goal: str, on_path: Sequence[str],
                          off_path: Sequence[str], budget: int = 30_000,
                          episodes: int = EPISODES, seed: int = 0) -> ImplicitReport:
    """Keeps T, re-initializes every option policy and trains only a new root for ``top_goal``;
    reports each loaded option's standalone success before, at random init and after."""
    if agent.root is not None:
        agent.commit_root()
    top = agent.goals[_goal_id(agent, top_goal)]
    loaded: List[OptionDef] = [agent.options[k] for k in sorted(agent.options)]
    before = {o.id: agent.evaluate(o, episodes, seed=seed, real_only=True) for o in loaded}
    reinitialize_policies(agent)
    control = {o.id: agent.evaluate(o, episodes, seed=seed, real_only=True) for o in loaded}
    agent.freeze_world_model = True
    actions = list(agent.primitives) + [o.id for o in loaded if o.goal.id != top.id]
    root = agent.start_goal(top, actions=actions, kind="root")
    start = agent.env_steps
    mastered = agent.learn_option(start + budget)
    after = {o.id: agent.evaluate(o, episodes, seed=seed, real_only=True) for o in loaded}
    rows = []
    for o in loaded:
        name = o.goal.name
        if o.goal.id == top.id:
            path = "top"
        elif o.kind != "root":
            path = "other"
        else:
            path = "on" if name in on_path else "off" if name in off_path else "other"
        rows.append(ImplicitRow(o.id, o.label(), name, path, before[o.id], control[o.id], after[o.id]))
    agent.root = None
    return ImplicitReport(top_goal, mastered, agent.env_steps - start, rows)
