"""AgentOWL and its baselines over one shared execution path.

The outer loop walks the goal sequence.  For each goal a root option is
trained in rounds of hierarchical rollout; between rounds the agent checks
stability, may hypothesize a new option o_{h->g}, retrains the exploration
policy inside the abstract world model and refits the option models.

The baselines reuse the same machinery with parts switched off:
``hdqn`` has no world model and no hypothesizing, ``dqn`` trains a flat
primitive-only option per goal, ``gc-dqn`` shares one goal-conditioned
learner across the per-goal flat options.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .env.encoding import FrameStack, ObservationEncoder
from .env.gridworld import ConfigError, EnvConfig, GridWorld
from .env.state import SymbolicState
from .goals import GoalSpec, abstract_state, eval_goal, goals_from_config
from .options import (ANNEAL_SAMPLES, DELTA_THRESHOLD, MAX_T, N_THRESHOLD, WINDOW, DecisionContext,
                      Executor, GreedyQPolicy, MixedPolicy, OptionDef, OptionExecutionState)
from .proposer.base import ProposalRequest, Proposer, one_state_per_room
from .proposer.stub import StubProposer
from .qlearner.checkpoint import arrays_to_tensors, read_container, tensors_to_arrays, write_container
from .qlearner.learner import DQNLearner, TrainConfig, wm_config
from .qlearner.network import GoalConditionedQNet
from .qlearner.wm_train import greedy_success_rate, train_in_world_model
from .worldmodel.model import AbstractWorldModel, WorldModelEnv
from .worldmodel.poe import Transition, build_option_model, map_fit, success_experts
from .worldmodel.preconditions import SubgoalHolds

log = logging.getLogger(__name__)

AGENTS = ("owl", "hdqn", "dqn", "gc-dqn")
CHECKPOINT_VERSION = 1


@dataclass
class AgentConfig:
    agent: str = "owl"
    seed: int = 0
    n_envs: int = 4
    round_steps: int = 64
    n_threshold: float = N_THRESHOLD
    delta_threshold: float = DELTA_THRESHOLD
    max_t: int = MAX_T
    anneal_samples: int = ANNEAL_SAMPLES
    no_proposer: bool = False
    no_world_model: bool = False
    tight_change_priors: bool = False
    wm_budget: int = 2000
    wm_hidden: int = 128
    wm_min_rounds: int = 20
    data_cap: int = 1000
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}; expected one of {AGENTS}")
        if self.agent != "owl" and (self.no_proposer or self.no_world_model or self.tight_change_priors):
            raise ConfigError("ablations apply to the owl agent only")
        for k in ("n_envs", "round_steps", "max_t", "anneal_samples", "wm_budget", "wm_hidden", "data_cap"):
            if getattr(self, k) <= 0:
                raise ConfigError(f"{k} must be positive")
        if self.n_threshold < 0 or not 0.0 <= self.delta_threshold <= 1.0:
            raise ConfigError("thresholds out of range")

    @property
    def uses_world_model(self) -> bool:
        return self.agent == "owl" and not self.no_world_model

    @property
    def hypothesizes(self) -> bool:
        return self.agent == "owl" and not self.no_proposer

    @property
    def hierarchical(self) -> bool:
        return self.agent in ("owl", "hdqn")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        d = dict(d)
        d["train"] = TrainConfig(**d.get("train", {}))
        return cls(**d)


def stability_sets(options: Sequence[OptionDef], goal: int, n_threshold: float,
                   delta_threshold: float) -> Tuple[List[OptionDef], List[OptionDef], List[OptionDef]]:
    """(options for ``goal``, the stable ones, the good ones); comparisons are strict."""
    omega_g = [o for o in options if o.goal.id == goal]
    stable = [o for o in omega_g if o.n_samples > n_threshold or o.delta > delta_threshold]
    good = [o for o in omega_g if o.delta > delta_threshold]
    return omega_g, stable, good


def should_hypothesize(options: Sequence[OptionDef], goal: int, n_threshold: float,
                       delta_threshold: float) -> bool:
    omega_g, stable, good = stability_sets(options, goal, n_threshold, delta_threshold)
    return len(omega_g) == len(stable) and not good


class Worker:
    """One environment instance with its frame stack and execution records."""

    def __init__(self, env: GridWorld, encoder: ObservationEncoder, goals: Sequence[GoalSpec],
                 executor: Executor, observe: Optional[Callable] = None):
        self.env = env
        self.frames = FrameStack(encoder)
        self.goals = tuple(goals)
        self.executor = executor
        self.observe = observe
        self.ctx: Optional[DecisionContext] = None
        self.root_state: Optional[OptionExecutionState] = None

    def _context(self, s: SymbolicState, push: bool) -> DecisionContext:
        f = abstract_state(s, self.goals)
        obs = self.frames.push(s, f) if push else self.frames.reset(s, f)
        if self.observe is not None:
            self.observe(s, f)
        return DecisionContext(s, obs, f)

    def reset(self) -> DecisionContext:
        self.ctx = self._context(self.env.reset(), push=False)
        for st in self.executor.states.values():
            st.reset()
        if self.root_state is not None:
            self.root_state.reset()
        return self.ctx

    def env_step(self, action: str):
        s, timeout = self.env.step(action)
        return self._context(s, push=True), timeout

    def step(self, rng: np.random.Generator) -> Tuple[bool, bool]:
        """One env step under the worker's root.  Returns (root_done, timeout)."""
        if self.ctx is None:
            self.reset()
        ctx, done, timeout = self.executor.step(self.root_state, self.ctx, self.env_step, rng)
        self.ctx = ctx
        if done or timeout:
            self.reset()
        return done, timeout


@dataclass
class MetricsRow:
    env_steps: int
    options_mastered: int
    current_goal: str
    epsilon: float
    delta: Dict[str, float]
    n: Dict[str, int]
    loss: float = float("nan")  # latest TD loss and mean Q of the current root's learner
    mean_q: float = float("nan")


class AgentOWL:
    def __init__(self, env_config: EnvConfig, cfg: AgentConfig, proposer: Optional[Proposer] = None):
        self.env_config = env_config
        self.cfg = cfg
        self.goals = goals_from_config(env_config)
        if not self.goals:
            raise ConfigError("the environment declares no goals")
        self.proposer = proposer or StubProposer(env_config, self.goals)
        self.encoder = ObservationEncoder(env_config.moving_slots, len(self.goals), cfg.train.frame_stack)
        self.primitives = list(env_config.action_set)
        self.options: Dict[int, OptionDef] = {}
        self.wm = AbstractWorldModel(self.goals)
        self.data: Dict[int, deque] = {}
        self.rng = np.random.default_rng([cfg.seed, 1])
        self.env_steps = 0
        self.rounds = 0
        self.next_id = 0
        self.next_goal = 0
        self.root: Optional[OptionDef] = None
        self.root_data: deque = deque(maxlen=cfg.data_cap)
        self.mastered: Dict[int, int] = {}  # goal -> env step at which its option was mastered
        self.rows: List[MetricsRow] = []
        self.wm_learners: Dict[int, DQNLearner] = {}  # option id -> learner behind its pi_wm
        self.wm_actions: Dict[int, List[int]] = {}
        self.shared_learner: Optional[DQNLearner] = None
        self.dirty: set = set()
        self.new_positives = 0
        self.rounds_since_wm = 0
        self.wm_trainings = 0
        self.hypotheses: List[dict] = []
        self._wm_stale = True
        self.freeze_world_model = False  # keep T fixed: no logging, no refits, no hypotheses
        self.spawn_state = GridWorld(env_config).reset()
        self.workers: List[Worker] = []
        self._build_workers(env_config)

    # ----------------------------------------------------------------- setup

    def _build_workers(self, env_config: EnvConfig) -> None:
        self.workers = []
        observe = self._observe if self.cfg.uses_world_model else None
        for i in range(self.cfg.n_envs):
            ex = Executor(self.options, self.cfg.n_threshold, self.cfg.delta_threshold,
                          on_finish=self._on_finish)
            env = GridWorld(env_config, seed=self.cfg.seed * 1000 + i)
            self.workers.append(Worker(env, self.encoder, self.goals, ex, observe))

    def _observe(self, s: SymbolicState, f) -> None:
        self.wm.table.update(f, s)

    def _seed(self, *salt: int) -> int:
        # planner options carry negative ids; wrap them into the unsigned range
        words = [self.cfg.seed] + [int(x) % 2 ** 32 for x in salt]
        return int(np.random.SeedSequence(words).generate_state(1)[0])

    def _obs_dim(self) -> int:
        return self.encoder.dim + (1 if self.cfg.agent == "gc-dqn" else 0)

    def _new_learner(self, n_actions: int, salt: int) -> DQNLearner:
        if self.cfg.agent == "gc-dqn":
            if self.shared_learner is None:
                factory = partial(GoalConditionedQNet, n_goals=len(self.goals))
                self.shared_learner = DQNLearner(self._obs_dim(), n_actions, self.cfg.train,
                                                 self._seed(2, 0), net_factory=factory)
            return self.shared_learner
        return DQNLearner(self._obs_dim(), n_actions, self.cfg.train, self._seed(2, salt))

    def _make_option(self, goal: GoalSpec, actions: list, kind: str,
                     precondition: Optional[int] = None) -> OptionDef:
        oid = self.next_id
        self.next_id += 1
        learner = self._new_learner(len(actions), oid)
        suffix = np.array([goal.id], np.float32) if self.cfg.agent == "gc-dqn" else None
        pi = GreedyQPolicy(learner, goal, self.cfg.train.explore_eps, suffix=suffix)
        eps = 1.0 if (self.cfg.uses_world_model and kind == "root") else 0.0
        policy = MixedPolicy(pi, None, eps, 0, self.cfg.anneal_samples)
        return OptionDef(oid, goal, list(actions), policy, learner, self.cfg.max_t, kind,
                         precondition, obs_suffix=suffix)

    def _root_actions(self) -> list:
        if not self.cfg.hierarchical:
            return list(self.primitives)
        return list(self.primitives) + sorted(self.options)

    def start_goal(self, goal: GoalSpec, actions: Optional[list] = None, kind: Optional[str] = None,
                   env_config: Optional[EnvConfig] = None) -> OptionDef:
        """New root for ``goal``; ``env_config`` swaps the workers' environment (e.g. a new spawn)."""
        if env_config is not None:
            self._build_workers(env_config)
            for o in self.options.values():
                for w in self.workers:
                    w.executor.register(o)
        kind = kind or ("root" if self.cfg.hierarchical else "flat")
        self.root = self._make_option(goal, self._root_actions() if actions is None else actions, kind)
        self.root_data = deque(maxlen=self.cfg.data_cap)
        for w in self.workers:
            w.root_state = OptionExecutionState(self.root)
            w.ctx = None
        self.rounds_since_wm = 0
        self._wm_stale = True
        return self.root

    def _add_to_omega(self, o: OptionDef, model, data: Sequence[Transition] = ()) -> None:
        self.options[o.id] = o
        self.wm.models[o.id] = model
        self.data[o.id] = deque(data, maxlen=self.cfg.data_cap)
        for w in self.workers:
            w.executor.register(o)

    def _reinit_root(self) -> None:
        """Fresh network over the enlarged action space; replay data carries over."""
        root = self.root
        old = root.learner
        root.actions = self._root_actions()
        learner = self._new_learner(len(root.actions), 10_000 + root.id * 100 + len(root.actions))
        learner.buffer.load_arrays(old.buffer.state_arrays())
        root.learner = learner
        root.policy.pi_real = GreedyQPolicy(learner, root.goal, self.cfg.train.explore_eps,
                                            suffix=root.obs_suffix)

    # ------------------------------------------------------------ data logging

    def _on_finish(self, o: OptionDef, start: Optional[DecisionContext], end: DecisionContext,
                   interrupted: bool) -> None:
        if interrupted or start is None or not self.cfg.uses_world_model or self.freeze_world_model:
            return
        tr = Transition(start.s, tuple(start.f), tuple(end.f))
        if self.root is not None and o is self.root:
            self.root_data.append(tr)
            return
        if o.id in self.data:
            self.data[o.id].append(tr)
            self.dirty.add(o.id)
            if end.f[o.goal.id] == 1:
                self.new_positives += 1

    # ------------------------------------------------------- hypothesizing

    def achieved_goals(self) -> List[GoalSpec]:
        return [self.goals[g] for g in sorted(self.mastered)]

    def maybe_hypothesize(self) -> bool:
        """Adds o_{h->g} when every option for g is stable and none is good."""
        if not self.cfg.hypothesizes or self.root is None or self.freeze_world_model:
            return False
        g = self.root.goal
        pool = list(self.options.values()) + [self.root]
        if not should_hypothesize(pool, g.id, self.cfg.n_threshold, self.cfg.delta_threshold):
            return False
        achieved = [a for a in self.achieved_goals() if a.id != g.id]
        if not achieved:
            return False
        used = sorted({o.precondition for o in pool if o.goal.id == g.id and o.precondition is not None})
        if len(used) >= len(achieved):
            return False
        states = [tr.s for d in self.data.values() for tr in d] + [self.spawn_state]
        req = ProposalRequest(target=g, achieved=achieved, sample_states=one_state_per_room(states),
                              mode="subgoal", multi_object=self.env_config.multi_object,
                              game_name=self.env_config.name, exclude=used)
        h = self.proposer.propose_subgoal(req)
        if h in used or h not in {a.id for a in achieved}:
            h = StubProposer(self.env_config, self.goals).propose_subgoal(req)
            if h in used:
                return False
        o = self._make_option(g, list(self.primitives), "hypothesized", precondition=h)
        model = build_option_model(o.id, g.id, [SubgoalHolds(h)], len(self.goals),
                                   self.cfg.tight_change_priors)
        self._add_to_omega(o, model)
        self._reinit_root()
        self.hypotheses.append({"env_steps": self.env_steps, "option": o.id, "goal": g.name,
                                "precondition": self.goals[h].name})
        log.info("hypothesized %s at %d env steps", o.label(), self.env_steps)
        return True

    # ------------------------------------------------------- world model

    def wm_start_states(self, extra: Sequence[SymbolicState] = ()) -> List[SymbolicState]:
        return list(extra) + [self.spawn_state] + self.wm.table.states()

    def train_wm_policy(self, o: OptionDef, option_ids: Optional[Sequence[int]] = None,
                        start_states: Optional[Sequence[SymbolicState]] = None) -> Optional[DQNLearner]:
        """Trains pi_wm for ``o`` from scratch in T over its sub-options and installs it."""
        ids = [a for a in (o.sub_options() if option_ids is None else option_ids) if a in self.wm.models]
        if not ids:
            o.policy.pi_wm = None
            return None
        self.wm_trainings += 1
        seed = self._seed(3, o.id, self.wm_trainings)
        env = WorldModelEnv(self.wm, ids, o.goal.id, start_states or self.wm_start_states(),
                            np.random.default_rng(seed))
        cfg = wm_config(self.cfg.train, self.cfg.wm_hidden)
        learner = train_in_world_model(env, len(ids), self.encoder, o.goal, cfg, self.cfg.wm_budget, seed)
        o.policy.pi_wm = GreedyQPolicy(learner, o.goal, 0.0, [o.actions.index(a) for a in ids])
        self.wm_learners[o.id] = learner
        self.wm_actions[o.id] = list(ids)
        return learner

    def _propose_success(self, goal: GoalSpec, successes: List[SymbolicState]):
        req = ProposalRequest(target=goal, mode="precondition", successes=successes,
                              multi_object=self.env_config.multi_object, game_name=self.env_config.name)
        return self.proposer.propose_preconditions(req) if successes else []

    def refit_world_model(self) -> None:
        for oid in sorted(self.dirty):
            if oid not in self.options:
                continue
            o, model, data = self.options[oid], self.wm.models[oid], list(self.data[oid])
            if o.kind != "hypothesized" and not model.preconditions():
                wins = [tr.s for tr in data if tr.f_next[o.goal.id] == 1]
                if wins:
                    model.success_experts = success_experts(o.goal.id, self._propose_success(o.goal, wins))
            map_fit(model, data, self.wm.eta)
        self.dirty.clear()

    def commit_root(self) -> None:
        """Move the trained root into Omega with a model proposed from its successes."""
        root = self.root
        if root is None:
            return
        data = list(self.root_data)
        wins = [tr.s for tr in data if tr.f_next[root.goal.id] == 1]
        model = build_option_model(root.id, root.goal.id, self._propose_success(root.goal, wins),
                                   len(self.goals), self.cfg.tight_change_priors)
        if self.cfg.uses_world_model:
            map_fit(model, data, self.wm.eta)
        self._add_to_omega(root, model, data)
        self.root = None

    # ------------------------------------------------------- training loop

    def trainable_options(self) -> List[OptionDef]:
        out = [self.options[k] for k in sorted(self.options)]
        return out + ([self.root] if self.root is not None else [])

    def _train_triggers(self) -> None:
        tf = self.cfg.train.train_frequency
        for o in self.trainable_options():
            if o.learner is not None and o.trainable and o.ct > tf:
                o.learner.update(int(round(self.cfg.train.steps_per_sample * o.ct)))
                o.ct = 0

    def run_round(self) -> None:
        for k in range(self.cfg.round_steps):
            self.workers[k % len(self.workers)].step(self.rng)
            self.env_steps += 1
            self._train_triggers()

    def _latch_mastery(self) -> None:
        if self.root is not None and self.root.mastered and self.root.goal.id not in self.mastered:
            self.mastered[self.root.goal.id] = self.env_steps

    def learn_option(self, budget_end: int, on_round: Optional[Callable] = None) -> bool:
        """Rounds of hierarchical training for the current root until mastery or ``budget_end``."""
        root = self.root
        while not root.mastered and self.env_steps < budget_end:
            changed = self.maybe_hypothesize()
            if self.cfg.uses_world_model and (changed or self._wm_stale or (
                    self.new_positives > 0 and self.rounds_since_wm >= self.cfg.wm_min_rounds
                    and not self.freeze_world_model)):
                self.train_wm_policy(root)
                self._wm_stale = False
                self.new_positives = 0
                self.rounds_since_wm = 0
            self.run_round()
            if self.cfg.uses_world_model and not self.freeze_world_model:
                self.refit_world_model()
            self.rounds += 1
            self.rounds_since_wm += 1
            self._latch_mastery()
            self.rows.append(self.metrics_row())
            if on_round is not None:
                on_round(self)
        return root.mastered

    def run(self, max_env_steps: int, on_round: Optional[Callable] = None) -> bool:
        """Walks the goal sequence until every goal is mastered or the budget runs out."""
        while self.next_goal < len(self.goals):
            goal = self.goals[self.next_goal]
            if self.root is None or self.root.goal.id != goal.id:
                self.start_goal(goal)
            if not self.learn_option(max_env_steps, on_round):
                return False
            self.commit_root()
            self.next_goal += 1
        return True

    # ------------------------------------------------------- reporting

    def goal_option(self, goal: int) -> Optional[OptionDef]:
        if self.root is not None and self.root.goal.id == goal:
            return self.root
        roots = [o for o in self.options.values() if o.goal.id == goal and o.kind in ("root", "flat")]
        return roots[-1] if roots else None

    def metrics_row(self) -> MetricsRow:
        delta, n = {}, {}
        for g in self.goals:
            o = self.goal_option(g.id)
            delta[g.name] = o.delta if o is not None else 0.0
            n[g.name] = o.n_samples if o is not None else 0
        cur = self.root.goal.name if self.root is not None else ""
        eps = self.root.policy.epsilon if self.root is not None else 0.0
        learner = self.root.learner if self.root is not None else None
        loss = learner.last_loss if learner is not None else float("nan")
        mean_q = learner.last_mean_q if learner is not None else float("nan")
        return MetricsRow(self.env_steps, len(self.mastered), cur, eps, delta, n, loss, mean_q)

    def check_invariants(self) -> None:
        if set(self.wm.models) != set(self.options) or set(self.data) != set(self.options):
            raise AssertionError("world model, datasets and option set disagree")

    # ------------------------------------------------------- evaluation

    def evaluate(self, o: OptionDef, episodes: int = 100, env_config: Optional[EnvConfig] = None,
                 seed: int = 0, extra_options: Sequence[OptionDef] = (), real_only: bool = False) -> float:
        """Success rate of ``o`` run standalone from the spawn, with no learning and no exploration.

        ``real_only`` switches off pi_wm mixing for ``o`` itself (its sub-options act as usual)."""
        options = dict(self.options)
        for e in extra_options:
            options[e.id] = e
        saved = {}
        for x in list(options.values()) + [o]:
            for pi in (x.policy.pi_real, x.policy.pi_wm):
                if isinstance(pi, GreedyQPolicy):
                    saved[id(pi)] = (pi, pi.explore)
                    pi.explore = 0.0
        mixing = o.policy.epsilon
        if real_only:
            o.policy.epsilon = 0.0
        rng = np.random.default_rng([seed, 7])
        env = GridWorld(env_config or self.env_config, seed=seed)
        worker = Worker(env, self.encoder, self.goals, Executor(options, learn=False))
        worker.root_state = OptionExecutionState(o)
        wins = 0
        try:
            for _ in range(episodes):
                worker.reset()
                while True:
                    ctx, done, timeout = worker.executor.step(worker.root_state, worker.ctx,
                                                              worker.env_step, rng)
                    worker.ctx = ctx
                    if done or timeout:
                        wins += eval_goal(o.goal, ctx.s)
                        break
        finally:
            o.policy.epsilon = mixing
            for pi, explore in saved.values():
                pi.explore = explore
        return wins / episodes

    def planner_option(self, goal: GoalSpec, option_ids: Sequence[int],
                       start_states: Optional[Sequence[SymbolicState]] = None,
                       candidates: int = 1, rollouts: int = 100) -> OptionDef:
        """An untrained option over ``option_ids`` that acts greedily with a pi_wm planned in T.

        With ``candidates`` > 1, several pi_wm are trained and the one whose greedy rollouts in T
        from the first start state reach the goal most often is kept.
        """
        starts = list(start_states or self.wm_start_states())
        best, best_rate = None, -1.0
        for _ in range(candidates):
            o = OptionDef(-1 - goal.id, goal, list(option_ids),
                          MixedPolicy(None, None, 1.0, 0, self.cfg.anneal_samples), None,
                          self.cfg.max_t, "planner", trainable=False)
            learner = self.train_wm_policy(o, option_ids, starts)
            if learner is None:
                raise ConfigError("no option with a model to plan over")
            o.policy.pi_real = o.policy.pi_wm
            if candidates == 1:
                return o
            env = WorldModelEnv(self.wm, self.wm_actions[o.id], goal.id, starts[:1],
                                np.random.default_rng(self._seed(5, o.id, self.wm_trainings)))
            rate = greedy_success_rate(env, learner, self.encoder, goal, rollouts)
            if rate > best_rate:
                best, best_rate, best_learner = o, rate, learner
        self.wm_learners[best.id] = best_learner
        log.debug("planner for %s: simulated success %.2f", goal.name, best_rate)
        return best

    # ------------------------------------------------------- checkpoints

    def _learner_key(self, learner: DQNLearner) -> str:
        return "shared" if learner is self.shared_learner else None

    def save(self, directory, include_buffers: bool = True) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays: Dict[str, np.ndarray] = {}
        learners: Dict[str, dict] = {}

        def put(key: str, learner: DQNLearner, buffers: bool) -> None:
            if key in learners:
                return
            sd = learner.optimizer.state_dict()
            arrays.update(tensors_to_arrays(f"{key}/net", learner.net.state_dict()))
            arrays.update(tensors_to_arrays(f"{key}/target", learner.target.state_dict()))
            for pid, st in sd["state"].items():
                arrays.update(tensors_to_arrays(f"{key}/adam/{pid}", st))
            if buffers:
                for k, v in learner.buffer.state_arrays().items():
                    arrays[f"{key}/buffer/{k}"] = v
            learners[key] = {"input_dim": learner.input_dim, "n_actions": learner.n_actions,
                             "seed": learner.seed, "cfg": learner.cfg.to_dict(),
                             "param_groups": sd["param_groups"], "buffers": buffers,
                             "grad_steps_done": learner.grad_steps_done,
                             "rng": learner.rng.bit_generator.state}

        opts = self.trainable_options()
        for o in opts:
            put(self._learner_key(o.learner) or f"option{o.id}", o.learner, include_buffers)
        for oid, learner in sorted(self.wm_learners.items()):
            put(f"wm{oid}", learner, False)
        meta = {"version": CHECKPOINT_VERSION, "learners": learners}
        write_container(directory / "networks", arrays, meta)
        self.wm.save(directory / "world_model.json")
        state = {
            "version": CHECKPOINT_VERSION,
            "env": self.env_config.name,
            "config": self.cfg.to_dict(),
            "env_steps": self.env_steps, "rounds": self.rounds, "next_id": self.next_id,
            "next_goal": self.next_goal, "mastered": {str(k): v for k, v in sorted(self.mastered.items())},
            "options": [self._option_meta(o) for o in opts],
            "root": self.root.id if self.root is not None else None,
            "data": {str(k): [t.to_dict() for t in v] for k, v in sorted(self.data.items())},
            "root_data": [t.to_dict() for t in self.root_data],
            "wm_actions": {str(k): v for k, v in sorted(self.wm_actions.items())},
            "rng": self.rng.bit_generator.state,
            "counters": {"new_positives": self.new_positives, "rounds_since_wm": self.rounds_since_wm,
                         "wm_trainings": self.wm_trainings, "wm_stale": bool(getattr(self, "_wm_stale", True))},
            "hypotheses": self.hypotheses,
            "rows": [asdict(r) for r in self.rows],
        }
        (directory / "agent_state.json").write_text(json.dumps(state, sort_keys=True, indent=1))

    def _option_meta(self, o: OptionDef) -> dict:
        return {"id": o.id, "goal": o.goal.id, "actions": o.actions, "kind": o.kind,
                "precondition": o.precondition, "max_t": o.max_t, "n_samples": o.n_samples,
                "ct": o.ct, "executions": o.executions, "window": list(o.window),
                "trainable": o.trainable, "epsilon": o.policy.epsilon, "flushed": o.policy.flushed,
                "learner": self._learner_key(o.learner) or f"option{o.id}"}

    @classmethod
    def load(cls, directory, env_config: EnvConfig, proposer: Optional[Proposer] = None) -> "AgentOWL":
        directory = Path(directory)
        state = json.loads((directory / "agent_state.json").read_text())
        if state.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {state.get('version')}")
        if state["env"] != env_config.name:
            raise ConfigError(f"checkpoint was trained on {state['env']!r}, not {env_config.name!r}")
        agent = cls(env_config, AgentConfig.from_dict(state["config"]), proposer)
        arrays, meta = read_container(directory / "networks")
        learners = {k: agent._restore_learner(k, spec, arrays) for k, spec in meta["learners"].items()}
        if "shared" in learners:
            agent.shared_learner = learners["shared"]
        agent.wm = AbstractWorldModel.load(directory / "world_model.json", agent.goals)
        agent.env_steps, agent.rounds = state["env_steps"], state["rounds"]
        agent.next_id, agent.next_goal = state["next_id"], state["next_goal"]
        agent.mastered = {int(k): v for k, v in state["mastered"].items()}
        agent.rng.bit_generator.state = state["rng"]
        c = state["counters"]
        agent.new_positives, agent.rounds_since_wm = c["new_positives"], c["rounds_since_wm"]
        agent.wm_trainings, agent._wm_stale = c["wm_trainings"], c["wm_stale"]
        agent.hypotheses = state["hypotheses"]
        agent.rows = [MetricsRow(**r) for r in state["rows"]]
        root = None
        for m in state["options"]:
            goal = agent.goals[m["goal"]]
            learner = learners[m["learner"]]
            suffix = np.array([goal.id], np.float32) if agent.cfg.agent == "gc-dqn" else None
            pi = GreedyQPolicy(learner, goal, agent.cfg.train.explore_eps, suffix=suffix)
            policy = MixedPolicy(pi, None, m["epsilon"], m["flushed"], agent.cfg.anneal_samples)
            o = OptionDef(m["id"], goal, list(m["actions"]), policy, learner, m["max_t"], m["kind"],
                          m["precondition"], m["n_samples"], m["ct"], m["executions"],
                          deque(m["window"], maxlen=WINDOW), m["trainable"], suffix)
            if m["id"] == state["root"]:
                root = o
            else:
                agent.options[o.id] = o
                agent.data[o.id] = deque((Transition.from_dict(t) for t in state["data"][str(o.id)]),
                                         maxlen=agent.cfg.data_cap)
        agent._build_workers(env_config)
        for o in agent.options.values():
            for w in agent.workers:
                w.executor.register(o)
        for key, ids in state["wm_actions"].items():
            oid = int(key)
            owner = root if root is not None and root.id == oid else agent.options.get(oid)
            agent.wm_actions[oid] = ids
            agent.wm_learners[oid] = learners[f"wm{oid}"]
            if owner is not None:
                owner.policy.pi_wm = GreedyQPolicy(learners[f"wm{oid}"], owner.goal, 0.0,
                                                   [owner.actions.index(a) for a in ids])
        if root is not None:
            agent.root = root
            agent.root_data = deque((Transition.from_dict(t) for t in state["root_data"]),
                                    maxlen=agent.cfg.data_cap)
            for w in agent.workers:
                w.root_state = OptionExecutionState(root)
        return agent

    def _restore_learner(self, key: str, spec: dict, arrays: Dict[str, np.ndarray]) -> DQNLearner:
        cfg = TrainConfig(**spec["cfg"])
        factory = partial(GoalConditionedQNet, n_goals=len(self.goals)) if key == "shared" else None
        learner = DQNLearner(spec["input_dim"], spec["n_actions"], cfg, spec["seed"], net_factory=factory)
        learner.net.load_state_dict(arrays_to_tensors(f"{key}/net", arrays))
        learner.target.load_state_dict(arrays_to_tensors(f"{key}/target", arrays))
        adam_state = {}
        prefix = f"{key}/adam/"
        for name in arrays:
            if name.startswith(prefix):
                pid = int(name[len(prefix):].split("/")[0])
                adam_state[pid] = arrays_to_tensors(f"{prefix}{pid}", arrays)
        learner.optimizer.load_state_dict({"state": adam_state, "param_groups": spec["param_groups"]})
        if spec["buffers"]:
            buf = {name[len(key) + 8:]: v for name, v in arrays.items() if name.startswith(f"{key}/buffer/")}
            learner.buffer.load_arrays(buf)
        learner.grad_steps_done = spec["grad_steps_done"]
        learner.rng.bit_generator.state = spec["rng"]
        return learner
