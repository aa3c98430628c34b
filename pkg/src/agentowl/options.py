"""Options, the mixed exploration policy and call-and-return execution.

An option owns a goal, an action space (primitive labels and/or ids of
other options), a mixed policy and its training statistics.  Each rollout
worker keeps one ``OptionExecutionState`` per option; a parent invoking a
sub-option attaches that state as its active child until it finishes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .env.gridworld import ConfigError
from .env.state import AbstractState, SymbolicState
from .goals import GoalSpec, eval_goal, heuristic
from .qlearner.learner import DQNLearner
from .qlearner.replay import Step

Action = Union[str, int]  # primitive label or option id

WINDOW = 100
ANNEAL_SAMPLES = 10_000
MAX_T = 100
N_THRESHOLD = 20_000
DELTA_THRESHOLD = 0.5


@dataclass
class DecisionContext:
    """Everything a policy may look at when choosing: raw state, stacked encoding, f(s)."""
    s: SymbolicState
    obs: np.ndarray
    f: AbstractState
    _h: Dict[int, float] = field(default_factory=dict, repr=False)

    def h(self, goal: GoalSpec) -> float:
        if goal.id not in self._h:
            self._h[goal.id] = heuristic(goal, self.s)
        return self._h[goal.id]


def with_suffix(obs: np.ndarray, suffix: Optional[np.ndarray]) -> np.ndarray:
    return obs if suffix is None else np.concatenate([obs, suffix]).astype(np.float32)


class GreedyQPolicy:
    """Greedy w.r.t. a learner's shaped Q-values, with optional uniform exploration.

    ``suffix`` is appended to the observation (the goal id for goal-conditioned nets).
    """

    def __init__(self, learner: DQNLearner, goal: GoalSpec, explore: float = 0.0,
                 action_map: Optional[Sequence[int]] = None, suffix: Optional[np.ndarray] = None):
        self.learner = learner
        self.goal = goal
        self.explore = explore
        self.action_map = None if action_map is None else list(action_map)
        self.suffix = suffix

    def choose(self, ctx: DecisionContext, rng: np.random.Generator) -> int:
        obs = with_suffix(ctx.obs, self.suffix)
        a = self.learner.act(obs, ctx.h(self.goal), rng, explore=self.explore)
        return a if self.action_map is None else self.action_map[a]


class ScriptedPolicy:
    def __init__(self, fn: Callable[[DecisionContext], int]):
        self.fn = fn

    def choose(self, ctx: DecisionContext, rng: np.random.Generator) -> int:
        return self.fn(ctx)


@dataclass
class MixedPolicy:
    """(1 - eps) * pi_real + eps * pi_wm, mixed per decision."""
    pi_real: object
    pi_wm: Optional[object] = None
    epsilon: float = 1.0
    flushed: int = 0
    anneal_samples: int = ANNEAL_SAMPLES

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


def sample_action(p: MixedPolicy, ctx: DecisionContext, rng: np.random.Generator) -> int:
    """Index into the option's action space.  One uniform draw per decision, always."""
    u = rng.random()
    if p.pi_wm is not None and u < p.epsilon:
        return p.pi_wm.choose(ctx, rng)
    return p.pi_real.choose(ctx, rng)


def anneal_epsilon(p: MixedPolicy, new_samples: int) -> float:
    """Linear 1 -> 0 in the number of flushed samples."""
    p.flushed += int(new_samples)
    p.epsilon = max(0.0, 1.0 - p.flushed / p.anneal_samples)
    return p.epsilon


@dataclass
class OptionDef:
    id: int
    goal: GoalSpec
    actions: List[Action]
    policy: MixedPolicy
    learner: Optional[DQNLearner] = None
    max_t: int = MAX_T
    kind: str = "root"  # root | hypothesized | flat
    precondition: Optional[int] = None  # h of a hypothesized option (a goal index)
    n_samples: int = 0
    ct: int = 0
    executions: int = 0
    window: deque = field(default_factory=lambda: deque(maxlen=WINDOW))
    trainable: bool = True
    obs_suffix: Optional[np.ndarray] = None

    @property
    def delta(self) -> float:
        return float(np.mean(self.window)) if self.window else 0.0

    @property
    def mastered(self) -> bool:
        return len(self.window) == WINDOW and self.delta > DELTA_THRESHOLD

    def sub_options(self) -> List[int]:
        return [a for a in self.actions if isinstance(a, int)]

    def label(self) -> str:
        if self.kind == "hypothesized":
            return f"o{self.id}[{self.precondition}->{self.goal.name}]"
        return f"o{self.id}[{self.goal.name}]"


def record_completion(o: OptionDef, success: bool) -> float:
    o.window.append(1.0 if success else 0.0)
    o.executions += 1
    return o.delta


def is_unstable(o: OptionDef, n_threshold: float, delta_threshold: float) -> bool:
    return o.n_samples < n_threshold and o.delta < delta_threshold


@dataclass
class TransitionRecord:
    u: DecisionContext
    action: int  # index into the option's action space
    s_next: DecisionContext
    reward: float
    terminal: bool


@dataclass
class OptionExecutionState:
    option: OptionDef
    child: Optional["OptionExecutionState"] = None
    u: Optional[DecisionContext] = None
    start: Optional[DecisionContext] = None
    D: List[TransitionRecord] = field(default_factory=list)
    t: int = 0
    last_action: Optional[int] = None

    def depth(self) -> int:
        return 0 if self.child is None else 1 + self.child.depth()

    def reset(self) -> None:
        self.child = None
        self.u = self.start = None
        self.D = []
        self.t = 0
        self.last_action = None


@dataclass
class ExecutionEvent:
    step: int
    depth: int
    option: int
    action: str
    reward: float
    child_done: bool
    done: bool
    flushed: Optional[bool] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class Executor:
    """Call-and-return execution for one rollout worker.

    ``states`` holds the worker's execution record for every option that may
    be invoked as a sub-option.  ``on_finish(option, start_ctx, end_ctx, interrupted)``
    is called whenever an execution ends.  With ``learn=False`` nothing is
    flushed, annealed or recorded (evaluation rollouts).
    """

    def __init__(self, options: Dict[int, OptionDef], n_threshold: float = N_THRESHOLD,
                 delta_threshold: float = DELTA_THRESHOLD,
                 on_finish: Optional[Callable] = None, trace: Optional[list] = None,
                 learn: bool = True):
        self.learn = learn
        self.options = options
        self.states: Dict[int, OptionExecutionState] = {
            i: OptionExecutionState(o) for i, o in options.items()}
        self.n_threshold = n_threshold
        self.delta_threshold = delta_threshold
        self.on_finish = on_finish
        self.trace = trace
        self.step_count = 0

    def register(self, o: OptionDef) -> None:
        self.options[o.id] = o
        self.states[o.id] = OptionExecutionState(o)

    def execute_one_step(self, ctx: DecisionContext, w: OptionExecutionState,
                         rng: np.random.Generator) -> str:
        while w.child is not None:
            w = w.child
        while True:
            if w.t == 0:
                w.start = ctx
            idx = sample_action(w.option.policy, ctx, rng)
            w.u = ctx
            w.t += 1
            w.last_action = idx
            a = w.option.actions[idx]
            if isinstance(a, str):
                return a
            if a not in self.states or a not in self.options:
                raise ConfigError(f"sub-option {a} is not in the option set")
            w.child = self.states[a]
            w = w.child

    def receive_obs_one_step(self, ctx: DecisionContext, w: OptionExecutionState,
                             force: Optional[str] = None, depth: int = 0) -> bool:
        """Returns whether ``w`` finished.  ``force`` ('env' or 'parent') ends it regardless."""
        o = w.option
        goal_now = eval_goal(o.goal, ctx.s)
        child_force = force or ("parent" if goal_now else None)
        if w.child is not None:
            child_done = self.receive_obs_one_step(ctx, w.child, child_force, depth + 1)
        else:
            child_done = True
        if child_done:
            r = float(goal_now)
            w.D.append(TransitionRecord(w.u, w.last_action, ctx, r, bool(goal_now)))
            w.child = None
        done = bool(goal_now) or force is not None or (child_done and w.t >= o.max_t)
        flushed = None
        if done:
            flushed = self._finish(w, ctx, goal_now, interrupted=(force == "parent" and not goal_now))
        if self.trace is not None:
            a = o.actions[w.last_action] if w.last_action is not None else None
            self.trace.append(ExecutionEvent(self.step_count, depth, o.id, str(a), float(goal_now),
                                             child_done, done, flushed))
        return done

    def _finish(self, w: OptionExecutionState, ctx: DecisionContext, success: bool,
                interrupted: bool) -> bool:
        o = w.option
        if not self.learn:
            w.reset()
            return False
        stable = True
        for rec in w.D:
            a = o.actions[rec.action]
            if isinstance(a, int) and is_unstable(self.options[a], self.n_threshold, self.delta_threshold):
                stable = False
                break
        if stable and w.D:
            if o.trainable and o.learner is not None:
                o.learner.add_episode([to_step(rec, o.goal, o.obs_suffix) for rec in w.D])
                o.ct += len(w.D)
                o.n_samples += len(w.D)
            if o.policy.pi_wm is not None:
                anneal_epsilon(o.policy, len(w.D))
        if not interrupted:
            record_completion(o, bool(success))
        if self.on_finish is not None:
            self.on_finish(o, w.start, ctx, interrupted)
        w.reset()
        return stable

    def step(self, root: OptionExecutionState, ctx: DecisionContext, env_step: Callable,
             rng: np.random.Generator):
        """One environment step under ``root``.  ``env_step(action) -> (ctx', timeout)``.

        Returns (next_ctx, root_done, timeout)."""
        a = self.execute_one_step(ctx, root, rng)
        next_ctx, timeout = env_step(a)
        done = self.receive_obs_one_step(next_ctx, root, force="env" if timeout else None)
        self.step_count += 1
        return next_ctx, done, timeout


def to_step(rec: TransitionRecord, goal: GoalSpec, suffix: Optional[np.ndarray] = None) -> Step:
    return Step(with_suffix(rec.u.obs, suffix), rec.action, rec.reward,
                with_suffix(rec.s_next.obs, suffix), rec.terminal, rec.u.h(goal), rec.s_next.h(goal))
