"""Hand-built fixtures shared by the unit and acceptance suites."""

import numpy as np

from agentowl.env.encoding import ObservationEncoder
from agentowl.goals import GoalSpec, abstract_state
from agentowl.options import DecisionContext, Executor, MixedPolicy, OptionDef, ScriptedPolicy
from agentowl.qlearner import DQNLearner, TrainConfig
from agentowl.worldmodel.model import SimResult

from conftest import make_state

# Deterministic option-level MDP: NEXT[s][a].  State 5 is the goal.  From 0 only
# the path 0 -a1-> 2 -a2-> 4 -a0-> 5 reaches it within 4 steps; 3 is a dead end.
NEXT = [[1, 2, 3, 3],
        [0, 0, 1, 1],
        [2, 2, 4, 0],
        [3, 3, 3, 3],
        [5, 1, 4, 3],
        [5, 5, 5, 5]]
GOAL_STATE = 5
HORIZON = 4
# Goal object lives in a room the player never sees, so the heuristic is 0.
DET_GOAL = GoalSpec(0, "target", "coin", room=9)
DET_ENCODER = ObservationEncoder({"player": 1}, n_goals=1, frame_stack=4)


def det_state(i: int):
    return make_state(room=1, player=(16 * i, 16))


class DeterministicWorldModel:
    """Same interface as ``WorldModelEnv`` over the table above."""

    def __init__(self, start: int = 0, horizon: int = HORIZON):
        self.start = start
        self.horizon = horizon
        self.states = [det_state(i) for i in range(len(NEXT))]

    def _id(self, s) -> int:
        return s.player.x // 16

    def abstract(self, s):
        return (int(self._id(s) == GOAL_STATE),)

    def reset(self):
        self.t = 0
        self.cur = self.start
        return self.states[self.cur]

    def step(self, a: int) -> SimResult:
        self.cur = NEXT[self.cur][a]
        self.t += 1
        r = float(self.cur == GOAL_STATE)
        return SimResult(self.states[self.cur], r, r > 0 or self.t >= self.horizon)


def value_iteration(horizon: int = HORIZON, gamma: float = 0.99) -> np.ndarray:
    """Exact finite-horizon Q at the first step: Q[s, a]."""
    n_s, n_a = len(NEXT), len(NEXT[0])
    v = np.zeros(n_s)
    q = np.zeros((n_s, n_a))
    for _ in range(horizon):
        q = np.zeros((n_s, n_a))
        for s in range(n_s):
            if s == GOAL_STATE:
                continue
            for a in range(n_a):
                s2 = NEXT[s][a]
                q[s, a] = 1.0 if s2 == GOAL_STATE else gamma * v[s2]
        v = q.max(axis=1)
        v[GOAL_STATE] = 0.0
    return q


# A corridor: the player walks right 8 px per step past markers a, b, c.
GOALS = (GoalSpec(0, "a", "a", 1), GoalSpec(1, "b", "b", 1), GoalSpec(2, "c", "c", 1))
MARKERS = (("a", 16, 0), ("b", 32, 0), ("c", 48, 0))


def ctx_at(x):
    s = make_state(1, (x, 0), MARKERS)
    return DecisionContext(s, np.array([x], np.float32), abstract_state(s, GOALS))


def option(i, goal, actions, n_samples=30_000):
    o = OptionDef(i, GOALS[goal], actions, MixedPolicy(ScriptedPolicy(lambda ctx: 0), epsilon=0.0),
                  learner=DQNLearner(1, len(actions), TrainConfig(batch_size=4, n_step=1), seed=i))
    o.n_samples = n_samples
    return o


def hierarchy():
    # o0 -> o1 -> o2 -> RIGHT, with goals c, b, a.
    return {0: option(0, 2, [1]), 1: option(1, 1, [2]), 2: option(2, 0, ["RIGHT"])}


def run(options, max_steps=20):
    finishes, primitives = [], []
    ex = Executor(options, on_finish=lambda o, a, b, i: finishes.append((o.id, a.obs[0], b.obs[0], i)))
    ctx, x = ctx_at(0), 0
    root = ex.states[0]

    def env_step(a):
        nonlocal x
        primitives.append(a)
        x += 8
        return ctx_at(x), False

    rng = np.random.default_rng(0)
    for _ in range(max_steps):
        ctx, done, _ = ex.step(root, ctx, env_step, rng)
        if done:
            break
    return ex, finishes, primitives


def buffer_pairs(o):
    b = o.learner.buffer
    return [(float(b.obs[i, 0]), float(b.next_obs[i, 0]), float(b.returns[i])) for i in range(len(b))]
