"""Training an exploration policy from scratch inside the abstract world model."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..env.encoding import ObservationEncoder, encode_single
from ..env.state import SymbolicState
from ..goals import GoalSpec, heuristic
from .learner import DQNLearner, TrainConfig
from .replay import Step

WM_EXPLORE_START = 1.0
WM_EXPLORE_END = 0.01
WM_EXPLORE_FRACTION = 0.95


def linear_schedule(step: int, total: int, start: float = WM_EXPLORE_START,
                    end: float = WM_EXPLORE_END, fraction: float = WM_EXPLORE_FRACTION) -> float:
    span = max(1.0, fraction * total)
    frac = min(1.0, step / span)
    return start + frac * (end - start)


def train_in_world_model(env, n_actions: int, encoder: ObservationEncoder, goal: GoalSpec,
                         cfg: TrainConfig, budget: int, seed: int,
                         learner: Optional[DQNLearner] = None) -> DQNLearner:
    """DQN over the simulated option-level environment for ``budget`` simulated steps.

    Observations are the newest frame tiled over the stack, since simulated
    steps jump between option boundaries.  Returns the learner; act greedily
    with it for the trained policy.
    """
    if learner is None:
        learner = DQNLearner(encoder.dim, n_actions, cfg, seed)
    rng = np.random.default_rng(seed)

    def observe(s: SymbolicState):
        return encode_single(encoder, s, env.abstract(s)), heuristic(goal, s)

    s = env.reset()
    obs, h = observe(s)
    steps = []
    t = 0
    while t < budget:
        for _ in range(cfg.train_frequency):
            if t >= budget:
                break
            eps = linear_schedule(t, budget)
            a = learner.act(obs, h, rng, explore=eps)
            res = env.step(a)
            next_obs, next_h = observe(res.next_state)
            terminal = res.reward > 0 or res.terminated_by_access
            steps.append(Step(obs, a, res.reward, next_obs, terminal, h, next_h))
            t += 1
            if res.done:
                learner.add_episode(steps)
                steps = []
                s = env.reset()
                obs, h = observe(s)
            else:
                obs, h = next_obs, next_h
        if steps:
            # flush the partial episode so n-step aggregation sees everything collected
            learner.add_episode(steps)
            steps = []
        learner.update(cfg.grad_steps)
    return learner


def greedy_option(learner: DQNLearner, encoder: ObservationEncoder, abstract_fn: Callable,
                  goal: GoalSpec, s: SymbolicState) -> int:
    obs = encode_single(encoder, s, abstract_fn(s))
    return learner.greedy(obs, heuristic(goal, s))


def greedy_success_rate(env, learner: DQNLearner, encoder: ObservationEncoder, goal: GoalSpec,
                        episodes: int) -> float:
    """Fraction of simulated episodes in which the greedy policy collects the goal reward."""
    wins = 0
    for _ in range(episodes):
        s = env.reset()
        while True:
            res = env.step(greedy_option(learner, encoder, env.abstract, goal, s))
            s = res.next_state
            if res.done:
                wins += res.reward > 0
                break
    return wins / episodes
