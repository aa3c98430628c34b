"""DQN learner: greedy acting with heuristic-shaped values and prioritized n-step updates."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, List, Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .network import DuelingQNet
from .replay import ReplayBuffer, Step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 256
    lr: float = 1e-4
    n_step: int = 10
    gamma: float = 0.99
    target_update: int = 200
    grad_steps: int = 64
    train_frequency: int = 64
    kappa: float = 10.0
    grad_norm_max: float = 10.0
    frame_stack: int = 4
    buffer_capacity: int = 5000 * 4
    priority_temperature: float = 0.01
    hidden: int = 256
    steps_per_sample: float = 1.0
    explore_eps: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if k != "explore_eps" and v <= 0:
                raise ValueError(f"{k} must be positive")
        if not 0.0 <= self.explore_eps <= 1.0:
            raise ValueError("explore_eps must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def wm_config(base: TrainConfig, hidden: int = 128) -> TrainConfig:
    """Overrides for policies trained inside the world model: 1-step returns, narrower net."""
    return replace(base, n_step=1, hidden=hidden)


def build_network(input_dim: int, n_actions: int, hidden: int, seed: int,
                  net_factory: Optional[Callable[..., nn.Module]] = None) -> nn.Module:
    """Seeded construction that leaves the global torch RNG untouched."""
    factory = net_factory or DuelingQNet
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return factory(input_dim, n_actions, hidden)


def make_adam(params, lr: float) -> torch.optim.Optimizer:
    # The fused CPU kernel is several times cheaper per step for these small nets.
    try:
        return torch.optim.Adam(params, lr=lr, fused=True)
    except (RuntimeError, TypeError):
        return torch.optim.Adam(params, lr=lr)


class DQNLearner:
    """One policy network with its own target copy, optimizer and replay buffer."""

    def __init__(self, input_dim: int, n_actions: int, cfg: TrainConfig, seed: int = 0,
                 net_factory: Optional[Callable[..., nn.Module]] = None):
        self.cfg = cfg
        self.input_dim = input_dim
        self.n_actions = n_actions
        self.seed = seed
        self.net = build_network(input_dim, n_actions, cfg.hidden, seed, net_factory)
        self.target = copy.deepcopy(self.net)
        for p in self.target.parameters():
            p.requires_grad_(False)
        self.optimizer = make_adam(self.net.parameters(), cfg.lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, input_dim, cfg.n_step, cfg.gamma,
                                   cfg.kappa, cfg.priority_temperature)
        self.rng = np.random.default_rng(seed)
        self.grad_steps_done = 0
        self.skipped_batches = 0
        self.last_loss = float("nan")
        self.last_mean_q = float("nan")

    def q_values(self, obs: np.ndarray, h: float = 0.0) -> np.ndarray:
        """Q^new(s, .) = Q(s, .) + h."""
        with torch.no_grad():
            q = self.net(torch.as_tensor(obs, dtype=torch.float32).reshape(1, -1))[0].numpy()
        return q.astype(np.float64) + h

    def greedy(self, obs: np.ndarray, h: float = 0.0, mask: Optional[np.ndarray] = None) -> int:
        q = self.q_values(obs, h)
        if mask is not None:
            q = np.where(mask, q, -np.inf)
        return int(np.argmax(q))

    def act(self, obs: np.ndarray, h: float, rng: np.random.Generator,
            explore: Optional[float] = None) -> int:
        """Greedy action, except with probability ``explore`` (defaults to cfg.explore_eps)."""
        eps = self.cfg.explore_eps if explore is None else explore
        u = rng.random()
        if u < eps:
            return int(rng.integers(self.n_actions))
        return self.greedy(obs, h)

    def add_episode(self, steps: List[Step]) -> int:
        return self.buffer.push_episode(steps)

    def _batch(self, idx):
        b = self.buffer
        t = lambda a: torch.as_tensor(a[idx])
        return (t(b.obs), t(b.actions), t(b.returns), t(b.next_obs), t(b.discounts),
                t(b.h), t(b.next_h))

    def td_loss(self, obs, actions, returns, next_obs, discounts, h, next_h):
        q = self.net(obs).gather(1, actions.view(-1, 1)).squeeze(1) + h
        with torch.no_grad():
            q_next = self.target(next_obs).max(dim=1).values + next_h
            target = returns + discounts * q_next
        td = target - q
        return F.smooth_l1_loss(q, target), td.detach(), q.detach()

    def update(self, n_gradient_steps: int) -> int:
        """Run prioritized TD updates; returns the number of applied steps."""
        if len(self.buffer) == 0:
            return 0
        applied = 0
        for _ in range(int(n_gradient_steps)):
            idx = self.buffer.sample(self.cfg.batch_size, self.rng)
            loss, td, q = self.td_loss(*self._batch(idx))
            if not torch.isfinite(loss):
                self.skipped_batches += 1
                log.warning("non-finite loss; batch skipped")
                continue
            self.optimizer.zero_grad(set_to_none=True)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(self.net.parameters(), self.cfg.grad_norm_max, foreach=True)
            self.optimizer.step()
            self.buffer.update_priorities(idx, td.numpy())
            self.grad_steps_done += 1
            applied += 1
            if self.grad_steps_done % self.cfg.target_update == 0:
                self.sync_target()
            self.last_loss = float(loss.detach())
            self.last_mean_q = float(q.mean())
        return applied

    def sync_target(self) -> None:
        self.target.load_state_dict(self.net.state_dict())

    def state_dict(self) -> dict:
        return {"net": self.net.state_dict(), "target": self.target.state_dict(),
                "optimizer": self.optimizer.state_dict()}
