"""FIFO replay with whole-episode n-step aggregation and temperature-scaled priorities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

PRIORITY_EPS = 1e-6


@dataclass
class Step:
    """One decision of a policy: obs -> action, raw reward, next obs."""
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool
    h: float = 0.0
    next_h: float = 0.0


class ReplayBuffer:
    """Ring buffer of n-step transitions.

    Sampling probability is p_i^tau / sum_j p_j^tau, p_i = |TD_i| + eps, so a
    small temperature keeps sampling close to uniform.  New entries get the
    current maximum priority.
    """

    def __init__(self, capacity: int, obs_dim: int, n_step: int = 1, gamma: float = 0.99,
                 kappa: float = 10.0, temperature: float = 0.01):
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.n_step = n_step
        self.gamma = gamma
        self.kappa = kappa
        self.temperature = temperature
        self._allocate(min(capacity, 1024))
        self.size = 0
        self.pos = 0
        self.total_pushed = 0

    _FIELDS = (("obs", np.float32, True), ("next_obs", np.float32, True), ("actions", np.int64, False),
               ("returns", np.float32, False), ("discounts", np.float32, False), ("h", np.float32, False),
               ("next_h", np.float32, False), ("priorities", np.float64, False))

    def _allocate(self, n: int) -> None:
        # Storage grows geometrically up to capacity; many option buffers stay small.
        for name, dtype, wide in self._FIELDS:
            shape = (n, self.obs_dim) if wide else (n,)
            new = np.zeros(shape, dtype)
            old = getattr(self, name, None)
            if old is not None:
                new[:len(old)] = old
            setattr(self, name, new)
        self.allocated = n

    def __len__(self) -> int:
        return self.size

    def max_priority(self) -> float:
        return float(self.priorities[:self.size].max()) if self.size else 1.0

    def push(self, obs, action: int, ret: float, next_obs, discount: float,
             h: float = 0.0, next_h: float = 0.0) -> int:
        """Store one already-aggregated transition; ``ret`` must be kappa-scaled."""
        i = self.pos
        if i >= self.allocated:
            self._allocate(min(self.capacity, 2 * self.allocated))
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = action
        self.returns[i] = ret
        self.discounts[i] = discount
        self.h[i] = h
        self.next_h[i] = next_h
        self.priorities[i] = self.max_priority()
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total_pushed += 1
        return i

    def push_episode(self, steps: Sequence[Step]) -> int:
        """Aggregate n-step returns inside one episode (truncating at its end) and store."""
        n = len(steps)
        for t in range(n):
            ret, disc, k = 0.0, 1.0, t
            while True:
                ret += disc * self.kappa * steps[k].reward
                disc *= self.gamma
                if steps[k].terminal:
                    disc = 0.0
                    break
                if k - t + 1 >= self.n_step or k == n - 1:
                    break
                k += 1
            self.push(steps[t].obs, steps[t].action, ret, steps[k].next_obs, disc,
                      steps[t].h, steps[k].next_h)
        return n

    def probabilities(self) -> np.ndarray:
        # stored priorities already carry PRIORITY_EPS, so the log is finite
        logits = self.temperature * np.log(self.priorities[:self.size])
        logits -= logits.max()
        w = np.exp(logits)
        return w / w.sum()

    def sample(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.choice(self.size, size=batch_size, p=self.probabilities())

    def update_priorities(self, idx: np.ndarray, td: np.ndarray) -> None:
        self.priorities[idx] = np.abs(td) + PRIORITY_EPS

    def clear(self) -> None:
        self.size = self.pos = 0

    def state_arrays(self) -> dict:
        n = self.size
        return {"obs": self.obs[:n], "next_obs": self.next_obs[:n], "actions": self.actions[:n],
                "returns": self.returns[:n], "discounts": self.discounts[:n], "h": self.h[:n],
                "next_h": self.next_h[:n], "priorities": self.priorities[:n],
                "meta": np.array([self.pos, self.total_pushed], np.int64)}

    def load_arrays(self, arrays: dict) -> None:
        n = len(arrays["actions"])
        if n > self.allocated:
            self._allocate(min(self.capacity, max(n, 2 * self.allocated)))
        for name in ("obs", "next_obs", "actions", "returns", "discounts", "h", "next_h", "priorities"):
            getattr(self, name)[:n] = arrays[name]
        self.size = n
        self.pos, self.total_pushed = (int(v) for v in arrays["meta"])
