"""Dueling Q-network with layer-normalized MLP trunk."""

from __future__ import annotations

import torch
from torch import nn

OUTPUT_INIT_SCALE = 0.1


def _block(n_in: int, n_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(n_in, n_out), nn.LayerNorm(n_out), nn.ReLU())


class DuelingQNet(nn.Module):
    """Two (Linear -> LayerNorm -> ReLU) feature layers, then value and advantage
    heads of width hidden/2.  Q = V + A - mean(A)."""

    def __init__(self, input_dim: int, n_actions: int, hidden: int = 256):
        super().__init__()
        self.input_dim = input_dim
        self.n_actions = n_actions
        self.hidden = hidden
        half = max(hidden // 2, 1)
        self.features = nn.Sequential(_block(input_dim, hidden), _block(hidden, hidden))
        self.value = nn.Sequential(_block(hidden, half), nn.Linear(half, 1))
        self.advantage = nn.Sequential(_block(hidden, half), nn.Linear(half, n_actions))
        # Default fan-in uniform init, shrunk on the output layers so a fresh
        # network predicts values near zero and the heuristic offset dominates.
        with torch.no_grad():
            for head in (self.value, self.advantage):
                head[-1].weight.mul_(OUTPUT_INIT_SCALE)
                head[-1].bias.mul_(OUTPUT_INIT_SCALE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x)
        v = self.value(h)
        a = self.advantage(h)
        return v + a - a.mean(dim=-1, keepdim=True)

    def value_and_advantage(self, x: torch.Tensor):
        h = self.features(x)
        return self.value(h), self.advantage(h)


class GoalConditionedQNet(nn.Module):
    """Dueling net over [obs, goal embedding].  The goal index rides in the last input column."""

    def __init__(self, input_dim: int, n_actions: int, hidden: int = 256, n_goals: int = 1,
                 embed_dim: int = 16):
        super().__init__()
        self.input_dim = input_dim
        self.n_actions = n_actions
        self.embed = nn.Embedding(n_goals, embed_dim)
        self.body = DuelingQNet(input_dim - 1 + embed_dim, n_actions, hidden)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        goal = x[..., -1].round().long()
        return self.body(torch.cat([x[..., :-1], self.embed(goal)], dim=-1))
