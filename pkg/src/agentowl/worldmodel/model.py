"""The abstract world model T: option models, the weighting table and simulated stepping."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..env.state import AbstractState, PartialStateAccess, SymbolicState, partial_state
from ..goals import GoalSpec, abstract_state
from .poe import ETA, OptionModel, sample_outcome

SIM_HORIZON = 4
FORMAT_VERSION = 1


class WeightingTable:
    """Abstract state -> one representative full state (last writer wins)."""

    def __init__(self):
        self._table: Dict[Tuple[int, ...], SymbolicState] = {}

    def __len__(self) -> int:
        return len(self._table)

    def keys(self) -> List[Tuple[int, ...]]:
        return sorted(self._table)

    def update(self, f: AbstractState, s: SymbolicState) -> None:
        if s.is_partial or any(v is None for v in f):
            raise ValueError("only full states with fully known abstractions are stored")
        self._table[tuple(int(v) for v in f)] = s

    def lookup(self, f: AbstractState) -> SymbolicState:
        if any(v is None for v in f):
            return partial_state(f)
        s = self._table.get(tuple(f))
        if s is None:
            return partial_state(f)
        return s

    def states(self) -> List[SymbolicState]:
        return [self._table[k] for k in self.keys()]

    def to_list(self) -> list:
        return [[list(k), self._table[k].to_dict()] for k in self.keys()]

    @classmethod
    def from_list(cls, items: list) -> "WeightingTable":
        t = cls()
        for k, s in items:
            t._table[tuple(int(v) for v in k)] = SymbolicState.from_dict(s)
        return t


@dataclass
class AbstractWorldModel:
    goals: Tuple[GoalSpec, ...]
    models: Dict[int, OptionModel] = field(default_factory=dict)
    table: WeightingTable = field(default_factory=WeightingTable)
    eta: float = ETA

    def abstract(self, s: SymbolicState) -> AbstractState:
        return abstract_state(s, self.goals)

    def observe(self, s: SymbolicState, f: Optional[AbstractState] = None) -> None:
        self.table.update(self.abstract(s) if f is None else f, s)

    def to_dict(self) -> dict:
        return {"version": FORMAT_VERSION, "eta": self.eta,
                "models": [self.models[k].to_dict() for k in sorted(self.models)],
                "table": self.table.to_list()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, d: dict, goals: Sequence[GoalSpec]) -> "AbstractWorldModel":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported world-model format {d.get('version')}")
        models = {m["option_id"]: OptionModel.from_dict(m) for m in d["models"]}
        return cls(tuple(goals), models, WeightingTable.from_list(d["table"]), float(d["eta"]))

    @classmethod
    def load(cls, path, goals: Sequence[GoalSpec]) -> "AbstractWorldModel":
        return cls.from_dict(json.loads(Path(path).read_text()), goals)


@dataclass
class SimResult:
    next_state: SymbolicState
    reward: float
    done: bool
    terminated_by_access: bool = False


def sim_step(wm: AbstractWorldModel, current: SymbolicState, option_id: int, goal: int,
             rng: np.random.Generator) -> SimResult:
    """Apply one option in the abstract model.  Reading an unknown field ends the episode."""
    if option_id not in wm.models:
        raise KeyError(f"option {option_id} has no model")
    try:
        f = current.abstract if current.is_partial else wm.abstract(current)
        f_next = sample_outcome(wm.models[option_id], current, f, rng, wm.eta)
    except PartialStateAccess:
        return SimResult(current, 0.0, True, True)
    reward = float(f_next[goal] == 1)
    return SimResult(wm.table.lookup(f_next), reward, reward > 0)


class WorldModelEnv:
    """T as an episodic environment over options with a fixed short horizon."""

    def __init__(self, wm: AbstractWorldModel, option_ids: Sequence[int], goal: int,
                 start_states: Sequence[SymbolicState], rng: np.random.Generator,
                 horizon: int = SIM_HORIZON, spawn_prob: float = 0.5):
        if not start_states:
            raise ValueError("need at least one start state")
        self.wm = wm
        self.option_ids = list(option_ids)
        self.goal = goal
        self.start_states = list(start_states)
        self.rng = rng
        self.horizon = horizon
        self.spawn_prob = spawn_prob
        self.t = 0
        self.state: Optional[SymbolicState] = None

    def reset(self) -> SymbolicState:
        """The first start state is the spawn; others are drawn uniformly otherwise."""
        self.t = 0
        if len(self.start_states) == 1 or self.rng.random() < self.spawn_prob:
            self.state = self.start_states[0]
        else:
            self.state = self.start_states[1 + int(self.rng.integers(len(self.start_states) - 1))]
        return self.state

    def abstract(self, s: SymbolicState) -> AbstractState:
        return s.abstract if s.is_partial else self.wm.abstract(s)

    def step(self, action: int) -> SimResult:
        res = sim_step(self.wm, self.state, self.option_ids[action], self.goal, self.rng)
        self.t += 1
        if self.t >= self.horizon:
            res.done = True
        self.state = res.next_state
        return res
