"""Touch-object goal predicates, the goal abstraction f(s), rewards and the distance heuristic."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .env.gridworld import EnvConfig
from .env.state import AbstractState, GameObject, SymbolicState

MAX_DIST = 400
HEURISTIC_SCALE = 5.0


@dataclass(frozen=True)
class GoalSpec:
    id: int
    name: str
    object_type: str
    room: int
    anchor: Optional[Tuple[int, int]] = None
    description: str = ""
    kind: str = "touch-object"

    def describe(self) -> str:
        if self.description:
            return self.description
        return f"in room #{self.room}, touch object with id {self.object_type}"


def goals_from_config(config: EnvConfig) -> Tuple[GoalSpec, ...]:
    return tuple(GoalSpec(id=i, name=g.name, object_type=g.object_type, room=g.room,
                          anchor=g.anchor, description=g.description)
                 for i, g in enumerate(config.goals))


def target_object(g: GoalSpec, s: SymbolicState) -> Optional[GameObject]:
    """The goal's object if it is visible in ``s`` (same room), else None."""
    if s.require_room() != g.room:
        return None
    for o in s.of_type(g.object_type):
        if g.anchor is None or (o.x, o.y) == tuple(g.anchor):
            return o
    return None


def eval_goal(g: GoalSpec, s: SymbolicState) -> int:
    player = s.player
    target = target_object(g, s)
    if player is None or target is None:
        return 0
    return int(player.overlaps(target))


def abstract_state(s: SymbolicState, goals: Sequence[GoalSpec]) -> AbstractState:
    if s.is_partial:
        return tuple(s.abstract)
    return tuple(eval_goal(g, s) for g in goals)


def reward(g: GoalSpec, s: SymbolicState, a, s_next: SymbolicState) -> float:
    return float(eval_goal(g, s_next))


def heuristic(g: GoalSpec, s: SymbolicState) -> float:
    """5 * (1 - manhattan / 400); zero when the goal object is not visible."""
    if s.is_partial:
        return 0.0
    player = s.player
    target = target_object(g, s)
    if player is None or target is None:
        return 0.0
    dist = min(abs(player.x - target.x) + abs(player.y - target.y), MAX_DIST)
    return HEURISTIC_SCALE * (1.0 - dist / MAX_DIST)
