from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from ..env.state import SymbolicState
from ..goals import GoalSpec
from ..worldmodel.preconditions import Precondition


class ProposalError(RuntimeError):
    pass


@dataclass
class ProposalRequest:
    target: GoalSpec
    achieved: List[GoalSpec] = field(default_factory=list)
    sample_states: List[SymbolicState] = field(default_factory=list)
    mode: str = "subgoal"  # subgoal | precondition
    successes: List[SymbolicState] = field(default_factory=list)
    multi_object: bool = False
    game_name: str = "chain6"
    exclude: Sequence[int] = ()  # goal indices already used as preconditions for this target

    def __post_init__(self):
        if self.mode not in ("subgoal", "precondition"):
            raise ValueError(f"unknown proposal mode {self.mode!r}")


class Proposer:
    kind = "base"

    def propose_subgoal(self, req: ProposalRequest) -> int:
        raise NotImplementedError

    def propose_preconditions(self, req: ProposalRequest) -> List[Precondition]:
        raise NotImplementedError

    @property
    def stats(self) -> dict:
        return {}


def max_preconditions(multi_object: bool) -> int:
    return 2 if multi_object else 4


def allowed_kinds(multi_object: bool) -> tuple:
    if multi_object:
        return ("RoomNumberExist", "ObjTouchingAndRoomNumberExist")
    return ("AnyObjTypeTouching", "SpecificObjTouching")


def one_state_per_room(states: Sequence[SymbolicState]) -> List[SymbolicState]:
    """First seen full state for each room, ordered by room index."""
    seen = {}
    for s in states:
        if not s.is_partial and s.room not in seen:
            seen[s.room] = s
    return [seen[k] for k in sorted(seen)]
