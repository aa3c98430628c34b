"""Deterministic offline proposer.

A stand-in for the language model: sub-goals are picked by room-graph
distance and then walking distance through portals; preconditions are the
most frequent touch/room facts of successful start states.
"""

from __future__ import annotations

from collections import Counter, deque
from typing import Dict, List, Optional, Tuple

from ..env.gridworld import EnvConfig
from ..env.state import SymbolicState, is_roomnumber
from ..goals import GoalSpec
from ..worldmodel.preconditions import (AnyObjTypeTouching, ObjTouchingAndRoomNumberExist,
                                        Precondition, RoomNumberExist, SpecificObjTouching)
from .base import ProposalError, ProposalRequest, Proposer, max_preconditions

_KIND_RANK = {"RoomNumberExist": 0, "ObjTouchingAndRoomNumberExist": 1,
              "AnyObjTypeTouching": 2, "SpecificObjTouching": 3}


class RoomGraph:
    """Rooms joined by side portals, with the portal rows for each adjacent pair."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.portals: Dict[Tuple[int, int], List[int]] = {}
        w = config.width
        for k in config.rooms:
            if k + 1 not in config.rooms:
                continue
            a, b = config.rooms[k], config.rooms[k + 1]
            rows = [y for y in range(config.height) if not a.is_wall(w - 1, y) and not b.is_wall(0, y)]
            if rows:
                self.portals[(k, k + 1)] = rows
                self.portals[(k + 1, k)] = rows

    def neighbours(self, k: int) -> List[int]:
        return sorted(b for (a, b) in self.portals if a == k)

    def distance(self, a: int, b: int) -> float:
        dist = {a: 0}
        q = deque([a])
        while q:
            k = q.popleft()
            for n in self.neighbours(k):
                if n not in dist:
                    dist[n] = dist[k] + 1
                    q.append(n)
        return dist.get(b, float("inf"))

    def walk(self, room_a: int, cell_a: Tuple[int, int], room_b: int, cell_b: Tuple[int, int]) -> float:
        """Manhattan distance in cells, routed through portal cells when rooms differ."""
        if room_a == room_b:
            return abs(cell_a[0] - cell_b[0]) + abs(cell_a[1] - cell_b[1])
        if self.distance(room_a, room_b) == float("inf"):
            return float("inf")
        step = 1 if room_b > room_a else -1
        nxt = room_a + step
        rows = self.portals.get((room_a, nxt), [])
        w = self.config.width
        exit_x, entry_x = (w - 1, 0) if step > 0 else (0, w - 1)
        best = float("inf")
        for y in rows:
            d = abs(cell_a[0] - exit_x) + abs(cell_a[1] - y) + 1
            best = min(best, d + self.walk(nxt, (entry_x, y), room_b, cell_b))
        return best


class StubProposer(Proposer):
    kind = "stub"

    def __init__(self, config: EnvConfig, goals):
        self.config = config
        self.goals = list(goals)
        self.graph = RoomGraph(config)
        self.calls = Counter()

    def _goal_cell(self, g: GoalSpec) -> Tuple[int, int]:
        room = self.config.rooms[g.room]
        for o in room.objects:
            if o.object_type == g.object_type:
                if g.anchor is None or (o.cx * self.config.cell, o.cy * self.config.cell) == tuple(g.anchor):
                    return o.cx, o.cy
        raise ProposalError(f"goal {g.name} has no object in room {g.room}")

    def rank_subgoals(self, req: ProposalRequest) -> List[int]:
        target_cell = self._goal_cell(req.target)
        scored = []
        for g in req.achieved:
            key = (self.graph.distance(g.room, req.target.room),
                   self.graph.walk(g.room, self._goal_cell(g), req.target.room, target_cell),
                   g.id)
            scored.append((key, g.id))
        return [gid for _, gid in sorted(scored)]

    def propose_subgoal(self, req: ProposalRequest) -> int:
        self.calls["subgoal"] += 1
        if not req.achieved:
            raise ProposalError("no achieved goals to build on")
        ranked = self.rank_subgoals(req)
        fresh = [g for g in ranked if g not in set(req.exclude)]
        return (fresh or ranked)[0]

    def propose_preconditions(self, req: ProposalRequest) -> List[Precondition]:
        self.calls["precondition"] += 1
        counts: Counter = Counter()
        for s in req.successes:
            counts.update(set(candidate_facts(s, req.multi_object)))
        ranked = sorted(counts, key=lambda p: (-counts[p], _KIND_RANK[p.kind], p.describe()))
        return ranked[:max_preconditions(req.multi_object)]


def candidate_facts(s: SymbolicState, multi_object: bool = False) -> List[Precondition]:
    """Touch and room facts that hold in ``s``."""
    objs = s.require_objects()
    room = s.require_room()
    player = s.player
    out: List[Precondition] = [RoomNumberExist(room)]
    for a in objs:
        if is_roomnumber(a.object_type):
            continue
        if not multi_object and (player is None or a is not player):
            continue
        for b in objs:
            if b is a or is_roomnumber(b.object_type) or b.object_type == a.object_type:
                continue
            if not a.overlaps(b):
                continue
            if multi_object:
                out.append(ObjTouchingAndRoomNumberExist(a.object_type, b.object_type, room))
            else:
                out.append(AnyObjTypeTouching(a.object_type, b.object_type))
                out.append(SpecificObjTouching(b.object_type, b.x, b.y, subject=a.object_type))
    return out
