"""Closed family of precondition programs used to gate world-model experts.

Each precondition renders to (and parses from) the one-line feature syntax
used in the precondition prompts, e.g.::

    SpecificObjTouching: The player object touches the platform object located at (x=8, y=125)
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from ..env.state import (ROOMNUMBER_PREFIX, AbstractState, PartialStateAccess,
                         SymbolicState)


class PreconditionParseError(ValueError):
    pass


def _touching(s: SymbolicState, type_a: str, type_b: str) -> bool:
    objs = s.require_objects()
    for a in objs:
        if a.object_type != type_a:
            continue
        for b in objs:
            if b is not a and b.object_type == type_b and a.overlaps(b):
                return True
    return False


def _room_exists(s: SymbolicState, room: int) -> bool:
    name = f"{ROOMNUMBER_PREFIX}{room}"
    return any(o.object_type == name for o in s.require_objects())


@dataclass(frozen=True)
class Precondition:
    kind = "base"

    def evaluate(self, s: SymbolicState, f: Optional[AbstractState] = None) -> bool:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class AnyObjTypeTouching(Precondition):
    type_a: str
    type_b: str
    kind = "AnyObjTypeTouching"

    def evaluate(self, s, f=None):
        return _touching(s, self.type_a, self.type_b)

    def describe(self):
        return f"AnyObjTypeTouching: The {self.type_a} object touches a {self.type_b} object"


@dataclass(frozen=True)
class SpecificObjTouching(Precondition):
    object_type: str
    x: int
    y: int
    subject: str = "player"
    kind = "SpecificObjTouching"

    def evaluate(self, s, f=None):
        objs = s.require_objects()
        targets = [o for o in objs if o.object_type == self.object_type
                   and (o.x, o.y) == (self.x, self.y)]
        return any(a.object_type == self.subject and a is not b and a.overlaps(b)
                   for a in objs for b in targets)

    def describe(self):
        return (f"SpecificObjTouching: The {self.subject} object touches the {self.object_type} "
                f"object located at (x={self.x}, y={self.y})")


@dataclass(frozen=True)
class RoomNumberExist(Precondition):
    room: int
    kind = "RoomNumberExist"

    def evaluate(self, s, f=None):
        return _room_exists(s, self.room)

    def describe(self):
        return f"RoomNumberExist: An object with type '{ROOMNUMBER_PREFIX}{self.room}' exists"


@dataclass(frozen=True)
class ObjTouchingAndRoomNumberExist(Precondition):
    type_a: str
    type_b: str
    room: int
    kind = "ObjTouchingAndRoomNumberExist"

    def evaluate(self, s, f=None):
        return _room_exists(s, self.room) and _touching(s, self.type_a, self.type_b)

    def describe(self):
        return (f"ObjTouchingAndRoomNumberExist: The {self.type_a} object touches the "
                f"{self.type_b} object and an object with type "
                f"'{ROOMNUMBER_PREFIX}{self.room}' exists")


@dataclass(frozen=True)
class SubgoalHolds(Precondition):
    goal: int
    kind = "SubgoalHolds"

    def evaluate(self, s, f=None):
        if f is None:
            f = s.abstract
        if f is None or f[self.goal] is None:
            raise PartialStateAccess(f"abstract[{self.goal}]")
        return bool(f[self.goal])

    def describe(self):
        return f"SubgoalHolds: goal {self.goal} holds"


KINDS = {c.kind: c for c in (AnyObjTypeTouching, SpecificObjTouching, RoomNumberExist,
                             ObjTouchingAndRoomNumberExist, SubgoalHolds)}


def precondition_from_dict(d: dict) -> Precondition:
    d = dict(d)
    cls = KINDS.get(d.pop("kind", None))
    if cls is None:
        raise PreconditionParseError(f"unknown precondition kind in {d}")
    return cls(**d)


_ROOM = r"'?roomnumber_\+(-?\d+)'?"
_PATTERNS = [
    (re.compile(r"SpecificObjTouching\W+the (\w+) object touches the (\w+) object located at "
                r"\(x\s*=\s*(-?\d+),\s*y\s*=\s*(-?\d+)\)", re.I),
     lambda m: SpecificObjTouching(m[2], int(m[3]), int(m[4]), subject=m[1])),
    (re.compile(r"ObjTouchingAndRoomNumberExist\W+the (\w+) object touches the (\w+) object "
                r"and an object with type " + _ROOM + r" exists", re.I),
     lambda m: ObjTouchingAndRoomNumberExist(m[1], m[2], int(m[3]))),
    (re.compile(r"AnyObjTypeTouching\W+the (\w+) object touches an? (\w+) object", re.I),
     lambda m: AnyObjTypeTouching(m[1], m[2])),
    (re.compile(r"RoomNumberExist\W+an object with type " + _ROOM + r" exists", re.I),
     lambda m: RoomNumberExist(int(m[1]))),
    (re.compile(r"SubgoalHolds\W+goal (\d+) holds", re.I),
     lambda m: SubgoalHolds(int(m[1]))),
]


def parse_precondition(line: str) -> Precondition:
    """Parse one feature line (numbering and markdown noise are tolerated)."""
    text = line.strip().strip("*`").strip()
    for pattern, build in _PATTERNS:
        m = pattern.search(text)
        if m:
            return build(m)
    raise PreconditionParseError(f"cannot parse precondition: {line!r}")


def parse_precondition_list(text: str, allowed: Sequence[str] = ()) -> list:
    """Parse every numbered line of a reply, skipping unparseable or disallowed ones."""
    out = []
    for line in text.splitlines():
        if not re.match(r"\s*\**\s*\d+[.)]", line):
            continue
        try:
            p = parse_precondition(line)
        except PreconditionParseError:
            continue
        if allowed and p.kind not in allowed:
            continue
        if p not in out:
            out.append(p)
    return out
