"""Object-centric state types shared by every module."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

ROOMNUMBER_PREFIX = "roomnumber_+"

# Abstract state entries: 0, 1 or None (unknown; produced only by the world model).
AbstractState = Tuple[Optional[int], ...]


class PartialStateAccess(Exception):
    """Raised when a primitive field of a partial state is read."""


@dataclass(frozen=True)
class GameObject:
    object_type: str
    x: int
    y: int
    w: int
    h: int
    is_static: bool = False

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative extent for {self.object_type}: w={self.w} h={self.h}")

    def overlaps(self, other: "GameObject") -> bool:
        # Boxes are half-open [x, x + w); zero-extent boxes still occupy their anchor cell.
        w1, h1 = max(self.w, 1), max(self.h, 1)
        w2, h2 = max(other.w, 1), max(other.h, 1)
        return (self.x < other.x + w2 and other.x < self.x + w1
                and self.y < other.y + h2 and other.y < self.y + h1)

    def describe(self, with_at: bool = False) -> str:
        at = "with at " if with_at else ""
        return f"{self.object_type} object {at}(x={self.x}, y={self.y}, w={self.w}, h={self.h})"


def roomnumber_object(room: int) -> GameObject:
    return GameObject(f"{ROOMNUMBER_PREFIX}{room}", 0, 0, 0, 0, is_static=True)


def is_roomnumber(object_type: str) -> bool:
    return object_type.startswith(ROOMNUMBER_PREFIX)


@dataclass(frozen=True)
class SymbolicState:
    """A full state (objects + room) or a partial one (objects/room are None).

    Partial states come out of the world model's weighting table when an
    abstract state has never been seen; they keep only the abstract features.
    """

    objects: Optional[Tuple[GameObject, ...]]
    room: Optional[int]
    abstract: Optional[AbstractState] = None

    @property
    def is_partial(self) -> bool:
        return self.objects is None

    def require_objects(self) -> Tuple[GameObject, ...]:
        if self.objects is None:
            raise PartialStateAccess("objects")
        return self.objects

    def require_room(self) -> int:
        if self.room is None:
            raise PartialStateAccess("room")
        return self.room

    def of_type(self, object_type: str) -> Iterator[GameObject]:
        return (o for o in self.require_objects() if o.object_type == object_type)

    def first(self, object_type: str) -> Optional[GameObject]:
        return next(self.of_type(object_type), None)

    @property
    def player(self) -> Optional[GameObject]:
        return self.first("player")

    def to_dict(self) -> dict:
        return {
            "room": self.room,
            "objects": None if self.objects is None else [
                [o.object_type, o.x, o.y, o.w, o.h, o.is_static] for o in self.objects],
            "abstract": None if self.abstract is None else list(self.abstract),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SymbolicState":
        objs = d.get("objects")
        abstract = d.get("abstract")
        return cls(
            objects=None if objs is None else tuple(
                GameObject(t, int(x), int(y), int(w), int(h), bool(st)) for t, x, y, w, h, st in objs),
            room=d.get("room"),
            abstract=None if abstract is None else tuple(abstract),
        )


def partial_state(abstract: Sequence[Optional[int]]) -> SymbolicState:
    return SymbolicState(objects=None, room=None, abstract=tuple(abstract))
