"""Multi-room symbolic gridworld standing in for object-centric Atari.

Rooms are ASCII grids laid out left to right; an open border cell on the
left/right edge is a portal into the neighbouring room.  Objects live in a
per-room table.  A ``carryable`` object (the key) follows the player once
touched, and a door with ``requires`` blocks movement until that object is
carried.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .state import GameObject, SymbolicState, roomnumber_object

CONFIG_DIR = Path(__file__).parent / "configs"

MOVES = {
    "NOOP": (0, 0),
    "UP": (0, -1),
    "DOWN": (0, 1),
    "LEFT": (-1, 0),
    "RIGHT": (1, 0),
}


class ConfigError(ValueError):
    """Invalid environment/experiment configuration."""


@dataclass
class ObjectSpec:
    object_type: str
    cx: int
    cy: int
    w: int
    h: int
    carryable: bool = False
    requires: Optional[str] = None
    patrol: Optional[Tuple[int, int]] = None  # cell columns the object sweeps between


@dataclass
class RoomSpec:
    grid: List[str]
    objects: List[ObjectSpec] = field(default_factory=list)

    def is_wall(self, cx: int, cy: int) -> bool:
        return self.grid[cy][cx] == "#"


@dataclass
class GoalDecl:
    name: str
    object_type: str
    room: int
    anchor: Optional[Tuple[int, int]] = None
    description: str = ""


@dataclass
class EnvConfig:
    name: str
    rooms: Dict[int, RoomSpec]
    spawn: Tuple[int, int, int]  # room, x, y in pixels
    action_set: List[str]
    episode_timeout: int = 1000
    stochasticity: float = 0.0
    cell: int = 8
    player_size: Tuple[int, int] = (8, 8)
    moving_slots: Dict[str, int] = field(default_factory=lambda: {"player": 1})
    goals: List[GoalDecl] = field(default_factory=list)
    multi_object: bool = False
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.episode_timeout <= 0:
            raise ConfigError("episode_timeout must be positive")
        unknown = [a for a in self.action_set if a not in MOVES]
        if unknown:
            raise ConfigError(f"unknown actions in action_set: {unknown}")
        room, x, y = self.spawn
        if room not in self.rooms:
            raise ConfigError(f"spawn room {room} is not defined")
        spec = self.rooms[room]
        cx, cy = x // self.cell, y // self.cell
        if not (0 <= cy < len(spec.grid) and 0 <= cx < len(spec.grid[0])) or spec.is_wall(cx, cy):
            raise ConfigError(f"spawn {self.spawn} is not on a floor cell")
        for g in self.goals:
            if g.room not in self.rooms or not any(
                    o.object_type == g.object_type for o in self.rooms[g.room].objects):
                raise ConfigError(f"goal {g.name!r}: no {g.object_type} in room {g.room}")

    @property
    def width(self) -> int:
        return len(next(iter(self.rooms.values())).grid[0])

    @property
    def height(self) -> int:
        return len(next(iter(self.rooms.values())).grid)

    def with_spawn(self, room: int, x: int, y: int) -> "EnvConfig":
        import dataclasses
        return dataclasses.replace(self, spawn=(room, x, y))


def _parse_room(raw: dict) -> RoomSpec:
    grid = [line for line in raw["map"].strip("\n").splitlines()]
    width = len(grid[0])
    if any(len(line) != width for line in grid):
        raise ConfigError("room map rows must have equal length")
    objects = []
    for o in raw.get("objects", []):
        patrol = o.get("patrol")
        objects.append(ObjectSpec(
            object_type=o["type"], cx=int(o["cx"]), cy=int(o["cy"]),
            w=int(o.get("w", 8)), h=int(o.get("h", 8)),
            carryable=bool(o.get("carryable", False)), requires=o.get("requires"),
            patrol=tuple(patrol) if patrol else None))
    return RoomSpec(grid=grid, objects=objects)


def load_config(name_or_path: str) -> EnvConfig:
    """Load an environment config by bundled name (``chain6``) or by path."""
    path = Path(name_or_path)
    if not path.suffix:
        path = CONFIG_DIR / f"{name_or_path}.yaml"
    if not path.exists():
        raise ConfigError(f"no environment config {name_or_path!r}")
    raw = yaml.safe_load(path.read_text())
    try:
        rooms = {int(k): _parse_room(v) for k, v in raw["rooms"].items()}
        sp = raw["spawn"]
        goals = [GoalDecl(name=g["name"], object_type=g["object"], room=int(g["room"]),
                          anchor=tuple(g["anchor"]) if g.get("anchor") else None,
                          description=g.get("description", ""))
                 for g in raw.get("goals", [])]
        return EnvConfig(
            name=raw["name"], rooms=rooms, spawn=(int(sp["room"]), int(sp["x"]), int(sp["y"])),
            action_set=list(raw.get("actions", list(MOVES))),
            episode_timeout=int(raw.get("episode_timeout", 1000)),
            stochasticity=float(raw.get("stochasticity", 0.0)),
            cell=int(raw.get("cell", 8)),
            player_size=tuple(raw.get("player_size", (8, 8))),
            moving_slots=dict(raw.get("moving", {"player": 1})),
            goals=goals,
            multi_object=bool(raw.get("multi_object", False)),
            extras=dict(raw.get("extras", {})),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc}") from None


class GridWorld:
    """One environment instance; not shared across threads."""

    def __init__(self, config: EnvConfig, seed: Optional[int] = None):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self._steps = 0
        self._room = 0
        self._pcx = self._pcy = 0
        self._carrying: set = set()
        self._state: Optional[SymbolicState] = None

    @property
    def actions(self) -> List[str]:
        return self.config.action_set

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def state(self) -> SymbolicState:
        if self._state is None:
            raise RuntimeError("environment has not been reset")
        return self._state

    def reset(self) -> SymbolicState:
        room, x, y = self.config.spawn
        c = self.config.cell
        self._room, self._pcx, self._pcy = room, x // c, y // c
        self._steps = 0
        self._carrying = set()
        self._state = self._observe()
        return self._state

    def step(self, action: str) -> Tuple[SymbolicState, bool]:
        if action not in self.config.action_set:
            raise ConfigError(f"unknown action {action!r}")
        if self._state is None:
            raise RuntimeError("environment has not been reset")
        if self.config.stochasticity > 0 and self.rng.random() < self.config.stochasticity:
            action = self.config.action_set[self.rng.integers(len(self.config.action_set))]
        dx, dy = MOVES[action]
        self._move(dx, dy)
        self._steps += 1
        self._state = self._observe()
        return self._state, self._steps >= self.config.episode_timeout

    def _move(self, dx: int, dy: int) -> None:
        if dx == 0 and dy == 0:
            return
        spec = self.config.rooms[self._room]
        nx, ny = self._pcx + dx, self._pcy + dy
        if nx < 0 or nx >= self.config.width:
            # Side portal: leaving through an open border cell enters the neighbouring room.
            target = self._room - 1 if nx < 0 else self._room + 1
            if target in self.config.rooms:
                ex = self.config.width - 1 if nx < 0 else 0
                if not self.config.rooms[target].is_wall(ex, ny):
                    self._room, self._pcx, self._pcy = target, ex, ny
            return
        if ny < 0 or ny >= self.config.height or spec.is_wall(nx, ny):
            return
        for o in spec.objects:
            if o.requires and (o.cx, o.cy) == (nx, ny) and o.requires not in self._carrying:
                return
        self._pcx, self._pcy = nx, ny
        for o in spec.objects:
            if o.carryable and (o.cx, o.cy) == (nx, ny):
                self._carrying.add(o.object_type)

    def _patrol_x(self, o: ObjectSpec) -> int:
        lo, hi = o.patrol
        span = hi - lo
        if span <= 0:
            return lo
        phase = self._steps % (2 * span)
        return lo + (phase if phase <= span else 2 * span - phase)

    def _observe(self) -> SymbolicState:
        c = self.config.cell
        pw, ph = self.config.player_size
        player = GameObject("player", self._pcx * c, self._pcy * c, pw, ph)
        moving: Dict[str, List[GameObject]] = {"player": [player]}
        static: List[GameObject] = []
        for o in self.config.rooms[self._room].objects:
            if o.carryable and o.object_type in self._carrying:
                continue
            cx = self._patrol_x(o) if o.patrol else o.cx
            obj = GameObject(o.object_type, cx * c, o.cy * c, o.w, o.h,
                             is_static=o.object_type not in self.config.moving_slots)
            (moving.setdefault(o.object_type, []) if not obj.is_static else static).append(obj)
        for t in sorted(self._carrying):
            moving.setdefault(t, []).append(GameObject(t, player.x, player.y, pw, ph))
        ordered: List[GameObject] = []
        for t in self.config.moving_slots:
            ordered.extend(moving.pop(t, []))
        for t in sorted(moving):
            ordered.extend(moving[t])
        ordered.extend(static)
        ordered.append(roomnumber_object(self._room))
        return SymbolicState(objects=tuple(ordered), room=self._room)

    def render_ascii(self) -> str:
        spec = self.config.rooms[self._room]
        rows = [list(r) for r in spec.grid]
        c = self.config.cell
        for o in self.state.require_objects():
            if o.object_type.startswith("roomnumber"):
                continue
            cx, cy = o.x // c, o.y // c
            if 0 <= cy < len(rows) and 0 <= cx < len(rows[0]):
                rows[cy][cx] = o.object_type[0].upper()
        rows[self._pcy][self._pcx] = "@"
        return f"room {self._room}\n" + "\n".join("".join(r) for r in rows)


def bundled_configs() -> Sequence[str]:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.yaml"))
