"""Fixed-size numeric encoding of object lists for the Q-networks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .state import AbstractState, SymbolicState

WAVELENGTHS = (16.0, 256.0)
ABSENT_COORD = -1
ABSTRACT_REPEAT = 4
UNKNOWN_ABSTRACT = 0.5


class EncodingError(ValueError):
    pass


def positional(value: float) -> np.ndarray:
    """sin/cos pairs at each wavelength: 4 numbers per coordinate."""
    out = np.empty(2 * len(WAVELENGTHS))
    for k, lam in enumerate(WAVELENGTHS):
        angle = 2.0 * np.pi * value / lam
        out[2 * k] = np.sin(angle)
        out[2 * k + 1] = np.cos(angle)
    return out


_ABSENT_BLOCK = np.concatenate([positional(ABSENT_COORD), positional(ABSENT_COORD)])


@dataclass
class EncodedObservation:
    vector: np.ndarray
    layout: Dict[str, Tuple[int, int]]


class ObservationEncoder:
    """Encodes a stack of ``frame_stack`` states plus their goal abstractions.

    Per frame: 8 numbers for each moving-object slot (type-major, then
    instance), then each abstract feature repeated 4 times.  Static object
    types are skipped entirely.
    """

    def __init__(self, moving_slots: Dict[str, int], n_goals: int, frame_stack: int = 4):
        self.moving_slots = dict(moving_slots)
        self.n_goals = n_goals
        self.frame_stack = frame_stack
        self.slots: List[Tuple[str, int]] = [
            (t, i) for t, n in self.moving_slots.items() for i in range(n)]
        self.frame_dim = 8 * len(self.slots) + ABSTRACT_REPEAT * n_goals
        self.dim = frame_stack * self.frame_dim

    def layout(self) -> Dict[str, Tuple[int, int]]:
        out = {}
        for f in range(self.frame_stack):
            base = f * self.frame_dim
            for k, (t, i) in enumerate(self.slots):
                out[f"frame{f}/{t}{i}"] = (base + 8 * k, base + 8 * k + 8)
            start = base + 8 * len(self.slots)
            for g in range(self.n_goals):
                out[f"frame{f}/goal{g}"] = (start + 4 * g, start + 4 * g + 4)
        return out

    def encode_frame(self, s: SymbolicState, abstract: AbstractState) -> np.ndarray:
        out = np.empty(self.frame_dim)
        counts: Dict[str, List] = {t: [] for t in self.moving_slots}
        if not s.is_partial:
            for o in s.objects:
                if o.is_static or o.object_type not in counts:
                    continue
                counts[o.object_type].append(o)
        for t, objs in counts.items():
            if len(objs) > self.moving_slots[t]:
                raise EncodingError(
                    f"{len(objs)} {t} objects exceed the {self.moving_slots[t]} configured slots")
        for k, (t, i) in enumerate(self.slots):
            objs = counts[t]
            if i < len(objs):
                block = np.concatenate([positional(objs[i].x), positional(objs[i].y)])
            else:
                block = _ABSENT_BLOCK
            out[8 * k:8 * k + 8] = block
        start = 8 * len(self.slots)
        if len(abstract) != self.n_goals:
            raise EncodingError(f"abstract state has {len(abstract)} entries, expected {self.n_goals}")
        for g, bit in enumerate(abstract):
            out[start + 4 * g:start + 4 * g + 4] = UNKNOWN_ABSTRACT if bit is None else float(bit)
        return out

    def encode(self, history: Sequence[SymbolicState],
               abstracts: Sequence[AbstractState]) -> EncodedObservation:
        """``history``/``abstracts`` run oldest to newest; short histories repeat the oldest frame."""
        if not history:
            raise EncodingError("empty history")
        if len(history) != len(abstracts):
            raise EncodingError("history and abstracts differ in length")
        frames = list(zip(history, abstracts))[-self.frame_stack:]
        frames = [frames[0]] * (self.frame_stack - len(frames)) + frames
        vec = np.concatenate([self.encode_frame(s, f) for s, f in frames]).astype(np.float32)
        return EncodedObservation(vector=vec, layout=self.layout())


class FrameStack:
    """Rolling history of (state, abstract, encoded frame) for one environment."""

    def __init__(self, encoder: ObservationEncoder):
        self.encoder = encoder
        self._frames: List[np.ndarray] = []

    def reset(self, s: SymbolicState, abstract: AbstractState) -> np.ndarray:
        frame = self.encoder.encode_frame(s, abstract).astype(np.float32)
        self._frames = [frame] * self.encoder.frame_stack
        return self.vector()

    def push(self, s: SymbolicState, abstract: AbstractState) -> np.ndarray:
        self._frames = self._frames[1:] + [self.encoder.encode_frame(s, abstract).astype(np.float32)]
        return self.vector()

    def vector(self) -> np.ndarray:
        return np.concatenate(self._frames)


def encode_single(encoder: ObservationEncoder, s: SymbolicState,
                  abstract: AbstractState, prev: Optional[np.ndarray] = None) -> np.ndarray:
    """Encode ``s`` as the newest frame on top of a previous stacked vector (or a fresh stack)."""
    frame = encoder.encode_frame(s, abstract).astype(np.float32)
    if prev is None:
        return np.tile(frame, encoder.frame_stack)
    return np.concatenate([prev[encoder.frame_dim:], frame])
