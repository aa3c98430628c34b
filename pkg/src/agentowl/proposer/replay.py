"""Replays recorded (or hand-authored) replies instead of calling a live endpoint."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Dict, Tuple

from .base import Proposer
from .llm import LLMProposer

FIXTURE_DIR = Path(__file__).parent / "fixtures"

_SUBGOAL_TARGET = re.compile(r"achieve the target goal of '([^']+)'")
_PRECOND_TARGET = re.compile(r"achieve the goal of '([^']+)'\.")


def load_replies(path) -> Dict[Tuple[str, str], list]:
    replies: Dict[Tuple[str, str], list] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rec = json.loads(line)
        replies.setdefault((rec["mode"], rec["target"]), []).append(rec["reply"])
    return replies


class ReplayProposer(LLMProposer):
    """Looks the reply up by (request mode, target goal name) parsed back out of the prompt.

    Each key may hold several replies; successive requests cycle through them.
    Prompts without a recorded reply fall through to the fallback proposer.
    """

    kind = "replay"

    def __init__(self, path, fallback: Proposer, max_retries: int = 1):
        self.replies = load_replies(path)
        self.cursor: Dict[Tuple[str, str], int] = {}
        super().__init__(self._lookup, fallback, max_retries)

    def _lookup(self, prompt: str) -> str:
        m = _SUBGOAL_TARGET.search(prompt)
        key = ("subgoal", m.group(1)) if m else None
        if key is None:
            m = _PRECOND_TARGET.search(prompt)
            key = ("precondition", m.group(1)) if m else None
        if key is None or key not in self.replies:
            return ""
        i = self.cursor.get(key, 0)
        self.cursor[key] = i + 1
        options = self.replies[key]
        return options[i % len(options)]


def default_fixture(env_name: str) -> Path:
    return FIXTURE_DIR / f"{env_name}_replies.jsonl"
