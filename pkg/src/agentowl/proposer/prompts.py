"""Prompt rendering for the sub-goal and precondition requests."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Iterable, List

from ..env.state import SymbolicState, is_roomnumber
from ..goals import GoalSpec

TEMPLATE_DIR = Path(__file__).parent / "templates"


@lru_cache(maxsize=None)
def template(name: str) -> str:
    return (TEMPLATE_DIR / f"{name}.txt").read_text()


def _fill(text: str, **fields) -> str:
    # Plain substitution: the templates contain literal parentheses and quotes, never stray braces,
    # but str.format would still choke on any brace in a substituted observation.
    for k, v in fields.items():
        text = text.replace("{" + k + "}", v)
    return text


def render_objects(s: SymbolicState, with_at: bool = True, interactions: bool = True) -> str:
    """One object per line in the prompt syntax, followed by the player's touch interactions."""
    objs = s.require_objects()
    lines = [o.describe(with_at=with_at) + "," for o in objs]
    if interactions:
        player = s.player
        for o in objs:
            if player is None or o is player or is_roomnumber(o.object_type):
                continue
            if player.overlaps(o):
                lines.append(f"Interaction -- {player.describe(with_at)} is touching {o.describe(with_at)}")
    return "\n".join(lines)


def render_goal_list(goals: Iterable[GoalSpec]) -> str:
    return "\n".join(f"- {g.name} -- Description: '{g.describe()}'" for g in goals)


def subgoal_prompt(game_name: str, states: List[SymbolicState], achieved: List[GoalSpec],
                   target: GoalSpec) -> str:
    obs = "\n\n".join(render_objects(s) for s in states)
    return _fill(template("subgoal"), game_name=game_name, cur_obs=obs,
                 achieved_goal_names_and_descriptions=render_goal_list(achieved),
                 target_goal_name=target.name, target_goal_description=target.describe())


def precondition_prompt(goal: GoalSpec, state: SymbolicState, multi_object: bool) -> str:
    if multi_object:
        return _fill(template("precondition_multi"), goal=goal.name,
                     input=render_objects(state, with_at=False, interactions=False))
    return _fill(template("precondition_single"), goal=goal.name, input=render_objects(state))
