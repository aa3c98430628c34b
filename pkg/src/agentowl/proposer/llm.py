"""Chat-completion proposer with retry and fallback to the offline stub."""

from __future__ import annotations

import logging
import os
import re
from typing import Callable, List, Optional

import httpx

from ..worldmodel.preconditions import Precondition, parse_precondition_list
from .base import (ProposalError, ProposalRequest, Proposer, allowed_kinds, max_preconditions,
                   one_state_per_room)
from .prompts import precondition_prompt, subgoal_prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "AGENTOWL_LLM_API_KEY"
_STONE = re.compile(r"Possible stepping stone 1\s*:(.*)$", re.I | re.M)
_DECORATION = " \t*'\"`.,;:"


def parse_subgoal_reply(text: str, achieved) -> Optional[int]:
    """Goal index named on the last 'Possible stepping stone 1:' line, or None."""
    names = {g.name.lower(): g.id for g in achieved}
    for m in reversed(list(_STONE.finditer(text))):
        name = m.group(1).strip(_DECORATION).lower()
        if name in names:
            return names[name]
    return None


class ChatClient:
    """Minimal JSON chat-completion client."""

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None,
                 temperature: float = 0.0, timeout: float = 60.0,
                 transport: Optional[httpx.BaseTransport] = None):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.temperature = temperature
        self.http = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model, "temperature": self.temperature,
                "messages": [{"role": "user", "content": prompt}]}
        r = self.http.post(f"{self.endpoint}/chat/completions", json=body, headers=headers)
        r.raise_for_status()
        try:
            return r.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProposalError(f"malformed completion response: {exc}") from None


class LLMProposer(Proposer):
    kind = "llm"

    def __init__(self, complete: Callable[[str], str], fallback: Proposer, max_retries: int = 3):
        self.complete = complete
        self.fallback = fallback
        self.max_retries = max_retries
        self.log: List[dict] = []
        self.fallbacks = 0

    def _ask(self, prompt: str, parse: Callable):
        for attempt in range(self.max_retries):
            try:
                reply = self.complete(prompt)
            except (httpx.HTTPError, ProposalError) as exc:
                log.warning("proposal request failed (attempt %d): %s", attempt + 1, exc)
                self.log.append({"prompt": prompt, "error": str(exc)})
                continue
            self.log.append({"prompt": prompt, "reply": reply})
            out = parse(reply)
            if out is not None and out != []:
                return out
            log.warning("unparseable proposal reply (attempt %d)", attempt + 1)
        self.fallbacks += 1
        return None

    def propose_subgoal(self, req: ProposalRequest) -> int:
        if not req.achieved:
            raise ProposalError("no achieved goals to build on")
        prompt = subgoal_prompt(req.game_name, one_state_per_room(req.sample_states),
                                req.achieved, req.target)
        out = self._ask(prompt, lambda text: parse_subgoal_reply(text, req.achieved))
        return self.fallback.propose_subgoal(req) if out is None else out

    def propose_preconditions(self, req: ProposalRequest) -> List[Precondition]:
        if not req.successes:
            return self.fallback.propose_preconditions(req)
        prompt = precondition_prompt(req.target, req.successes[0], req.multi_object)
        cap = max_preconditions(req.multi_object)
        kinds = allowed_kinds(req.multi_object)
        out = self._ask(prompt, lambda text: parse_precondition_list(text, kinds)[:cap])
        return self.fallback.propose_preconditions(req) if out is None else out

    @property
    def stats(self) -> dict:
        return {"requests": len(self.log), "fallbacks": self.fallbacks}
