from .base import ProposalError, ProposalRequest, Proposer, one_state_per_room
from .llm import ChatClient, LLMProposer, parse_subgoal_reply
from .replay import ReplayProposer, default_fixture
from .stub import RoomGraph, StubProposer, candidate_facts


def make_proposer(kind: str, config, goals, endpoint: str = "", model: str = "",
                  temperature: float = 0.0, max_retries: int = 3, replay_path=None) -> Proposer:
    stub = StubProposer(config, goals)
    if kind == "stub":
        return stub
    if kind == "replay":
        return ReplayProposer(replay_path or default_fixture(config.name), stub)
    if kind == "llm":
        if not endpoint or not model:
            raise ValueError("the llm proposer needs an endpoint and a model name")
        client = ChatClient(endpoint, model, temperature=temperature)
        return LLMProposer(client.complete, stub, max_retries)
    raise ValueError(f"unknown proposer backend {kind!r}")
