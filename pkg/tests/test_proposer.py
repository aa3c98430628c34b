import json
from pathlib import Path

import httpx
import pytest

from agentowl.env.gridworld import GridWorld
from agentowl.proposer import (ChatClient, LLMProposer, ProposalError, ProposalRequest, ReplayProposer,
                               StubProposer, candidate_facts, default_fixture, make_proposer,
                               one_state_per_room, parse_subgoal_reply)
from agentowl.proposer.prompts import precondition_prompt, subgoal_prompt
from agentowl.worldmodel.preconditions import AnyObjTypeTouching, RoomNumberExist

from conftest import make_state

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


@pytest.fixture
def spawn(chain6):
    return GridWorld(chain6).reset()


@pytest.fixture
def stub(chain6, chain6_goals):
    return StubProposer(chain6, chain6_goals)


def test_golden_prompts(spawn, chain6_goals):
    g = chain6_goals
    assert subgoal_prompt("chain6", [spawn], list(g[:2]), g[2]) == (GOLDEN / "subgoal_door.txt").read_text()
    assert precondition_prompt(g[1], spawn, False) == (GOLDEN / "precondition_single_key.txt").read_text()
    assert precondition_prompt(g[1], spawn, True) == (GOLDEN / "precondition_multi_key.txt").read_text()


def test_prompts_have_no_unfilled_fields(spawn, chain6_goals):
    for text in (subgoal_prompt("chain6", [spawn], list(chain6_goals[:3]), chain6_goals[3]),
                 precondition_prompt(chain6_goals[3], spawn, False)):
        assert "{" not in text and "}" not in text


@pytest.mark.parametrize("reply,expected", [
    ("...reasoning...\nPossible stepping stone 1: key", 1),
    ("Possible stepping stone 1: **ladder**\n", 0),
    ("Possible stepping stone 1: 'Key'.", 1),
    ("Possible stepping stone 1: ladder\nOn reflection:\nPossible stepping stone 1: key", 1),
    ("Possible stepping stone 1: torch", None),
    ("no idea", None),
])
def test_parse_subgoal_reply(chain6_goals, reply, expected):
    assert parse_subgoal_reply(reply, chain6_goals[:2]) == expected


def test_one_state_per_room():
    a, b, c = make_state(2, (0, 0)), make_state(1, (8, 0)), make_state(1, (16, 0))
    assert one_state_per_room([a, b, c]) == [b, a]


def test_stub_is_deterministic_and_respects_exclusions(stub, chain6_goals):
    req = ProposalRequest(chain6_goals[2], list(chain6_goals[:2]))
    assert stub.propose_subgoal(req) == stub.propose_subgoal(req) == 0
    req.exclude = (0,)
    assert stub.propose_subgoal(req) == 1
    req.exclude = (0, 1)
    assert stub.propose_subgoal(req) == 0
    with pytest.raises(ProposalError):
        stub.propose_subgoal(ProposalRequest(chain6_goals[1], []))


def test_stub_prefers_same_room_then_walking_distance(stub, chain6_goals):
    names = [g.name for g in chain6_goals]
    ranked = stub.rank_subgoals(ProposalRequest(chain6_goals[5], list(chain6_goals[:5])))
    assert [names[i] for i in ranked] == ["platform", "rope", "door", "ladder", "key"]


def test_stub_preconditions_rank_common_facts(stub, chain6_goals):
    s1 = make_state(1, (64, 96), [("ladder", 64, 96)])
    s2 = make_state(1, (64, 96), [("ladder", 64, 96), ("bat", 64, 96)])
    out = stub.propose_preconditions(ProposalRequest(chain6_goals[1], successes=[s1, s2], mode="precondition"))
    assert out[0] == RoomNumberExist(1) and out[1] == AnyObjTypeTouching("player", "ladder")
    assert len(out) <= 4
    assert stub.propose_preconditions(ProposalRequest(chain6_goals[1], mode="precondition")) == []


def test_candidate_facts_multi_object():
    s = make_state(2, (0, 0), [("rope", 40, 40), ("bat", 40, 40)])
    facts = {p.describe() for p in candidate_facts(s, multi_object=True)}
    assert any("rope" in f and "bat" in f for f in facts)


def test_llm_retries_then_succeeds(stub, spawn, chain6_goals):
    replies = iter(["garbage", "Possible stepping stone 1: key"])
    p = LLMProposer(lambda prompt: next(replies), stub, max_retries=3)
    req = ProposalRequest(chain6_goals[2], list(chain6_goals[:2]), [spawn])
    assert p.propose_subgoal(req) == 1
    assert p.stats == {"requests": 2, "fallbacks": 0}


def test_llm_falls_back_to_stub(stub, spawn, chain6_goals):
    def boom(prompt):
        raise ProposalError("down")
    p = LLMProposer(boom, stub, max_retries=2)
    req = ProposalRequest(chain6_goals[2], list(chain6_goals[:2]), [spawn])
    assert p.propose_subgoal(req) == stub.propose_subgoal(req)
    assert p.stats == {"requests": 2, "fallbacks": 1}


def test_llm_precondition_reply_is_capped(stub, spawn, chain6_goals):
    reply = "\n".join(f"{i}. AnyObjTypeTouching: The player object touches a {t} object"
                      for i, t in enumerate(["ladder", "rope", "bat", "door", "key"], 1))
    p = LLMProposer(lambda prompt: reply, stub)
    out = p.propose_preconditions(ProposalRequest(chain6_goals[1], successes=[spawn], mode="precondition"))
    assert len(out) == 4 and out[0] == AnyObjTypeTouching("player", "ladder")


def test_chat_client_over_mock_transport():
    seen = []

    def handler(request: httpx.Request):
        seen.append(request)
        if len(seen) == 1:
            return httpx.Response(500)
        return httpx.Response(200, json={"choices": [{"message": {"content": "Possible stepping stone 1: key"}}]})

    client = ChatClient("http://llm.test/v1/", "m", api_key="k", transport=httpx.MockTransport(handler))
    with pytest.raises(httpx.HTTPStatusError):
        client.complete("hello")
    assert client.complete("hello") == "Possible stepping stone 1: key"
    body = json.loads(seen[-1].content)
    assert seen[-1].url == "http://llm.test/v1/chat/completions"
    assert seen[-1].headers["Authorization"] == "Bearer k"
    assert body["messages"] == [{"role": "user", "content": "hello"}] and body["model"] == "m"


def test_chat_client_malformed_response():
    client = ChatClient("http://llm.test", "m", api_key="",
                        transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"x": 1})))
    with pytest.raises(ProposalError):
        client.complete("hi")


def test_replay_fixture(chain6, chain6_goals, spawn):
    p = make_proposer("replay", chain6, chain6_goals)
    assert isinstance(p, ReplayProposer) and default_fixture("chain6").exists()
    names = [g.name for g in chain6_goals]
    picks = [names[p.propose_subgoal(ProposalRequest(chain6_goals[i], list(chain6_goals[:i]), [spawn]))]
             for i in range(1, 6)]
    assert picks == ["ladder", "key", "door", "rope", "platform"]
    pre = p.propose_preconditions(ProposalRequest(chain6_goals[1], successes=[spawn], mode="precondition"))
    assert pre and all(x.kind in ("AnyObjTypeTouching", "SpecificObjTouching") for x in pre)


def test_make_proposer_validation(chain6, chain6_goals):
    with pytest.raises(ValueError):
        make_proposer("llm", chain6, chain6_goals)
    with pytest.raises(ValueError):
        make_proposer("oracle", chain6, chain6_goals)
