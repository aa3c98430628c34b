import numpy as np
import pytest

from agentowl.env.gridworld import load_config
from agentowl.env.state import GameObject, SymbolicState, roomnumber_object
from agentowl.goals import goals_from_config


def make_state(room=1, player=(16, 104), extra=()):
    objs = [GameObject("player", player[0], player[1], 8, 8)]
    objs += [GameObject(t, x, y, 8, 8, is_static=True) for t, x, y in extra]
    objs.append(roomnumber_object(room))
    return SymbolicState(tuple(objs), room)


@pytest.fixture(scope="session")
def chain6():
    return load_config("chain6")


@pytest.fixture(scope="session")
def chain6_goals(chain6):
    return goals_from_config(chain6)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
