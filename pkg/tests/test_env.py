import numpy as np
import pytest

from agentowl.env.gridworld import ConfigError, GridWorld, bundled_configs, load_config
from agentowl.env.state import PartialStateAccess, partial_state


def test_bundled_configs_load():
    assert {"chain6", "oneroom"} <= set(bundled_configs())
    for name in bundled_configs():
        cfg = load_config(name)
        assert cfg.goals


def test_reset_places_player_at_spawn(chain6):
    env = GridWorld(chain6)
    s = env.reset()
    assert s.room == 1
    assert (s.player.x, s.player.y) == (16, 104)
    assert s.objects[-1].object_type == "roomnumber_+1"


def test_walls_block_and_steps_count(chain6):
    env = GridWorld(chain6)
    env.reset()
    s, _ = env.step("DOWN")  # row below the spawn corridor is wall
    assert (s.player.x, s.player.y) == (16, 104)
    s, _ = env.step("RIGHT")
    assert s.player.x == 24
    assert env.steps == 2


def test_side_portal_changes_room(chain6):
    env = GridWorld(chain6)
    env.reset()
    for _ in range(3):
        s, _ = env.step("LEFT")
    assert s.room == 0
    assert s.player.x == 8 * 19


def test_locked_door_needs_key(chain6):
    env = GridWorld(chain6)
    env.reset()
    path = ["RIGHT"] * 6 + ["UP"] * 3
    for a in path:
        s, _ = env.step(a)
    for _ in range(9):
        s, _ = env.step("RIGHT")
    assert s.player.x // 8 == 16  # stopped in front of the door
    for _ in range(15):
        s, _ = env.step("LEFT")
    s, _ = env.step("UP")
    for _ in range(10):
        s, _ = env.step("LEFT")
    assert any(o.object_type == "key" for o in s.objects)
    key = next(s.of_type("key"))
    assert (key.x, key.y) == (s.player.x, s.player.y)  # carried


def test_timeout_flag(chain6):
    cfg = load_config("oneroom")
    env = GridWorld(cfg)
    env.reset()
    flags = [env.step("NOOP")[1] for _ in range(cfg.episode_timeout)]
    assert not any(flags[:-1]) and flags[-1]


def test_unknown_action_rejected(chain6):
    env = GridWorld(chain6)
    env.reset()
    with pytest.raises(ConfigError):
        env.step("JUMP")


def test_deterministic_given_seed(chain6):
    a, b = GridWorld(chain6, seed=3), GridWorld(chain6, seed=3)
    a.reset(), b.reset()
    rng = np.random.default_rng(0)
    for _ in range(50):
        act = chain6.action_set[int(rng.integers(5))]
        assert a.step(act) == b.step(act)


def test_bad_config_rejected(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: bad\ncell: 8\nepisode_timeout: 10\nspawn: {room: 5, x: 0, y: 0}\n"
                 "rooms:\n  0:\n    map: |\n      ...\n    objects: []\ngoals: []\n")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_partial_state_access_raises():
    s = partial_state((1, None))
    assert s.is_partial
    with pytest.raises(PartialStateAccess):
        s.require_objects()
    with pytest.raises(PartialStateAccess):
        s.require_room()


def test_state_dict_round_trip(chain6):
    from agentowl.env.state import SymbolicState
    s = GridWorld(chain6).reset()
    assert SymbolicState.from_dict(s.to_dict()) == s
