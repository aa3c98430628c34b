import numpy as np
import pytest

from agentowl.options import (ANNEAL_SAMPLES, Executor, MixedPolicy, ScriptedPolicy, anneal_epsilon,
                              is_unstable, record_completion, sample_action)

from helpers import buffer_pairs, ctx_at, hierarchy, option, run


def test_one_primitive_per_env_step():
    ex, _, primitives = run(hierarchy())
    assert ex.step_count == len(primitives) == 6
    assert primitives == ["RIGHT"] * 6


def test_buffers_reconstruct_option_boundaries():
    opts = hierarchy()
    _, finishes, _ = run(opts)
    # o2 reaches a at x=16, then is cut off when its parent reaches b at x=32; at x=48
    # the root reaches c and cuts off both children.
    assert [(f[0], f[1], f[2], f[3]) for f in finishes] == [
        (2, 0, 16, False), (2, 16, 32, True), (1, 0, 32, False), (2, 32, 48, True), (1, 32, 48, True),
        (0, 0, 48, False)]
    assert buffer_pairs(opts[0]) == [(0, 32, 0.0), (32, 48, 10.0)]
    # Interrupted executions are not recorded as completions.
    assert opts[1].executions == 1 and opts[2].executions == 1 and opts[0].executions == 1
    assert buffer_pairs(opts[1]) == [(0, 16, 0.0), (16, 32, 10.0), (32, 48, 0.0)]
    assert [p[:2] for p in buffer_pairs(opts[2])] == [(x, x + 8) for x in range(0, 48, 8)]


def test_unstable_sub_option_contributes_nothing():
    opts = hierarchy()
    opts[1].n_samples = 100
    for k in range(100):
        opts[1].window.append(1.0 if k < 20 else 0.0)
    assert opts[1].delta == pytest.approx(0.2) and is_unstable(opts[1], 20_000, 0.5)
    run(opts)
    assert len(opts[0].learner.buffer) == 0
    assert opts[0].n_samples == 30_000
    assert len(opts[1].learner.buffer) > 0


def test_timeout_ends_execution():
    o = option(0, 2, ["LEFT"])
    o.max_t = 3
    ex = Executor({0: o})
    ctx = ctx_at(0)
    rng = np.random.default_rng(0)
    done = [ex.step(ex.states[0], ctx, lambda a: (ctx_at(0), False), rng)[1] for _ in range(3)]
    assert done == [False, False, True]
    assert o.executions == 1 and o.delta == 0.0


def test_env_timeout_forces_whole_stack():
    opts = hierarchy()
    ex = Executor(opts)
    _, done, _ = ex.step(ex.states[0], ctx_at(0), lambda a: (ctx_at(8), True), np.random.default_rng(0))
    assert done and all(ex.states[i].child is None and ex.states[i].t == 0 for i in opts)


def test_learn_false_records_nothing():
    opts = hierarchy()
    ex = Executor(opts, learn=False)
    ctx, x = ctx_at(0), 0
    for _ in range(6):
        x += 8
        ctx, done, _ = ex.step(ex.states[0], ctx, lambda a: (ctx_at(x), False), np.random.default_rng(0))
    assert done
    assert all(len(o.learner.buffer) == 0 and o.executions == 0 for o in opts.values())


def test_missing_sub_option_raises():
    from agentowl.env.gridworld import ConfigError
    ex = Executor({0: option(0, 2, [7])})
    with pytest.raises(ConfigError):
        ex.execute_one_step(ctx_at(0), ex.states[0], np.random.default_rng(0))


def test_epsilon_schedule():
    p = MixedPolicy(ScriptedPolicy(lambda c: 0), ScriptedPolicy(lambda c: 1))
    assert p.epsilon == 1.0 and ANNEAL_SAMPLES == 10_000
    assert anneal_epsilon(p, 5000) == 0.5
    assert anneal_epsilon(p, 5000) == 0.0
    assert anneal_epsilon(p, 123) == 0.0


def test_mixing_draw_per_decision():
    p = MixedPolicy(ScriptedPolicy(lambda c: 0), ScriptedPolicy(lambda c: 1), epsilon=0.3)
    rng = np.random.default_rng(0)
    picks = [sample_action(p, ctx_at(0), rng) for _ in range(4000)]
    assert abs(np.mean(picks) - 0.3) < 0.03
    with pytest.raises(ValueError):
        MixedPolicy(None, epsilon=1.5)


def test_success_window_and_mastery():
    o = option(0, 0, ["RIGHT"])
    for k in range(100):
        record_completion(o, k < 60)
    assert o.delta == 0.6 and o.mastered
    o2 = option(1, 0, ["RIGHT"])
    for k in range(100):
        record_completion(o2, k < 50)
    assert o2.delta == 0.5 and not o2.mastered
    record_completion(o2, True)  # oldest (a success) drops out
    assert o2.delta == 0.5
