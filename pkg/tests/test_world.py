import numpy as np
import pytest
from conftest import GRID_WHERES, random_env
from hypothesis import given, settings
from hypothesis import strategies as st

from ecaif.blanket import Action, build_generative_model
from ecaif.errors import InvalidFeature
from ecaif.inference import predict
from ecaif.world import (
    EXECUTED,
    HOLD,
    NOOP_BLOCKED,
    NOOP_OUT_OF_REACH,
    ControlValue,
    WorldState,
    action_to_control,
    apply_control,
    initial_world,
    observe,
    set_feature,
)

W = GRID_WHERES.index


def world_at(env, ur5e, cobotta, obj, features=()):
    w = WorldState((W(ur5e), W(cobotta), W(obj)), tuple(features), (None, None, None))
    return w


def test_action_to_control(env):
    assert action_to_control(Action("UR5e", W("P12"), "P12"), env) == ControlValue("UR5e", W("P12"), "move")
    assert action_to_control(Action("COBOTTA", W("P5"), "P5"), env) == ControlValue("COBOTTA", W("P5"), "move")
    c = action_to_control(Action("COBOTTA"), env, initial_world(env))
    assert c.kind == "hold" and c.target == W("CO")


def test_carry_to_intermediate(env):
    w, ev = apply_control(world_at(env, "P7", "CO", "P7"), ControlValue("UR5e", W("Int."), "move"), env)
    assert ev.outcome == EXECUTED
    assert w.positions == (W("Int."), W("CO"), W("Int."))
    assert w.carried_by[2] == "UR5e"
    assert ("object", W("P7"), W("Int.")) in ev.moved


def test_out_of_reach(env):
    w0 = initial_world(env)
    w, ev = apply_control(w0, ControlValue("UR5e", W("P5"), "move"), env)
    assert ev.outcome == NOOP_OUT_OF_REACH and w == w0


def test_blocked_while_facing(env_orient):
    w0 = world_at(env_orient, "P7", "CO", "P7", (1,))
    w, ev = apply_control(w0, ControlValue("UR5e", W("P14"), "move"), env_orient)
    assert ev.outcome == NOOP_BLOCKED and w == w0
    w, ev = apply_control(world_at(env_orient, "P7", "CO", "P7", (0,)),
                          ControlValue("UR5e", W("P14"), "move"), env_orient)
    assert ev.outcome == EXECUTED and w.positions[2] == W("P14")


def test_hold(env):
    w0 = initial_world(env)
    w, ev = apply_control(w0, ControlValue("UR5e", W("UO"), "hold"), env)
    assert ev.outcome == HOLD and w == w0


def test_handoff_at_intermediate(env):
    w = world_at(env, "Int.", "CO", "Int.")
    w, _ = apply_control(w, ControlValue("COBOTTA", W("Int."), "move"), env)
    assert w.carried_by[2] == "COBOTTA"
    w, ev = apply_control(w, ControlValue("COBOTTA", W("P5"), "move"), env)
    assert w.positions == (W("Int."), W("P5"), W("P5"))
    assert ev.outcome == EXECUTED


def test_observe(env):
    w = initial_world(env)
    assert observe(w, env)[2] == W("P7")
    w, _ = apply_control(world_at(env, "P7", "CO", "P7"), ControlValue("UR5e", W("P12"), "move"), env)
    assert observe(w, env)[2] == W("P12")


def test_set_feature(env_orient):
    w0 = initial_world(env_orient)
    w1 = set_feature(w0, env_orient, "orientation", "facing-target")
    assert observe(w1, env_orient)[3] == 1
    assert w1.positions == w0.positions
    assert set_feature(w0, env_orient, "orientation", 0) == w0
    assert set_feature(w1, env_orient, "orientation", "facing-away") == w0
    with pytest.raises(InvalidFeature):
        set_feature(w0, env_orient, "colour", 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_control_sequences(seed):
    rng = np.random.default_rng(seed)
    env = random_env(rng)
    model = build_generative_model(env, env.controllables[0].label)
    world = initial_world(env)
    for _ in range(12):
        if env.features and rng.random() < 0.2:
            world = set_feature(world, env, "f0", int(rng.integers(2)))
        action = model.actions[int(rng.integers(len(model.actions)))]
        before = world
        world, ev = apply_control(world, action_to_control(action, env, world), env)
        if ev.is_noop:
            assert world == before
        # reach soundness
        for i, w in enumerate(env.whats):
            if w.controllable:
                assert world.positions[i] in w.reach
        # carried objects sit with their carrier
        for i, c in enumerate(world.carried_by):
            if c is not None:
                assert world.positions[i] == world.positions[env.what_index(c)]
        # model dynamics agree with the world on delta beliefs
        if ev.outcome == EXECUTED:
            b = [np.eye(s)[v] for s, v in zip(model.states.sizes, before.positions + before.features)]
            pred = predict(model, b, action)
            assert tuple(int(np.argmax(q)) for q in pred) == world.positions + world.features
