import numpy as np
import pytest
from conftest import GRID_WHERES, random_env, tuples_of
from hypothesis import given, settings
from hypothesis import strategies as st

from ecaif.blanket import (
    CONTROLLABLE,
    NON_CONTROLLABLE,
    Action,
    EnvironmentSpec,
    Feature,
    WhatEntry,
    build_action_space,
    build_generative_model,
    build_observation_space,
    build_state_space,
    build_transitions,
    check_transitions,
    restrict_to_agent,
    target_preferences,
)
from ecaif.errors import ConfigurationError, InvalidAction, NotAController

W = GRID_WHERES.index


def test_observation_space_two_arm(env, env_orient):
    obs = build_observation_space(env)
    assert obs.sizes == (15, 15, 15)
    assert obs.names == ("UR5e", "COBOTTA", "object")
    assert build_observation_space(env_orient).sizes == (15, 15, 15, 2)


def test_minimal_spaces():
    env = EnvironmentSpec(("w",), (WhatEntry("R", CONTROLLABLE, 0, (0,)),))
    assert build_observation_space(env).sizes == (1,)
    assert [str(a) for a in build_action_space(env)] == ["Stop(R)", "Move(R,w)"]


def test_state_space(env, env_orient):
    assert build_state_space(env).sizes == (15, 15, 15)
    assert build_state_space(env).joint_size == 3375
    assert build_state_space(env_orient).joint_size == 6750
    small = EnvironmentSpec(("w1", "w2"), (WhatEntry("R", CONTROLLABLE, 0, (0, 1)),
                                           WhatEntry("o", NON_CONTROLLABLE, 1)))
    assert set(build_state_space(small).enumerate()) == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_action_space(env):
    actions = build_action_space(env)
    assert len(actions) == 32
    assert str(actions[0]) == "Stop(UR5e)"
    assert str(actions[16]) == "Stop(COBOTTA)"
    assert all(a.actor == "UR5e" for a in list(actions)[:16])
    env3 = EnvironmentSpec(("w1", "w2", "w3"), (WhatEntry("R", CONTROLLABLE, 0, (0, 1, 2)),))
    assert [str(a) for a in build_action_space(env3)] == ["Stop(R)", "Move(R,w1)", "Move(R,w2)", "Move(R,w3)"]


def test_zero_controllables_rejected():
    with pytest.raises(ConfigurationError):
        EnvironmentSpec(("w",), (WhatEntry("o", NON_CONTROLLABLE, 0),))


@pytest.mark.parametrize("bad", [
    dict(wheres=("a", "a")),
    dict(whats=(WhatEntry("R", CONTROLLABLE, 5, (0,)),)),
    dict(whats=(WhatEntry("R", CONTROLLABLE, 0, ()),)),
    dict(features=(Feature("f", "nobody"),)),
])
def test_invalid_environment(bad):
    kwargs = dict(wheres=("a", "b"), whats=(WhatEntry("R", CONTROLLABLE, 0, (0, 1)),))
    kwargs.update(bad)
    with pytest.raises(ConfigurationError):
        EnvironmentSpec(**kwargs)


def _apply_delta(env, action, state):
    """Next joint state from delta inputs using the transition tensors."""
    out = []
    for f, (B, deps) in enumerate(build_transitions(env, action)):
        col = B[(slice(None),) + tuple(state[d] for d in deps)]
        assert col.sum() == pytest.approx(1.0)
        out.append(int(np.argmax(col)))
    return tuple(out)


def test_move_carries_object(env):
    s = (W("P7"), W("CO"), W("P7"))
    nxt = _apply_delta(env, Action("UR5e", W("P12"), "P12"), s)
    assert nxt == (W("P12"), W("CO"), W("P12"))


def test_move_alone_leaves_object(env):
    s = (W("UO"), W("CO"), W("P7"))
    assert _apply_delta(env, Action("UR5e", W("P7"), "P7"), s) == (W("P7"), W("CO"), W("P7"))


def test_out_of_reach_is_identity(env):
    maps = build_transitions(env, Action("UR5e", W("P5"), "P5"))
    stop = build_transitions(env, Action("UR5e"))
    for (b1, d1), (b2, d2) in zip(maps, stop):
        assert d1 == d2
        np.testing.assert_array_equal(b1, b2)


def test_stop_is_identity(env):
    for B, deps in build_transitions(env, Action("COBOTTA")):
        assert len(deps) == 1
        np.testing.assert_array_equal(B, np.eye(B.shape[0]))


def test_blocked_only_when_carrying_and_facing(env_orient):
    move = Action("UR5e", W("P14"), "P14")
    carrying = (W("P7"), W("CO"), W("P7"))
    alone = (W("P7"), W("CO"), W("P1"))
    assert _apply_delta(env_orient, move, carrying + (0,))[:3] == (W("P14"), W("CO"), W("P14"))
    assert _apply_delta(env_orient, move, carrying + (1,))[:3] == carrying
    assert _apply_delta(env_orient, move, alone + (1,))[:3] == (W("P14"), W("CO"), W("P1"))


def test_unknown_action(env):
    with pytest.raises(InvalidAction):
        build_transitions(env, Action("nobody", 0, "P1"))
    with pytest.raises(InvalidAction):
        build_transitions(env, Action("object", 0, "P1"))


def test_generative_model(env):
    model = build_generative_model(env, "UR5e")
    assert len(model.actions) == 32
    assert model.states.sizes == (15, 15, 15)
    assert all(np.array_equal(A, np.eye(15)) for A in model.A)
    assert [int(np.argmax(d)) for d in model.D] == [W("UO"), W("CO"), W("P7")]
    assert all(np.all(c == c[0]) for c in model.C)
    check_transitions(model)


def test_models_for_each_owner_share_structure(env):
    C = target_preferences(env, {"object": "P12"})
    m1 = build_generative_model(env, "UR5e", C)
    m2 = build_generative_model(env, "COBOTTA", C)
    assert m1.actions == m2.actions
    for a in range(len(m1.actions)):
        for (b1, d1), (b2, d2) in zip(m1.B[a], m2.B[a]):
            assert d1 == d2 and np.array_equal(b1, b2)
    for c1, c2 in zip(m1.C, m2.C):
        np.testing.assert_array_equal(c1, c2)


def test_feature_prior_uniform(env_orient):
    model = build_generative_model(env_orient, "UR5e")
    np.testing.assert_allclose(model.D[3], [0.5, 0.5])


def test_not_a_controller(env):
    with pytest.raises(NotAController):
        build_generative_model(env, "object")
    with pytest.raises(NotAController):
        restrict_to_agent(env, "object")


def test_preference_length_checked(env):
    with pytest.raises(ConfigurationError):
        build_generative_model(env, "UR5e", [np.zeros(15), np.zeros(15), np.zeros(3)])


def test_restrict_to_ur5e(env):
    r = restrict_to_agent(env, "UR5e")
    assert set(r.wheres) == {"P1", "UO", "P6", "P7", "P8", "P11", "P12", "P13"}
    assert [w.label for w in r.whats] == ["UR5e", "object"]
    assert r.what("object").initial_where == r.where_index("P7")
    assert "P12" in r.wheres and "P5" not in r.wheres
    c = target_preferences(r, {"object": "P12"})[1]
    assert c[r.where_index("P12")] == 4.0
    c = target_preferences(r, {"object": "P5"})[1]
    assert np.all(c == 0)


def test_restrict_drops_foreign_features(env_orient):
    r = restrict_to_agent(env_orient, "UR5e")
    assert r.features == () and r.blocked_rules == ()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_restrict_idempotent(seed):
    env = random_env(np.random.default_rng(seed))
    agent = env.controllables[0]
    try:
        once = restrict_to_agent(env, agent.label)
    except ConfigurationError:
        return  # agent starts in a shared cell
    assert restrict_to_agent(once, agent.label) == once


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_shape_laws(seed):
    env = random_env(np.random.default_rng(seed))
    obs = build_observation_space(env)
    states = build_state_space(env)
    assert obs.num_position_modalities == env.n
    assert all(s == env.m for s in obs.sizes[:env.n])
    assert states.joint_size == env.m ** env.n * 2 ** len(env.features)
    assert len(build_action_space(env)) == len(env.controllables) * (env.m + 1)
    if env.n * env.m <= 8:
        assert list(states.enumerate()) == tuples_of(states.sizes)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_transitions_stochastic_and_infeasible_moves_are_stops(seed):
    env = random_env(np.random.default_rng(seed))
    model = build_generative_model(env, env.controllables[0].label)
    check_transitions(model)
    for a, maps in zip(model.actions, model.B):
        if a.is_stop or a.target in env.what(a.actor).reach:
            continue
        stop = build_transitions(env, Action(a.actor))
        for (b1, d1), (b2, d2) in zip(maps, stop):
            assert d1 == d2 and np.array_equal(b1, b2)


def test_two_arm_model_transitions_stochastic(env_orient):
    check_transitions(build_generative_model(env_orient, "UR5e"))

