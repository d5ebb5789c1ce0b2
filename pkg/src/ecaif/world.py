"""Ground-truth grid world that executes controls and emits observations."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .blanket import Action, EnvironmentSpec
from .errors import InvalidAction, InvalidFeature

EXECUTED = "executed"
NOOP_OUT_OF_REACH = "noop-out-of-reach"
NOOP_BLOCKED = "noop-blocked"
HOLD = "hold"


@dataclass(frozen=True)
class WorldState:
    positions: tuple
    features: tuple = ()
    # per what: label of the controller it travels with, or None
    carried_by: tuple = ()


@dataclass(frozen=True)
class ControlValue:
    actor: str
    target: int
    kind: str  # "move" | "hold"


@dataclass(frozen=True)
class WorldEvent:
    outcome: str
    moved: tuple = ()  # (what label, before, after)

    @property
    def is_noop(self):
        return self.outcome in (NOOP_OUT_OF_REACH, NOOP_BLOCKED)


def initial_world(env: EnvironmentSpec) -> WorldState:
    positions = tuple(w.initial_where for w in env.whats)
    world = WorldState(positions, tuple(f.initial for f in env.features), (None,) * env.n)
    return replace(world, carried_by=_claim(env, world.carried_by, positions, order=env.controllables))


def _claim(env, carried_by, positions, order):
    """Assign objects sharing a cell with a controller to that controller."""
    carried = list(carried_by)
    for ctrl in order:
        r = env.what_index(ctrl.label)
        for o in env.objects:
            i = env.what_index(o.label)
            if positions[i] == positions[r]:
                carried[i] = ctrl.label
    return tuple(carried)


def action_to_control(action: Action, env: EnvironmentSpec, world: Optional[WorldState] = None) -> ControlValue:
    try:
        actor = env.what(action.actor)
    except KeyError:
        raise InvalidAction(f"unknown actor in {action}") from None
    if not actor.controllable:
        raise InvalidAction(f"{action.actor} is not controllable")
    if action.is_stop:
        here = world.positions[env.what_index(actor.label)] if world is not None else actor.initial_where
        return ControlValue(actor.label, here, "hold")
    return ControlValue(actor.label, action.target, "move")


def feature_values(env: EnvironmentSpec, world: WorldState):
    return {f.name: world.features[i] for i, f in enumerate(env.features)}


def apply_control(world: WorldState, control: ControlValue, env: EnvironmentSpec):
    """Execute one control. Failures are reported as no-op events, never raised."""
    if control.kind == "hold":
        return world, WorldEvent(HOLD)
    actor = env.what(control.actor)
    if control.target not in actor.reach:
        return world, WorldEvent(NOOP_OUT_OF_REACH)
    r = env.what_index(actor.label)
    here = world.positions[r]
    cargo = [env.what_index(o.label) for o in env.objects if world.positions[env.what_index(o.label)] == here] \
        if env.carry else []
    if env.is_blocked(actor.label, control.target, feature_values(env, world), bool(cargo)):
        return world, WorldEvent(NOOP_BLOCKED)

    positions = list(world.positions)
    moved = []
    for i in [r] + cargo:
        positions[i] = control.target
        moved.append((env.whats[i].label, world.positions[i], control.target))
    carried = list(world.carried_by)
    for i in cargo:
        carried[i] = actor.label
    carried = _claim(env, carried, positions, order=[actor])
    new = WorldState(tuple(positions), world.features, carried)
    return new, WorldEvent(EXECUTED, tuple(moved))


def observe(world: WorldState, env: EnvironmentSpec):
    """Noiseless observation: every position index, then every feature level."""
    return list(world.positions) + list(world.features)


def set_feature(world: WorldState, env: EnvironmentSpec, feature: str, value) -> WorldState:
    try:
        i = env.feature_index(feature)
    except KeyError:
        raise InvalidFeature(f"unknown feature {feature!r}") from None
    levels = env.features[i].levels
    if isinstance(value, str):
        if value not in levels:
            raise InvalidFeature(f"{feature}: unknown level {value!r}")
        value = levels.index(value)
    if not 0 <= value < len(levels):
        raise InvalidFeature(f"{feature}: level {value} out of range")
    feats = list(world.features)
    feats[i] = int(value)
    return replace(world, features=tuple(feats))
