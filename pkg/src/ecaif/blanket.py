"""Environment-centric Markov blanket construction.

An :class:`EnvironmentSpec` lists every observable location (``wheres``)
and every entity (``whats``) that moves between them. From it this module
derives the observation modalities, the factored hidden-state space, the
action set and one generative model per controllable entity. Nothing here
treats any entity as privileged: every model sees every entity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidAction, NotAController
from .maths import NORM_TOL

CONTROLLABLE = "controllable"
NON_CONTROLLABLE = "non-controllable"


@dataclass(frozen=True)
class WhatEntry:
    label: str
    kind: str
    initial_where: int
    reach: tuple = ()

    @property
    def controllable(self) -> bool:
        return self.kind == CONTROLLABLE


@dataclass(frozen=True)
class Feature:
    """Binary (or small categorical) observable attribute of one entity."""

    name: str
    attached_to: str
    levels: tuple = ("off", "on")
    initial: int = 0


@dataclass(frozen=True)
class BlockedRule:
    """``actor`` cannot move to ``destination`` while ``feature == value``.

    With ``carrying_only`` the rule applies only when the actor shares its
    cell with a non-controllable entity (i.e. would carry it).
    """

    actor: str
    destination: int
    feature: str
    value: int
    carrying_only: bool = False


@dataclass(frozen=True)
class EnvironmentSpec:
    wheres: tuple
    whats: tuple
    features: tuple = ()
    blocked_rules: tuple = ()
    carry: bool = True
    # optional (label, row, col) placement of wheres, used only for rendering
    layout: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "wheres", tuple(self.wheres))
        object.__setattr__(self, "whats", tuple(self.whats))
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "blocked_rules", tuple(self.blocked_rules))
        if self.layout is not None:
            object.__setattr__(self, "layout", tuple(tuple(x) for x in self.layout))
        self._validate()

    def _validate(self):
        m = len(self.wheres)
        if m < 1:
            raise ConfigurationError("at least one where is required")
        if len(set(self.wheres)) != m:
            raise ConfigurationError(f"where labels are not unique: {self.wheres}")
        labels = [w.label for w in self.whats]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"what labels are not unique: {labels}")
        if not any(w.controllable for w in self.whats):
            raise ConfigurationError("at least one controllable what is required")
        for w in self.whats:
            if w.kind not in (CONTROLLABLE, NON_CONTROLLABLE):
                raise ConfigurationError(f"{w.label}: unknown kind {w.kind!r}")
            if not 0 <= w.initial_where < m:
                raise ConfigurationError(f"{w.label}: initial where {w.initial_where} out of range")
            if any(not 0 <= r < m for r in w.reach):
                raise ConfigurationError(f"{w.label}: reach index out of range")
            if w.controllable and not w.reach:
                raise ConfigurationError(f"{w.label}: controllable what needs a non-empty reach")
            if w.controllable and w.initial_where not in w.reach:
                raise ConfigurationError(f"{w.label}: initial where lies outside its reach")
            if not w.controllable and w.reach:
                raise ConfigurationError(f"{w.label}: non-controllable what cannot have a reach")
        fnames = [f.name for f in self.features]
        if len(set(fnames)) != len(fnames):
            raise ConfigurationError(f"feature names are not unique: {fnames}")
        for f in self.features:
            if f.attached_to not in labels:
                raise ConfigurationError(f"feature {f.name}: unknown what {f.attached_to!r}")
            if len(f.levels) < 2 or not 0 <= f.initial < len(f.levels):
                raise ConfigurationError(f"feature {f.name}: bad levels/initial value")
        for r in self.blocked_rules:
            if r.actor not in labels or not self.what(r.actor).controllable:
                raise ConfigurationError(f"blocked rule: {r.actor!r} is not a controllable what")
            if not 0 <= r.destination < m:
                raise ConfigurationError(f"blocked rule: destination {r.destination} out of range")
            if r.feature not in fnames:
                raise ConfigurationError(f"blocked rule: unknown feature {r.feature!r}")
            if not 0 <= r.value < len(self.feature(r.feature).levels):
                raise ConfigurationError(f"blocked rule: bad value for {r.feature}")

    # lookups
    @property
    def m(self) -> int:
        return len(self.wheres)

    @property
    def n(self) -> int:
        return len(self.whats)

    @property
    def controllables(self):
        return [w for w in self.whats if w.controllable]

    @property
    def objects(self):
        return [w for w in self.whats if not w.controllable]

    def what(self, label):
        for w in self.whats:
            if w.label == label:
                return w
        raise KeyError(label)

    def what_index(self, label) -> int:
        for i, w in enumerate(self.whats):
            if w.label == label:
                return i
        raise KeyError(label)

    def where_index(self, label) -> int:
        try:
            return self.wheres.index(label)
        except ValueError:
            raise KeyError(label) from None

    def feature(self, name):
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def feature_index(self, name) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def rules_for(self, actor, destination):
        return [r for r in self.blocked_rules if r.actor == actor and r.destination == destination]

    def is_blocked(self, actor, destination, feature_values, carrying) -> bool:
        """Whether any rule forbids ``actor`` entering ``destination``.

        ``feature_values`` maps feature name to its current level index.
        """
        for r in self.rules_for(actor, destination):
            if feature_values[r.feature] != r.value:
                continue
            if r.carrying_only and not carrying:
                continue
            return True
        return False


@dataclass(frozen=True)
class ObservationSpace:
    names: tuple
    sizes: tuple

    @property
    def num_position_modalities(self):
        return sum(1 for n in self.names if not n.startswith("feature:"))


@dataclass(frozen=True)
class StateSpace:
    names: tuple
    sizes: tuple

    @property
    def joint_size(self) -> int:
        return int(np.prod(self.sizes, dtype=np.int64))

    def enumerate(self):
        """Joint states as index tuples, in row-major order."""
        return itertools.product(*(range(s) for s in self.sizes))


@dataclass(frozen=True)
class Action:
    actor: str
    target: Optional[int] = None
    target_label: Optional[str] = None

    @property
    def is_stop(self) -> bool:
        return self.target is None

    def __str__(self):
        if self.is_stop:
            return f"Stop({self.actor})"
        return f"Move({self.actor},{self.target_label})"


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, i):
        return self.actions[i]

    def index(self, action) -> int:
        if isinstance(action, str):
            for i, a in enumerate(self.actions):
                if str(a) == action:
                    return i
            raise InvalidAction(f"unknown action {action!r}")
        try:
            return self.actions.index(action)
        except ValueError:
            raise InvalidAction(f"unknown action {action}") from None

    def labels(self):
        return [str(a) for a in self.actions]


def build_observation_space(env: EnvironmentSpec) -> ObservationSpace:
    names = [w.label for w in env.whats] + [f"feature:{f.name}" for f in env.features]
    sizes = [env.m] * env.n + [len(f.levels) for f in env.features]
    return ObservationSpace(tuple(names), tuple(sizes))


def build_state_space(env: EnvironmentSpec) -> StateSpace:
    names = [w.label for w in env.whats] + [f"feature:{f.name}" for f in env.features]
    sizes = [env.m] * env.n + [len(f.levels) for f in env.features]
    return StateSpace(tuple(names), tuple(sizes))


def build_action_space(env: EnvironmentSpec) -> ActionSpace:
    """Stop then Move to every where, for each controllable what in order."""
    ctrl = env.controllables
    if not ctrl:
        raise ConfigurationError("no controllable whats")
    actions = []
    for w in ctrl:
        actions.append(Action(w.label))
        actions.extend(Action(w.label, j, label) for j, label in enumerate(env.wheres))
    return ActionSpace(tuple(actions))


def _identity_maps(sizes):
    return tuple((np.eye(s), (f,)) for f, s in enumerate(sizes))


def build_transitions(env: EnvironmentSpec, action: Action):
    """Per-factor transition maps for one action.

    Returns a tuple with one ``(B, deps)`` pair per state factor. ``B`` has
    shape ``(size_f, *[size_d for d in deps])`` and ``B[:, *cfg]`` is the
    distribution of factor ``f`` at the next step given the current values of
    the dependency factors. ``deps[0]`` is always ``f`` itself.
    """
    sizes = build_state_space(env).sizes
    stops = _identity_maps(sizes)
    if not isinstance(action, Action):
        raise InvalidAction(f"not an action: {action!r}")
    try:
        actor = env.what(action.actor)
    except KeyError:
        raise InvalidAction(f"unknown actor in {action}") from None
    if not actor.controllable:
        raise InvalidAction(f"{action.actor} is not controllable")
    if action.is_stop:
        return stops
    if not 0 <= action.target < env.m:
        raise InvalidAction(f"target out of range in {action}")
    if action.target not in actor.reach:
        return stops

    dest = action.target
    r = env.what_index(actor.label)
    rules = env.rules_for(actor.label, dest)
    feat_deps = sorted({env.n + env.feature_index(rule.feature) for rule in rules})
    obj_idx = [env.what_index(o.label) for o in env.objects] if env.carry else []
    needs_carry = any(rule.carrying_only for rule in rules)

    def feature_values(cfg_map):
        return {env.features[f - env.n].name: cfg_map[f] for f in feat_deps}

    maps = list(stops)

    deps = tuple([r] + feat_deps + (obj_idx if needs_carry else []))
    B = np.zeros((sizes[r],) + tuple(sizes[d] for d in deps))
    for cfg in np.ndindex(*B.shape[1:]):
        c = dict(zip(deps, cfg))
        carrying = any(c[o] == c[r] for o in obj_idx) if needs_carry else False
        nxt = c[r] if env.is_blocked(actor.label, dest, feature_values(c), carrying) else dest
        B[(nxt,) + cfg] = 1.0
    maps[r] = (B, deps)

    for o in obj_idx:
        deps = tuple([o, r] + feat_deps)
        B = np.zeros((sizes[o],) + tuple(sizes[d] for d in deps))
        for cfg in np.ndindex(*B.shape[1:]):
            c = dict(zip(deps, cfg))
            moves = c[o] == c[r] and not env.is_blocked(actor.label, dest, feature_values(c), True)
            B[(dest if moves else c[o],) + cfg] = 1.0
        maps[o] = (B, deps)
    return tuple(maps)


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Categorical generative model owned by one controllable entity.

    ``A[k]`` has shape ``(num_obs_k, *[state sizes of A_deps[k]])``;
    ``B[a][f]`` is the ``(array, deps)`` pair from :func:`build_transitions`;
    ``C[k]`` are preference logits and ``D[f]`` the initial state prior.
    """

    owner: str
    env: EnvironmentSpec
    observations: ObservationSpace
    states: StateSpace
    actions: ActionSpace
    A: tuple
    A_deps: tuple
    B: tuple
    C: tuple
    D: tuple
    horizon: int = 4
    precision: float = 16.0
    meta: dict = field(default_factory=dict)

    def with_preferences(self, C):
        C = tuple(np.asarray(c, dtype=float) for c in C)
        _check_preferences(self.observations, C)
        return replace(self, C=C)

    def with_likelihood(self, A, A_deps=None):
        """Swap in another likelihood; modalities may be added or resized.

        Preferences of modalities whose size changed reset to uniform.
        """
        A = tuple(np.asarray(a, dtype=float) for a in A)
        A_deps = self.A_deps if A_deps is None else tuple(tuple(d) for d in A_deps)
        if len(A) != len(A_deps):
            raise ConfigurationError("one dependency list per likelihood array is required")
        for k, (a, deps) in enumerate(zip(A, A_deps)):
            if a.shape[1:] != tuple(self.states.sizes[d] for d in deps):
                raise ConfigurationError(f"likelihood {k} has shape {a.shape}, deps {deps}")
        names = tuple(self.observations.names[k] if k < len(self.observations.names) else f"extra:{k}"
                      for k in range(len(A)))
        obs = ObservationSpace(names, tuple(a.shape[0] for a in A))
        C = tuple(self.C[k] if k < len(self.C) and self.C[k].shape == (s,) else np.zeros(s)
                  for k, s in enumerate(obs.sizes))
        return replace(self, A=A, A_deps=A_deps, observations=obs, C=C)


def _check_preferences(obs: ObservationSpace, C):
    if len(C) != len(obs.sizes):
        raise ConfigurationError(f"expected {len(obs.sizes)} preference vectors, got {len(C)}")
    for name, size, c in zip(obs.names, obs.sizes, C):
        if c.shape != (size,):
            raise ConfigurationError(f"preference for {name}: expected length {size}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ConfigurationError(f"preference for {name} has non-finite logits")


def uniform_preferences(env: EnvironmentSpec):
    return [np.zeros(s) for s in build_observation_space(env).sizes]


def target_preferences(env: EnvironmentSpec, targets=None, logit=4.0):
    """Preference logits with ``logit`` on each ``{what: where_label}`` target.

    Targets naming a where absent from ``env`` leave that modality uniform.
    """
    C = uniform_preferences(env)
    for what, where in (targets or {}).items():
        k = env.what_index(what)
        if where in env.wheres:
            C[k][env.where_index(where)] = logit
    return C


def build_generative_model(
    env: EnvironmentSpec,
    owner: str,
    preferences: Optional[Sequence] = None,
    horizon: int = 4,
    precision: float = 16.0,
) -> GenerativeModel:
    try:
        w = env.what(owner)
    except KeyError:
        raise NotAController(f"{owner!r} is not part of the environment") from None
    if not w.controllable:
        raise NotAController(f"{owner!r} is not controllable")
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    if not precision > 0:
        raise ConfigurationError("precision must be > 0")

    obs = build_observation_space(env)
    states = build_state_space(env)
    actions = build_action_space(env)
    A = tuple(np.eye(s) for s in obs.sizes)
    A_deps = tuple((k,) for k in range(len(obs.sizes)))
    B = tuple(build_transitions(env, a) for a in actions)
    C = uniform_preferences(env) if preferences is None else preferences
    C = tuple(np.asarray(c, dtype=float) for c in C)
    _check_preferences(obs, C)
    D = [np.eye(env.m)[x.initial_where] for x in env.whats]
    D += [np.full(len(f.levels), 1.0 / len(f.levels)) for f in env.features]
    return GenerativeModel(owner, env, obs, states, actions, A, A_deps, B, C, tuple(D),
                           int(horizon), float(precision))


def check_transitions(model: GenerativeModel, tol=NORM_TOL):
    """Raise ``ConfigurationError`` unless every B column sums to one."""
    for a, maps in zip(model.actions, model.B):
        for f, (B, _) in enumerate(maps):
            if np.any(B < 0) or np.max(np.abs(B.sum(axis=0) - 1.0)) > tol:
                raise ConfigurationError(f"{a}: factor {f} transition is not column-stochastic")


def exclusive_reach(env: EnvironmentSpec, agent: str):
    others = set()
    for w in env.controllables:
        if w.label != agent:
            others.update(w.reach)
    return [j for j in sorted(env.what(agent).reach) if j not in others]


def restrict_to_agent(env: EnvironmentSpec, agent: str) -> EnvironmentSpec:
    """Agent-centric view of ``env``: only the agent's own workspace.

    Keeps the wheres only ``agent`` can reach, the agent itself and the
    non-controllable entities starting inside that workspace. Other
    controllers, and features or rules that mention dropped entities or
    wheres, disappear.
    """
    try:
        w = env.what(agent)
    except KeyError:
        raise NotAController(f"{agent!r} is not part of the environment") from None
    if not w.controllable:
        raise NotAController(f"{agent!r} is not controllable")

    keep = exclusive_reach(env, agent)
    remap = {old: new for new, old in enumerate(keep)}
    whats = [WhatEntry(w.label, w.kind, remap.get(w.initial_where, 0),
                       tuple(remap[j] for j in w.reach if j in remap))]
    if w.initial_where not in remap:
        raise ConfigurationError(f"{agent} starts outside its own workspace")
    for o in env.objects:
        if o.initial_where in remap:
            whats.append(WhatEntry(o.label, o.kind, remap[o.initial_where]))
    kept_labels = {x.label for x in whats}
    features = tuple(f for f in env.features if f.attached_to in kept_labels)
    fnames = {f.name for f in features}
    rules = tuple(
        replace(r, destination=remap[r.destination])
        for r in env.blocked_rules
        if r.actor in kept_labels and r.feature in fnames and r.destination in remap
    )
    layout = None
    if env.layout is not None:
        kept = {env.wheres[j] for j in keep}
        layout = tuple(x for x in env.layout if x[0] in kept)
    return EnvironmentSpec(tuple(env.wheres[j] for j in keep), tuple(whats), features, rules,
                           env.carry, layout)
