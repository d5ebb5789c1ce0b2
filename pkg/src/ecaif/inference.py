"""State inference, expected free energy and policy selection.

Beliefs are lists with one categorical vector per state factor. Internally
the planner works on *batches* of beliefs (one ``(N, size_f)`` array per
factor) so that all policies of a given depth are rolled forward together.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .blanket import Action, GenerativeModel
from .errors import (
    DegenerateDistribution,
    InvalidAction,
    InvalidHorizon,
    InvalidObservation,
    NoPolicies,
)
from .maths import MIN_VAL, log_stable, normalize, softmax, xlogx

PRUNE_REDUNDANT_MOVE = "redundant-move"
PRUNE_STOP_PREFIX = "stop-prefix"
PRUNING_RULES = (PRUNE_REDUNDANT_MOVE, PRUNE_STOP_PREFIX)

_LETTERS = "abcdefghijklmnopqrstuvwxy"


@dataclass(frozen=True)
class PolicyEvaluation:
    policy: tuple
    G: float
    risk: np.ndarray  # per step, summed over modalities
    ambiguity: np.ndarray
    risk_by_modality: np.ndarray  # (steps, modalities)


@dataclass(frozen=True)
class Plan:
    """Outcome of one planning step for one model."""

    policies: np.ndarray
    G: np.ndarray
    q_pi: np.ndarray
    policy_index: int
    action: int


# ---------------------------------------------------------------- state


def infer_state(model: GenerativeModel, prior, observation, max_iter=16, tol=1e-6):
    """Posterior over every state factor given one observation per modality.

    Modalities that depend on a single factor contribute their likelihood
    column directly. Modalities spanning several factors are handled with
    mean-field fixed-point sweeps.
    """
    sizes = model.observations.sizes
    if len(observation) != len(sizes):
        raise InvalidObservation(f"expected {len(sizes)} observation entries, got {len(observation)}")
    obs = []
    for k, (o, s) in enumerate(zip(observation, sizes)):
        if not isinstance(o, (int, np.integer)) or not 0 <= o < s:
            raise InvalidObservation(f"modality {model.observations.names[k]}: {o!r} not in [0, {s})")
        obs.append(int(o))

    num_factors = len(model.states.sizes)
    base = [np.maximum(np.asarray(p, dtype=float), MIN_VAL) for p in prior]
    multi = []
    for k, deps in enumerate(model.A_deps):
        if len(deps) == 1:
            base[deps[0]] = base[deps[0]] * model.A[k][obs[k]]
        else:
            multi.append(k)
    try:
        q = [normalize(b) for b in base]
    except DegenerateDistribution:
        raise InvalidObservation(f"observation {obs} has zero likelihood") from None
    if not multi:
        return q

    log_lik = {k: log_stable(model.A[k][obs[k]]) for k in multi}
    for _ in range(max_iter):
        delta = 0.0
        for f in range(num_factors):
            msg = np.zeros(model.states.sizes[f])
            for k in multi:
                deps = model.A_deps[k]
                if f not in deps:
                    continue
                t = log_lik[k]
                # contract every other dependency against its current marginal
                for pos in reversed(range(len(deps))):
                    if deps[pos] != f:
                        t = np.tensordot(t, q[deps[pos]], axes=([pos], [0]))
                msg = msg + t
            new = normalize(base[f] * np.exp(msg - msg.max()))
            delta = max(delta, float(np.max(np.abs(new - q[f]))))
            q[f] = new
        if delta < tol:
            break
    return q


# ---------------------------------------------------------------- policies


@functools.lru_cache(maxsize=16)
def _full_enumeration(num_actions, horizon):
    grid = np.unravel_index(np.arange(num_actions ** horizon), (num_actions,) * horizon)
    policies = np.stack(grid, axis=1).astype(np.int32)
    policies.setflags(write=False)
    return policies


def enumerate_policies(actions, horizon, pruning=(), believed=None):
    """All action sequences of length ``horizon`` in lexicographic order.

    ``pruning`` may contain ``"redundant-move"`` (drop sequences moving an
    actor to where ``believed[actor]`` says it already is) and
    ``"stop-prefix"`` (drop sequences with a Stop before a non-Stop).
    """
    if horizon < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {horizon}")
    actions = list(actions)
    policies = _full_enumeration(len(actions), int(horizon))
    unknown = set(pruning) - set(PRUNING_RULES)
    if unknown:
        raise ValueError(f"unknown pruning rules {sorted(unknown)}")
    if not pruning:
        return policies
    keep = np.ones(len(policies), dtype=bool)
    if PRUNE_REDUNDANT_MOVE in pruning:
        if believed is None:
            raise ValueError("redundant-move pruning needs believed actor locations")
        redundant = np.array([not a.is_stop and believed.get(a.actor) == a.target for a in actions])
        keep &= ~redundant[policies].any(axis=1)
    if PRUNE_STOP_PREFIX in pruning:
        stop = np.array([a.is_stop for a in actions])[policies]
        # a Stop followed anywhere later by a non-Stop
        later_move = np.flip(np.logical_or.accumulate(np.flip(~stop, axis=1), axis=1), axis=1)
        bad = stop[:, :-1] & later_move[:, 1:]
        keep &= ~bad.any(axis=1)
    return policies[keep]


def believed_locations(model: GenerativeModel, belief):
    """Most probable location of every controllable entity."""
    return {w.label: int(np.argmax(belief[model.env.what_index(w.label)]))
            for w in model.env.controllables}


# ---------------------------------------------------------------- prediction


def _as_batch(belief):
    return [np.asarray(q, dtype=float)[None, :] for q in belief]


def _is_identity(B, deps, f):
    return deps == (f,) and B.shape[0] == B.shape[1] and np.array_equal(B, np.eye(B.shape[0]))


def _push(model: GenerativeModel, batch, a):
    """Roll a batch of beliefs one step through action ``a``."""
    out = []
    for f, (B, deps) in enumerate(model.B[a]):
        if _is_identity(B, deps, f):
            out.append(batch[f])
            continue
        idx = _LETTERS[: len(deps)]
        subs = "z" + idx + "," + ",".join("n" + c for c in idx) + "->nz"
        out.append(np.einsum(subs, B, *[batch[d] for d in deps]))
    return out


def _action_index(model, action):
    if isinstance(action, Action):
        return model.actions.index(action)
    if isinstance(action, (int, np.integer)) and 0 <= action < len(model.actions):
        return int(action)
    raise InvalidAction(f"unknown action {action!r}")


def predict(model: GenerativeModel, belief, action):
    """One-step push-forward of a factored belief.

    Transition maps that depend on other factors are averaged over those
    factors' current marginals.
    """
    a = _action_index(model, action)
    return [q[0] for q in _push(model, _as_batch(belief), a)]


def _expected_obs_batch(model, batch):
    out = []
    for A, deps in zip(model.A, model.A_deps):
        idx = _LETTERS[: len(deps)]
        subs = "z" + idx + "," + ",".join("n" + c for c in idx) + "->nz"
        out.append(np.einsum(subs, A, *[batch[d] for d in deps]))
    return out


def expected_observation(model: GenerativeModel, belief):
    return [q[0] for q in _expected_obs_batch(model, _as_batch(belief))]


def _log_preferences(model):
    return [c - logsumexp(c) for c in model.C]


def _node_terms(model, batch, log_c=None, ambiguity_tables=None, per_modality=False):
    """Risk and ambiguity of each belief in a batch, summed over modalities."""
    if log_c is None:
        log_c = _log_preferences(model)
    if ambiguity_tables is None:
        ambiguity_tables = [-xlogx(A).sum(axis=0) for A in model.A]
    n = batch[0].shape[0]
    risk = np.zeros(n)
    amb = np.zeros(n)
    parts = []
    for k, qo in enumerate(_expected_obs_batch(model, batch)):
        part = (xlogx(qo) - qo * log_c[k]).sum(axis=1)
        parts.append(part)
        risk += part
        deps = model.A_deps[k]
        H = ambiguity_tables[k]
        if not np.any(H):
            continue
        idx = _LETTERS[: len(deps)]
        subs = idx + "," + ",".join("n" + c for c in idx) + "->n"
        amb += np.einsum(subs, H, *[batch[d] for d in deps])
    if per_modality:
        return np.maximum(risk, 0.0), amb, np.stack(parts, axis=1)
    return np.maximum(risk, 0.0), amb


def expected_free_energy(model: GenerativeModel, belief, policy) -> PolicyEvaluation:
    """Risk plus ambiguity summed over the steps of ``policy``."""
    policy = tuple(int(a) for a in policy)
    if not policy:
        raise InvalidHorizon("policy must contain at least one action")
    for a in policy:
        _action_index(model, a)
    log_c = _log_preferences(model)
    batch = _as_batch(belief)
    risk, amb, parts = [], [], []
    G = 0.0
    for a in policy:
        batch = _push(model, batch, a)
        r, h, by_mod = _node_terms(model, batch, log_c, per_modality=True)
        risk.append(r[0])
        amb.append(h[0])
        parts.append(by_mod[0])
        G = G + (r[0] + h[0])
    return PolicyEvaluation(policy, float(G), np.array(risk), np.array(amb), np.array(parts))


def evaluate_policies(model: GenerativeModel, belief, policies=None, horizon=None):
    """Expected free energy of many policies at once.

    Expands the full action tree depth by depth, merging identical beliefs
    at each depth, then assembles ``G`` for all ``K**H`` sequences by
    broadcasting. When ``policies`` is given, returns ``G`` for those rows
    only (they must all have length ``horizon``).
    """
    K = len(model.actions)
    H = int(horizon or (policies.shape[1] if policies is not None else model.horizon))
    if H < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {H}")
    log_c = _log_preferences(model)
    amb_tables = [-xlogx(A).sum(axis=0) for A in model.A]
    sizes = [q.shape[0] for q in belief]
    offsets = np.cumsum([0] + sizes)

    nodes = _as_batch(belief)
    node_ids = np.zeros((), dtype=np.int64)
    G = np.zeros(())
    for _ in range(H):
        children = [_push(model, nodes, a) for a in range(K)]
        flat = np.concatenate([np.concatenate(c, axis=1) for c in children], axis=0)
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        n = nodes[0].shape[0]
        child_of = inverse.reshape(-1).reshape(K, n).T  # [node, action]
        nodes = [uniq[:, offsets[f]:offsets[f + 1]] for f in range(len(sizes))]
        r, h = _node_terms(model, nodes, log_c, amb_tables)
        values = r + h
        node_ids = child_of[node_ids]
        G = G[..., None] + values[node_ids]
    G = G.reshape(-1)
    if policies is None:
        return G
    policies = np.asarray(policies)
    if policies.ndim != 2 or policies.shape[1] != H:
        raise InvalidHorizon(f"policies must have shape (P, {H})")
    return G[np.ravel_multi_index(policies.T, (K,) * H)]


def policy_posterior(G, precision):
    G = np.asarray(G, dtype=float)
    if G.size == 0:
        raise NoPolicies("no policies to score")
    return softmax(-G, precision)


def infer_policy(model: GenerativeModel, belief, policies, G=None):
    """Posterior over ``policies``: softmax of ``-G`` at the model's precision."""
    policies = np.asarray(policies)
    if policies.size == 0 or len(policies) == 0:
        raise NoPolicies("empty policy list")
    if G is None:
        G = evaluate_policies(model, belief, policies)
    return policy_posterior(G, model.precision)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def select_policy(q_pi, mode="argmax", seed=None) -> int:
    q_pi = np.asarray(q_pi, dtype=float)
    if mode == "argmax":
        return int(np.argmax(q_pi))
    if mode == "sample":
        return int(_rng(seed).choice(len(q_pi), p=q_pi / q_pi.sum()))
    raise ValueError(f"unknown selection mode {mode!r}")


def select_action(q_pi, policies, mode="argmax", seed=None) -> int:
    """First action of the selected policy.

    ``argmax`` takes the lowest-index policy attaining the maximum;
    ``sample`` draws one from ``q_pi`` using ``seed`` (an int or a
    ``numpy.random.Generator``, which is advanced in place).
    """
    policies = np.asarray(policies)
    if len(q_pi) != len(policies):
        raise ValueError("posterior and policy list lengths differ")
    return int(policies[select_policy(q_pi, mode, seed)][0])


def is_actor(action: Action, owner: str) -> bool:
    return action.actor == owner


def plan(model: GenerativeModel, belief, pruning=(), mode="argmax", seed=None) -> Plan:
    """Enumerate, score and choose, as done once per owner per timestep."""
    believed = believed_locations(model, belief) if pruning else None
    policies = enumerate_policies(model.actions, model.horizon, pruning, believed)
    if len(policies) == 0:
        raise NoPolicies("pruning removed every policy")
    G = evaluate_policies(model, belief, None if not pruning else policies)
    q_pi = policy_posterior(G, model.precision)
    i = select_policy(q_pi, mode, seed)
    return Plan(policies, G, q_pi, i, int(policies[i][0]))
