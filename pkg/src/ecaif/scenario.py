"""Scenario files, the closed perception/action loop, and trace outputs.

A scenario file is YAML with four sections::

    name: scenario1a
    environment:           # wheres, whats, features, blocked moves, layout
      ...
    preferences:           # initial preferred where per entity
      object: P12
    schedule:              # timestep-stamped changes
      preferences: [{timestep: 0, what: object, target: P5}]
      features:    [{timestep: 1, feature: orientation, value: facing-target}]
    engine:                # mode, horizon, precision, select, seed, timesteps, order

See ``README.md`` for every key.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .blanket import (
    CONTROLLABLE,
    NON_CONTROLLABLE,
    Action,
    BlockedRule,
    EnvironmentSpec,
    Feature,
    WhatEntry,
    build_generative_model,
    restrict_to_agent,
)
from .errors import (
    ConfigurationError,
    InvalidAction,
    InvalidObservation,
    InvalidWhat,
    ParseError,
    ValidationError,
)
from .inference import PRUNING_RULES, infer_state, is_actor, plan, predict
from .world import action_to_control, apply_control, initial_world, observe, set_feature

logger = logging.getLogger(__name__)

SHIPPED = ("scenario1a", "scenario1a-agent", "scenario1b", "scenario1b-agent",
           "scenario2-away", "scenario2-facing")


@dataclass(frozen=True)
class PreferenceUpdate:
    timestep: int
    what: str
    target: Optional[str] = None
    # explicit logits over the full where list, instead of a single target
    logits: Optional[tuple] = None


@dataclass(frozen=True)
class FeatureUpdate:
    timestep: int
    feature: str
    value: str


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    environment: EnvironmentSpec
    mode: str = "ecaif"
    initial_preferences: tuple = ()  # PreferenceUpdate entries with timestep -1
    preference_schedule: tuple = ()
    feature_schedule: tuple = ()
    horizon: int = 4
    precision: float = 16.0
    select: str = "argmax"
    seed: int = 0
    timesteps: int = 10
    order: tuple = ()
    preference_logit: float = 4.0
    pruning: tuple = ()

    @property
    def agent(self) -> Optional[str]:
        return self.mode.split(":", 1)[1] if self.mode.startswith("agent:") else None

    def with_overrides(self, **kwargs):
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        cfg = replace(self, **kwargs)
        _validate_engine(cfg, {})
        return cfg


# ---------------------------------------------------------------- loading


def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Reader:
    """Pulls typed values out of parsed YAML, raising with line numbers."""

    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def line(self, path):
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def fail(self, path, message):
        where = ".".join(str(p) for p in path) or "<root>"
        raise ValidationError(f"{where}: {message}", self.line(path))

    def get(self, path, kind=None, default=...):
        node = self.data
        for p in path:
            if isinstance(node, dict) and p in node:
                node = node[p]
            elif isinstance(node, list) and isinstance(p, int) and p < len(node):
                node = node[p]
            else:
                if default is ...:
                    self.fail(path, "missing required key")
                return default
        if kind is not None and not isinstance(node, kind) or isinstance(node, bool) and kind in (int, float, (int, float)):
            self.fail(path, f"expected {getattr(kind, '__name__', kind)}, got {type(node).__name__}")
        return node


def _parse_environment(rd: _Reader):
    base = ("environment",)
    wheres = rd.get(base + ("wheres",), list)
    wheres = [str(w) for w in wheres]
    if len(set(wheres)) != len(wheres):
        rd.fail(base + ("wheres",), "where labels must be unique")

    def where(path):
        label = str(rd.get(path))
        if label not in wheres:
            rd.fail(path, f"unknown where {label!r}")
        return wheres.index(label)

    whats = []
    for i, _ in enumerate(rd.get(base + ("whats",), list)):
        p = base + ("whats", i)
        label = str(rd.get(p + ("label",)))
        kind = rd.get(p + ("kind",), str)
        if kind not in (CONTROLLABLE, NON_CONTROLLABLE):
            rd.fail(p + ("kind",), f"kind must be {CONTROLLABLE!r} or {NON_CONTROLLABLE!r}")
        reach = tuple(where(p + ("reach", j)) for j, _ in enumerate(rd.get(p + ("reach",), list, [])))
        whats.append(WhatEntry(label, kind, where(p + ("initial",)), reach))
    labels = [w.label for w in whats]

    features = []
    for i, _ in enumerate(rd.get(base + ("features",), list, [])):
        p = base + ("features", i)
        levels = tuple(str(x) for x in rd.get(p + ("levels",), list))
        attached = str(rd.get(p + ("attached_to",)))
        if attached not in labels:
            rd.fail(p + ("attached_to",), f"unknown what {attached!r}")
        init = str(rd.get(p + ("initial",), default=levels[0]))
        if init not in levels:
            rd.fail(p + ("initial",), f"unknown level {init!r}")
        features.append(Feature(str(rd.get(p + ("name",))), attached, levels, levels.index(init)))
    fmap = {f.name: f for f in features}

    rules = []
    for i, _ in enumerate(rd.get(base + ("blocked",), list, [])):
        p = base + ("blocked", i)
        actor = str(rd.get(p + ("actor",)))
        if actor not in labels:
            rd.fail(p + ("actor",), f"unknown what {actor!r}")
        fname = str(rd.get(p + ("feature",)))
        if fname not in fmap:
            rd.fail(p + ("feature",), f"unknown feature {fname!r}")
        value = str(rd.get(p + ("value",)))
        if value not in fmap[fname].levels:
            rd.fail(p + ("value",), f"unknown level {value!r}")
        rules.append(BlockedRule(actor, where(p + ("destination",)), fname,
                                 fmap[fname].levels.index(value),
                                 bool(rd.get(p + ("carrying_only",), bool, False))))

    layout = None
    rows = rd.get(base + ("layout",), list, None)
    if rows is not None:
        layout = []
        for r, row in enumerate(rows):
            for c, label in enumerate(row or []):
                if label is None:
                    continue
                where((*base, "layout", r, c))
                layout.append((str(label), r, c))
    try:
        return EnvironmentSpec(tuple(wheres), tuple(whats), tuple(features), tuple(rules),
                               bool(rd.get(base + ("carry",), bool, True)),
                               None if layout is None else tuple(layout))
    except ConfigurationError as exc:
        rd.fail(base, str(exc))


def _preference_entry(rd, env, path, timestep):
    what = str(rd.get(path + ("what",)))
    if what not in [w.label for w in env.whats]:
        rd.fail(path + ("what",), f"unknown what {what!r}")
    target = rd.get(path + ("target",), default=None)
    logits = rd.get(path + ("logits",), list, None)
    if (target is None) == (logits is None):
        rd.fail(path, "give exactly one of 'target' or 'logits'")
    if target is not None:
        target = str(target)
        if target not in env.wheres:
            rd.fail(path + ("target",), f"unknown where {target!r}")
    if logits is not None:
        if len(logits) != env.m or not all(isinstance(x, (int, float)) for x in logits):
            rd.fail(path + ("logits",), f"expected {env.m} numbers")
        logits = tuple(float(x) for x in logits)
    return PreferenceUpdate(timestep, what, target, logits)


def _validate_engine(cfg: ScenarioConfig, lines):
    def fail(key, msg):
        raise ValidationError(f"engine.{key}: {msg}", lines.get(("engine", key), lines.get(("engine",))))

    labels = [w.label for w in cfg.environment.controllables]
    if cfg.mode != "ecaif":
        if cfg.agent is None:
            fail("mode", f"expected 'ecaif' or 'agent:<what>', got {cfg.mode!r}")
        if cfg.agent not in labels:
            fail("mode", f"{cfg.agent!r} is not a controllable what")
    if cfg.horizon < 1:
        fail("horizon", "must be >= 1")
    if not cfg.precision > 0:
        fail("precision", "must be > 0")
    if cfg.select not in ("argmax", "sample"):
        fail("select", "must be 'argmax' or 'sample'")
    if cfg.timesteps < 1:
        fail("timesteps", "must be >= 1")
    if sorted(cfg.order) != sorted(labels):
        fail("order", f"must list each controllable what once: {labels}")
    bad = set(cfg.pruning) - set(PRUNING_RULES)
    if bad:
        fail("pruning", f"unknown rules {sorted(bad)}")


def parse_scenario(text: str, source="<string>") -> ScenarioConfig:
    if not text.strip():
        raise ParseError(f"{source}: empty scenario file", 1)
    try:
        data = yaml.safe_load(text)
        lines = _line_map(yaml.compose(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"{source}: {exc}", mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be a mapping", 1)
    rd = _Reader(data, lines)
    env = _parse_environment(rd)

    initial = []
    prefs = rd.get(("preferences",), dict, {})
    for what, target in prefs.items():
        path = ("preferences", what)
        if what not in [w.label for w in env.whats]:
            rd.fail(path, f"unknown what {what!r}")
        if str(target) not in env.wheres:
            rd.fail(path, f"unknown where {target!r}")
        initial.append(PreferenceUpdate(-1, str(what), str(target)))

    def timestep(path):
        t = rd.get(path + ("timestep",), int)
        if t < 0:
            rd.fail(path + ("timestep",), "must be >= 0")
        return t

    pref_sched = []
    for i, _ in enumerate(rd.get(("schedule", "preferences"), list, [])):
        p = ("schedule", "preferences", i)
        pref_sched.append(_preference_entry(rd, env, p, timestep(p)))
    feat_sched = []
    for i, _ in enumerate(rd.get(("schedule", "features"), list, [])):
        p = ("schedule", "features", i)
        name = str(rd.get(p + ("feature",)))
        try:
            feat = env.feature(name)
        except KeyError:
            rd.fail(p + ("feature",), f"unknown feature {name!r}")
        value = str(rd.get(p + ("value",)))
        if value not in feat.levels:
            rd.fail(p + ("value",), f"unknown level {value!r}")
        feat_sched.append(FeatureUpdate(timestep(p), name, value))
    for key, sched in (("preferences", pref_sched), ("features", feat_sched)):
        ts = [u.timestep for u in sched]
        if ts != sorted(ts):
            rd.fail(("schedule", key), "entries must be sorted by timestep")

    e = ("engine",)
    cfg = ScenarioConfig(
        name=str(rd.get(("name",), default=Path(source).stem)),
        environment=env,
        mode=str(rd.get(e + ("mode",), str, "ecaif")),
        initial_preferences=tuple(initial),
        preference_schedule=tuple(pref_sched),
        feature_schedule=tuple(feat_sched),
        horizon=rd.get(e + ("horizon",), int, 4),
        precision=float(rd.get(e + ("precision",), (int, float), 16.0)),
        select=str(rd.get(e + ("select",), str, "argmax")),
        seed=rd.get(e + ("seed",), int, 0),
        timesteps=rd.get(e + ("timesteps",), int, 10),
        order=tuple(str(x) for x in rd.get(e + ("order",), list, [w.label for w in env.controllables])),
        preference_logit=float(rd.get(e + ("preference_logit",), (int, float), 4.0)),
        pruning=tuple(str(x) for x in rd.get(e + ("pruning",), list, [])),
    )
    _validate_engine(cfg, lines)
    return cfg


def shipped_scenario_path(name: str) -> Path:
    if name not in SHIPPED:
        raise FileNotFoundError(f"no shipped scenario named {name!r}; choose from {SHIPPED}")
    return Path(str(resources.files("ecaif") / "scenarios" / f"{name}.yaml"))


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario file. A bare shipped name such as ``"scenario1b"`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in SHIPPED:
        p = shipped_scenario_path(str(path))
    if not p.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    return parse_scenario(p.read_text(), str(p))


# ---------------------------------------------------------------- running


def _fmt(x):
    return float(f"{x:.9g}")


def _preference_logits(model_env: EnvironmentSpec, full_env: EnvironmentSpec, update, logit):
    """Logit vector for ``update`` over the model's where list.

    Wheres the model does not contain cannot carry a preference; if the
    target falls outside, the modality is left uniform.
    """
    if update.logits is not None:
        return np.array([update.logits[full_env.where_index(w)] for w in model_env.wheres])
    c = np.zeros(model_env.m)
    if update.target in model_env.wheres:
        c[model_env.where_index(update.target)] = logit
    else:
        logger.info("target %s for %s is outside the model's wheres; preference left uniform",
                    update.target, update.what)
    return c


def _apply_preference(model, full_env, update, logit):
    env = model.env
    if update.what not in [w.label for w in env.whats]:
        return model
    C = list(model.C)
    C[env.what_index(update.what)] = _preference_logits(env, full_env, update, logit)
    return model.with_preferences(C)


def _local_observation(model_env, full_env, obs):
    out = []
    for w in model_env.whats:
        label = full_env.wheres[obs[full_env.what_index(w.label)]]
        if label not in model_env.wheres:
            raise InvalidObservation(f"{w.label} observed at {label}, outside the model's wheres")
        out.append(model_env.where_index(label))
    for f in model_env.features:
        out.append(obs[full_env.n + full_env.feature_index(f.name)])
    return out


def _to_full_action(action: Action, full_env: EnvironmentSpec) -> Action:
    if action.is_stop:
        return action
    return Action(action.actor, full_env.where_index(action.target_label), action.target_label)


def _belief_summary(model, belief):
    out = {}
    for name, q in zip(model.states.names, belief):
        i = int(np.argmax(q))
        if name.startswith("feature:"):
            label = model.env.feature(name.split(":", 1)[1]).levels[i]
        else:
            label = model.env.wheres[i]
        out[name] = [label, _fmt(q[i])]
    return out


def _observation_record(env, obs):
    rec = {w.label: env.wheres[obs[i]] for i, w in enumerate(env.whats)}
    for j, f in enumerate(env.features):
        rec[f"feature:{f.name}"] = f.levels[obs[env.n + j]]
    return rec


@dataclass
class TraceLog:
    """Per-timestep records of one run plus the run's static context."""

    scenario: str
    mode: str
    environment: EnvironmentSpec
    initial_observation: dict
    records: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def summary(self) -> dict:
        env = self.environment
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "timesteps": len(self.records),
            "settings": self.settings,
            "wheres": list(env.wheres),
            "whats": [w.label for w in env.whats],
            "features": {f.name: list(f.levels) for f in env.features},
            "layout": [list(x) for x in env.layout] if env.layout else None,
            "initial_observation": self.initial_observation,
            "executed_actions": executed_actions(self),
            "object_paths": {w.label: object_path(self, w.label) for w in env.objects},
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.jsonl").write_text(self.to_jsonl())
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        for w in self.environment.whats:
            (out / f"heatmap_{w.label}.csv").write_text(emit_heatmap(self, w.label).to_csv())
        (out / "timeline.txt").write_text(format_timeline(emit_timeline(self)))
        return out

    @classmethod
    def read(cls, path) -> "TraceLog":
        """Load from a run directory or from its ``trace.jsonl``."""
        p = Path(path)
        trace_file = p / "trace.jsonl" if p.is_dir() else p
        summary_file = trace_file.with_name("summary.json")
        if not trace_file.exists() or not summary_file.exists():
            raise FileNotFoundError(f"need trace.jsonl and summary.json under {trace_file.parent}")
        s = json.loads(summary_file.read_text())
        records = [json.loads(line) for line in trace_file.read_text().splitlines() if line.strip()]
        whats = tuple(WhatEntry(label, NON_CONTROLLABLE, 0) for label in s["whats"])
        # rebuilt environment carries labels only; dynamics are not needed for reporting
        env = _LabelEnv(tuple(s["wheres"]), whats, s.get("layout"), s.get("features", {}))
        return cls(s["scenario"], s["mode"], env, s["initial_observation"], records, s.get("settings", {}))


@dataclass(frozen=True)
class _LabelEnv:
    wheres: tuple
    whats: tuple
    layout: Optional[list] = None
    feature_levels: dict = field(default_factory=dict)

    @property
    def objects(self):
        return list(self.whats)

    @property
    def features(self):
        return [Feature(n, "", tuple(lv)) for n, lv in self.feature_levels.items()]


def run(config: ScenarioConfig) -> TraceLog:
    """Execute the scenario's perception/action loop for ``config.timesteps`` steps.

    Each timestep, owners are visited in ``config.order``; each infers its
    state and a policy, and the first owner whose chosen action it performs
    itself sends that action to the world. Later owners skip the timestep.
    """
    env = config.environment
    agent = config.agent
    model_env = restrict_to_agent(env, agent) if agent else env
    owners = [o for o in config.order if o in [w.label for w in model_env.controllables]]

    models = {}
    for o in owners:
        model = build_generative_model(model_env, o, horizon=config.horizon, precision=config.precision)
        for u in config.initial_preferences:
            model = _apply_preference(model, env, u, config.preference_logit)
        models[o] = model
    priors = {o: list(m.D) for o, m in models.items()}

    world = initial_world(env)
    obs = observe(world, env)
    rng = np.random.default_rng(config.seed)
    targets = {u.what: u.target for u in config.initial_preferences}
    trace = TraceLog(config.name, config.mode, env, _observation_record(env, obs), settings={
        "horizon": config.horizon, "precision": config.precision, "select": config.select,
        "seed": config.seed, "order": list(config.order), "pruning": list(config.pruning),
        "preference_logit": config.preference_logit,
    })

    for t in range(config.timesteps):
        for u in (u for u in config.preference_schedule if u.timestep == t):
            targets[u.what] = u.target
            for o in owners:
                models[o] = _apply_preference(models[o], env, u, config.preference_logit)
        feature_updates = [u for u in config.feature_schedule if u.timestep == t]
        for u in feature_updates:
            world = set_feature(world, env, u.feature, u.value)
        if feature_updates:
            obs = observe(world, env)

        rows, executed, control, event = [], None, None, None
        posteriors = {}
        for o in owners:
            model = models[o]
            q = infer_state(model, priors[o], _local_observation(model.env, env, obs))
            posteriors[o] = q
            p = plan(model, q, config.pruning, config.select, rng)
            action = model.actions[p.action]
            gate = is_actor(action, o)
            rows.append({
                "owner": o,
                "belief": _belief_summary(model, q),
                "policy": [str(model.actions[a]) for a in p.policies[p.policy_index]],
                "G": _fmt(p.G[p.policy_index]),
                "q_pi": _fmt(p.q_pi[p.policy_index]),
                "action": str(action),
                "is_actor": gate,
            })
            if gate:
                executed = _to_full_action(action, env)
                control = action_to_control(executed, env, world)
                world, event = apply_control(world, control, env)
                break

        obs = observe(world, env)
        for o, model in models.items():
            q = posteriors.get(o, priors[o])
            try:
                priors[o] = predict(model, q, model.actions.index(str(executed))) if executed else q
            except InvalidAction:
                priors[o] = q
        trace.records.append({
            "t": t,
            "targets": dict(sorted(targets.items())),
            "owners": rows,
            "action": str(executed) if executed else None,
            "control": None if control is None else {
                "actor": control.actor, "target": env.wheres[control.target], "kind": control.kind},
            "event": None if event is None else {
                "outcome": event.outcome,
                "moved": [[w, env.wheres[a], env.wheres[b]] for w, a, b in event.moved]},
            "observation": _observation_record(env, obs),
        })
    return trace


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class ObservationHistogram:
    what: str
    wheres: tuple
    counts: np.ndarray
    layout: Optional[tuple] = None

    def count(self, where: str) -> int:
        return int(self.counts[self.wheres.index(where)])

    def as_dict(self):
        return {w: int(c) for w, c in zip(self.wheres, self.counts)}

    def to_csv(self) -> str:
        """Grid-shaped CSV when a layout is known, else one header row and one count row."""
        if not self.layout:
            return ",".join(self.wheres) + "\n" + ",".join(str(int(c)) for c in self.counts) + "\n"
        rows = 1 + max(r for _, r, _ in self.layout)
        cols = 1 + max(c for _, _, c in self.layout)
        grid = [[""] * cols for _ in range(rows)]
        for label, r, c in self.layout:
            grid[r][c] = f"{label}={self.count(label)}"
        return "".join(",".join(row) + "\n" for row in grid)


def emit_heatmap(trace: TraceLog, what: str) -> ObservationHistogram:
    """How often ``what`` was observed at each where, over all timesteps."""
    env = trace.environment
    if what not in [w.label for w in env.whats]:
        raise InvalidWhat(f"unknown what {what!r}")
    counts = np.zeros(len(env.wheres), dtype=int)
    for rec in trace.records:
        counts[env.wheres.index(rec["observation"][what])] += 1
    return ObservationHistogram(what, tuple(env.wheres), counts, env.layout)


@dataclass(frozen=True)
class TimelineRow:
    t: int
    selections: tuple  # (owner, selected action, passed gate)
    action: Optional[str]
    control: Optional[str]
    event: Optional[str]


def emit_timeline(trace: TraceLog):
    rows = []
    for rec in trace.records:
        sel = tuple((r["owner"], r["action"], r["is_actor"]) for r in rec["owners"])
        c = rec["control"]
        control = None if c is None else f"{c['kind']} {c['actor']}->{c['target']}"
        rows.append(TimelineRow(rec["t"], sel, rec["action"], control,
                                None if rec["event"] is None else rec["event"]["outcome"]))
    return rows


def format_timeline(rows) -> str:
    lines = ["t\tselections\texecuted\tcontrol\tevent"]
    for r in rows:
        sel = "; ".join(f"{o}:{a}{'' if g else ' (gated)'}" for o, a, g in r.selections)
        lines.append(f"{r.t}\t{sel}\t{r.action or '-'}\t{r.control or '-'}\t{r.event or '-'}")
    return "\n".join(lines) + "\n"


def executed_actions(trace: TraceLog):
    """Executed action labels in order, skipping timesteps where nothing ran."""
    return [r["action"] for r in trace.records if r["action"] is not None]


def object_path(trace: TraceLog, what: str):
    """Sequence of distinct consecutive wheres ``what`` was observed at."""
    path = [trace.initial_observation[what]]
    for rec in trace.records:
        here = rec["observation"][what]
        if here != path[-1]:
            path.append(here)
    return path


def event_outcomes(trace: TraceLog):
    return [r["event"]["outcome"] for r in trace.records if r["event"] is not None]
