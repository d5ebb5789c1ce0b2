"""Environment-centric active inference on discrete grid worlds.

Modules
-------
maths
    Categorical primitives (normalize, softmax, KL, entropy).
blanket
    Observation/state/action spaces and generative models built from an
    environment description, plus the agent-centric restriction.
inference
    State inference, expected free energy, policy posterior and selection.
world
    Ground-truth simulator executing controls.
scenario
    Scenario files, the run loop, traces, heatmaps and timelines.
"""

from .blanket import (
    Action,
    BlockedRule,
    EnvironmentSpec,
    Feature,
    WhatEntry,
    build_action_space,
    build_generative_model,
    build_observation_space,
    build_state_space,
    build_transitions,
    restrict_to_agent,
)
from .inference import (
    enumerate_policies,
    evaluate_policies,
    expected_free_energy,
    expected_observation,
    infer_policy,
    infer_state,
    is_actor,
    plan,
    predict,
    select_action,
)
from .scenario import emit_heatmap, emit_timeline, load_scenario, run

__version__ = "0.1.0"

__all__ = [
    "Action", "BlockedRule", "EnvironmentSpec", "Feature", "WhatEntry",
    "build_action_space", "build_generative_model", "build_observation_space",
    "build_state_space", "build_transitions", "restrict_to_agent",
    "enumerate_policies", "evaluate_policies", "expected_free_energy", "expected_observation",
    "infer_policy", "infer_state", "is_actor", "plan", "predict", "select_action",
    "emit_heatmap", "emit_timeline", "load_scenario", "run",
]
