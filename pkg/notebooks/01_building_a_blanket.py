"""
Building generative models from an environment description
===========================================================

A small line world with one arm, one box and three cells. Everything the
arm's model contains follows from this description.
"""

import numpy as np

from ecaif import EnvironmentSpec, WhatEntry, build_generative_model, expected_free_energy
from ecaif.blanket import CONTROLLABLE, NON_CONTROLLABLE, target_preferences

env = EnvironmentSpec(
    wheres=("A", "B", "C"),
    whats=(
        WhatEntry("arm", CONTROLLABLE, initial_where=0, reach=(0, 1, 2)),
        WhatEntry("box", NON_CONTROLLABLE, initial_where=1),
    ),
)

# One modality per what, one level per where; one Stop plus one Move per where.
model = build_generative_model(env, "arm", target_preferences(env, {"box": "C"}))
print("modalities:", dict(zip(model.observations.names, model.observations.sizes)))
print("joint states:", model.states.joint_size)
print("actions:", [str(a) for a in model.actions])

# Transitions are (tensor, dependency list) pairs per factor.
# Moving the arm to B leaves the box where it is; moving it from B carries the box.
move_b = model.actions.index("Move(arm,B)")
B_box, deps = model.B[move_b][1]
print("box factor depends on", [model.states.names[d] for d in deps])

# Expected free energy of a few two-step plans from the initial belief.
for labels in (["Stop(arm)", "Stop(arm)"], ["Move(arm,B)", "Move(arm,C)"], ["Move(arm,C)", "Stop(arm)"]):
    policy = [model.actions.index(x) for x in labels]
    ev = expected_free_energy(model, model.D, policy)
    print(f"{' -> '.join(labels):28s} G = {ev.G:8.4f}  ambiguity = {np.sum(ev.ambiguity):.1f}")
