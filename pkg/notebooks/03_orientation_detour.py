"""
Rerouting around a blocked move
===============================

In scenario 2 UR5e cannot hand an object into P14 while COBOTTA faces it.
The orientation is an observed feature, so once it flips the planner routes
through the intermediate cell instead of attempting the blocked move.
"""

from ecaif.scenario import event_outcomes, executed_actions, load_scenario, object_path, run

for name in ("scenario2-away", "scenario2-facing"):
    trace = run(load_scenario(name))
    print(name)
    print("  actions:", [a for a in executed_actions(trace) if a.startswith("Move")])
    print("  path:   ", " -> ".join(object_path(trace, "object")))
    print("  blocked:", event_outcomes(trace).count("noop-blocked"))

# Lowering the horizon to 2 leaves too little lookahead for the detour.
short = run(load_scenario("scenario2-facing").with_overrides(horizon=2))
print("horizon 2 path:", " -> ".join(object_path(short, "object")))
