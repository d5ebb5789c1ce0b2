"""
Out-of-reach transport by two arms
==================================

The shipped scenario1b asks for the object at P5, which only COBOTTA can
reach. Each robot plans over every entity, so UR5e brings the object to the
shared cell and COBOTTA finishes the job. The agent-centric baseline, whose
model stops at UR5e's own reach, cannot express the goal at all.
"""

from ecaif.scenario import emit_heatmap, emit_timeline, executed_actions, format_timeline, load_scenario, object_path, run

cfg = load_scenario("scenario1b")
trace = run(cfg)
print(format_timeline(emit_timeline(trace)))
print("object path:", " -> ".join(object_path(trace, "object")))
print()
print(emit_heatmap(trace, "object").to_csv())

# Baseline: UR5e alone, with its model limited to the cells only it can reach.
# The target falls outside, so preferences are flat and sampled actions wander.
baseline = load_scenario("scenario1b-agent")
for seed in range(5):
    t = run(baseline.with_overrides(seed=seed))
    h = emit_heatmap(t, "object")
    print(f"seed {seed}: object seen at P5 {h.count('P5')} times, moves {sum(a.startswith('Move') for a in executed_actions(t))}")
