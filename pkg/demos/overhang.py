# Building out past a table edge.
#
# A plank can reach four columns past the table only if something heavy sits
# on its inner end while it is put down. The planner finds that order on its
# own; taking the counterweight out of the plan makes the validator object.

from stackbuild import RenderSpec, plan, render_state, validate_plan
from stackbuild.closure import overhang_extent
from stackbuild.corpus import load_manifest, without_block
from stackbuild.planner import replay

entry = next(e for e in load_manifest() if e.name == "overhang4")
inst = entry.load()
result = plan(inst)
print("plan:")
for k, step in enumerate(result.plan.steps, start=1):
    print(f"  {k}: " + "; ".join(map(str, step)))
print("search:", result.stats.as_dict())

final = replay(inst, result.plan)[-1]
print(render_state(final, RenderSpec()))

# How far does it reach past each edge of each surface?
for s in inst.surfaces:
    print(s.id, "left", overhang_extent(final, s, "left"), "right", overhang_extent(final, s, "right"))

# Same plan without the counterweight
for v in validate_plan(inst, without_block(result.plan, "C")):
    print(v)
