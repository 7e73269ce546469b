# Replaying plans independently.
#
# The validator rebuilds every state from the plan text alone and reports
# everything wrong with it, step by step, instead of stopping at the first
# problem.

from stackbuild import Pick, Place, Plan, plan, validate_plan
from stackbuild.corpus import load_manifest

inst = next(e for e in load_manifest() if e.name == "counterweight").load()
good = plan(inst).plan
print("planner's plan:", validate_plan(inst, good) or "OK")

# Same moves, but the counterweight goes on the outer end of the plank
bad = Plan(((Pick("arm", "C"),), (Place("arm", "M", 3, 1),), (Pick("arm", "M"),),
            (Place("arm", "Table", 3, 1),)))
for v in validate_plan(inst, bad):
    print(v)

# A gripper that does not exist and a block that is not there
for v in validate_plan(inst, Plan(((Pick("crane", "M"), Pick("arm", "Q")),))):
    print(v)
