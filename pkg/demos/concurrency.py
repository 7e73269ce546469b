# Two grippers acting in the same step.
#
# In this scene no single placement is stable on its own; the two blocks
# only balance each other. Every plan within the horizon therefore has a step
# in which both grippers let go together.

from stackbuild import enumerate_plans
from stackbuild.validator import validate_prefix
from stackbuild.corpus import load_manifest, simultaneous_placements
from stackbuild.model import Place, Plan

inst = next(e for e in load_manifest() if e.name == "concurrency").load()
plans = sorted(enumerate_plans(inst), key=str)
print(len(plans), "plan(s)")
for p in plans:
    print("most placements in one step:", simultaneous_placements(p))
    for k, step in enumerate(p.steps, start=1):
        print(f"  {k}: " + "; ".join(map(str, step)))

# Serialize the concurrent step: the first placement alone already tips.
p = plans[0]
k = next(i for i, step in enumerate(p.steps) if all(isinstance(a, Place) for a in step) and len(step) == 2)
for first in p.steps[k]:
    print("alone:", first)
    for v in validate_prefix(inst, Plan(p.steps[:k] + ((first,),))):
        print(" ", v)
