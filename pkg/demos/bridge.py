# Spanning a gap between two uneven supports.
#
# A bridge goal asks for some block resting (through any chain of supports)
# on the left group and, in the same connected structure, some block resting
# on the right group.

from stackbuild import RenderSpec, derive_relations, plan, render_state
from stackbuild.corpus import load_manifest
from stackbuild.model import Bridge
from stackbuild.planner import replay

for name in ("unlevel_bridge", "unlevel_bridge_ordered", "symmetric_bridge"):
    inst = next(e for e in load_manifest() if e.name == name).load()
    result = plan(inst)
    final = replay(inst, result.plan)[-1]
    print(f"{name}: {result.plan.makespan} step(s) with {len(inst.grippers)} gripper(s)")
    print(render_state(final, RenderSpec()))
    goal = next(g for g in inst.goal if isinstance(g, Bridge))
    rel = derive_relations(final, goal.left, goal.right)
    for b in sorted(final.positions):
        print(f"  {b}: touches {', '.join(sorted(rel.side[b])) or 'nothing'}")
