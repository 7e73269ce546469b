# A temporary support.
#
# The goal leaves a plank hanging over a gap, but the plank can only be put
# down while a pillar props it up. The pillar is then taken away again.

from stackbuild import RenderSpec, plan
from stackbuild.corpus import load_manifest
from stackbuild.planner import replay
from stackbuild.render import render_states

inst = next(e for e in load_manifest() if e.name == "scaffold").load()
result = plan(inst)
for k, step in enumerate(result.plan.steps, start=1):
    print(f"{k}: " + "; ".join(map(str, step)))

# Watch the pillar come and go
for frame in render_states(replay(inst, result.plan), RenderSpec()):
    print(frame)
