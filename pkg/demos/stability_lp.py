# The stability check as a linear program.
#
# A structure stands if contact forces exist that balance gravity and a small
# sideways push on every block. Here a plank hangs two columns off a table
# with a counterweight of varying mass on its inner end.

import json

from stackbuild import check_static_equilibrium, extract_contacts, parse_instance, tower_oracle
from stackbuild.stability import dump_lp


def scene(w, eps=0.05):
    doc = {
        "format": 1,
        "surfaces": [{"id": "Table", "level": 0, "span": [0, 2]}],
        "blocks": [{"id": "A", "size": 3, "weight": 1.0}, {"id": "B", "size": 1, "weight": w}],
        "grippers": ["arm"],
        "initial": {"anchored": [{"block": "A", "x": 2, "h": 0}, {"block": "B", "x": 2, "h": 1}]},
        "goal": [],
        "makespan": 0,
        "physics": {"mu": 0.5, "epsilon": eps},
    }
    inst = parse_instance(json.dumps(doc), check_stability=False)
    return extract_contacts(inst.initial, inst.physics)


for w in (0.5, 1.0, 1.2, 1.25, 2.0):
    lp = check_static_equilibrium(scene(w))
    closed = tower_oracle(scene(w))
    print(f"w={w:<5} LP stable={lp.stable!s:<5} closed form stable={closed.stable!s:<5} "
          f"witness={lp.witness} case={lp.scenario}")

# Without sideways pushes only the torque balance at w = 1 matters
for w in (0.95, 1.05):
    print(f"w={w} eps=0 stable={check_static_equilibrium(scene(w, 0.0)).stable}")

print(dump_lp(scene(2.0))[:1200])
