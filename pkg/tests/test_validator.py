import random
from dataclasses import replace

import pytest

from helpers import at, blk, make_instance, surf
from stackbuild.corpus import load_manifest, without_block
from stackbuild.model import Pick, Place, Plan
from stackbuild.planner import Rejected, apply, check_goal, plan
from stackbuild.validator import (_Replay, canonicalize, replay_states, validate_plan,
                                  validate_prefix)


@pytest.fixture(scope="module")
def corpus_plans():
    out = {}
    for entry in load_manifest():
        inst = entry.load()
        result = plan(inst)
        if result.solved:
            out[entry.name] = (inst, result.plan)
    return out


def categories(violations):
    return {v.category for v in violations}


def planner_accepts(inst, p: Plan) -> bool:
    if len(p.steps) > inst.makespan:
        return False
    s = inst.initial
    try:
        for step in p.steps:
            s = apply(s, step, inst)
    except Rejected:
        return False
    return check_goal(s, inst.goal)


def test_empty_plan_on_satisfied_goal():
    inst = make_instance([surf("Table", 0, 0, 3)], [blk("A", 1)], [at("A", 0, 0)],
                         goal=[{"type": "exact_cell", "block": "A", "x": 0, "h": 0}])
    assert validate_plan(inst, Plan()) == []


def test_held_block_at_the_end_fails_goal():
    inst = make_instance([surf("L", 0, 0, 1), surf("R", 0, 3, 4)], [blk("M", 3)], [at("M", 0, 0)],
                         goal=[{"type": "bridge", "left": ["L"], "right": ["R"]}])
    vs = validate_plan(inst, Plan(((Pick("arm", "M"),),)))
    assert categories(vs) == {"goal"}


def test_corpus_plans_validate(corpus_plans):
    for name, (inst, p) in corpus_plans.items():
        assert validate_plan(inst, p) == [], name


def test_counterweight_deletion_tips_the_overhang(corpus_plans):
    inst, p = corpus_plans["overhang4"]
    broken = without_block(p, "C")
    vs = validate_plan(inst, broken)
    stab = [v for v in vs if v.category == "stability"]
    assert stab
    # the step that puts the plank down is the one that tips
    place_step = next(k for k, step in enumerate(broken.steps, start=1)
                      if any(isinstance(a, Place) and a.block == "L" for a in step))
    assert stab[0].step == place_step


def _mutants(p: Plan, rng: random.Random, inst):
    steps = list(p.steps)
    out = []
    for i in range(len(steps)):
        out.append(Plan(tuple(steps[:i] + steps[i + 1:])))
    for i in range(len(steps)):
        for j in range(i + 1, len(steps)):
            s = steps[:]
            s[i], s[j] = s[j], s[i]
            out.append(Plan(tuple(s)))
    for i, step in enumerate(steps):
        for a_idx, a in enumerate(step):
            if isinstance(a, Place):
                for delta in (-2, -1, 1, 2):
                    s = steps[:]
                    new = replace(a, u=a.u + delta)
                    s[i] = step[:a_idx] + (new,) + step[a_idx + 1:]
                    out.append(Plan(tuple(s)))
    rng.shuffle(out)
    return out


def test_mutations_agree_with_planner_semantics(corpus_plans):
    rng = random.Random(0)
    invalid = 0
    for name, (inst, p) in corpus_plans.items():
        for m in _mutants(p, rng, inst):
            vs = validate_plan(inst, m)
            if vs:
                invalid += 1
                assert not planner_accepts(inst, m), (name, m)
            else:
                assert planner_accepts(inst, canonicalize(inst, m)), (name, m)
    assert invalid > 100


def test_format_violations():
    inst = make_instance([surf("Table", 0, 0, 3)], [blk("A", 1)], [at("A", 0, 0)])
    assert "format" in categories(validate_plan(inst, Plan(((Pick("ghost", "A"),),))))
    assert "format" in categories(validate_plan(inst, Plan(((Pick("arm", "Z"),),))))
    long = Plan(((Pick("arm", "A"),), (Place("arm", "Table", 1, 1),), (Pick("arm", "A"),)))
    assert "format" in categories(validate_plan(inst, long))


def test_precondition_violations():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1), blk("B", 1)], [at("A", 0, 0), at("B", 0, 1)],
                         makespan=3)
    # placing with an empty gripper
    vs = validate_plan(inst, Plan(((Place("arm", "Table", 3, 1),),)))
    assert "precondition" in categories(vs)
    # placing onto an occupied cell
    vs = validate_plan(inst, Plan(((Pick("arm", "B"),), (Place("arm", "Table", 0, 1),))))
    assert "precondition" in categories(vs)
    # picking a block twice
    vs = validate_plan(inst, Plan(((Pick("arm", "B"),), (Pick("arm", "A"),))))
    assert "precondition" in categories(vs)


def test_plank_on_two_towers_cannot_be_lifted_with_one():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("s", 1), blk("t", 1), blk("p", 3)],
                         [at("s", 0, 0), at("t", 2, 0), at("p", 0, 1)])
    vs = validate_plan(inst, Plan(((Pick("arm", "s"),),)))
    assert "precondition" in categories(vs)


def test_concurrency_violations():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1), blk("B", 1)], [at("A", 0, 0), at("B", 0, 1)],
                         grippers=["l", "r"])
    # two grippers on one block
    vs = validate_plan(inst, Plan(((Pick("l", "B"), Pick("r", "B")),)))
    assert "concurrency" in categories(vs)
    # picking a block that carries the other one already picked
    vs = validate_plan(inst, Plan(((Pick("l", "A"), Pick("r", "B")),)))
    assert "concurrency" in categories(vs)
    # one gripper, two actions
    vs = validate_plan(inst, Plan(((Pick("l", "B"), Pick("l", "A")),)))
    assert "concurrency" in categories(vs)


def test_same_cell_double_placement():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1), blk("B", 1)], [at("A", 0, 0), at("B", 1, 0)],
                         grippers=["l", "r"])
    p = Plan(((Pick("l", "A"), Pick("r", "B")), (Place("l", "Table", 4, 1), Place("r", "Table", 4, 1))))
    assert "concurrency" in categories(validate_plan(inst, p))


def test_pick_under_a_placement_conflicts():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1), blk("B", 1)], [at("A", 0, 0), at("B", 3, 0)],
                         grippers=["l", "r"], makespan=3)
    p = Plan(((Pick("l", "A"),), (Place("l", "B", 1, 1), Pick("r", "B"))))
    assert "concurrency" in categories(validate_plan(inst, p))


def test_stability_violation():
    inst = make_instance([surf("Table", 0, 0, 3)], [blk("M", 3)], [at("M", 0, 0)],
                         goal=[{"type": "exact_cell", "block": "M", "x": 3, "h": 0}])
    p = Plan(((Pick("arm", "M"),), (Place("arm", "Table", 3, 1),)))
    vs = validate_plan(inst, p)
    assert [v.category for v in vs] == ["stability"]
    assert vs[0].step == 2


def test_held_stability_violation():
    # Lifting a stable grid structure always gives a stable assembly (members
    # keep their contacts and the root only gets stiffer), so start from a
    # grid where T already hangs off M's last unit.
    inst = make_instance([surf("Table", 0, 0, 6)], [blk("M", 3), blk("T", 3)],
                         [at("M", 0, 0), at("T", 2, 1)], check_stability=False)
    vs = validate_plan(inst, Plan(((Pick("arm", "M"),),)))
    assert ("held-stability", 1) in {(v.category, v.step) for v in vs}
    assert ("stability", 0) in {(v.category, v.step) for v in vs}


def test_circularity_is_reported():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1), blk("B", 1)], [at("A", 0, 0), at("B", 0, 1)])
    r = _Replay(inst)
    r.state.anchors = {"A": ("B", 1, 1), "B": ("A", 1, 1)}
    assert r.view(r.state, 3) is None
    assert [(v.step, v.category) for v in r.violations] == [(3, "circularity")]


def test_validate_all_collects_every_violation():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1)], [at("A", 0, 0)],
                         goal=[{"type": "exact_cell", "block": "A", "x": 4, "h": 0}], makespan=3)
    p = Plan(((Place("arm", "Table", 3, 1),), (Pick("arm", "Z"),), (Pick("arm", "A"),)))
    vs = validate_plan(inst, p)
    assert {v.step for v in vs} >= {1, 2, 3}
    assert "goal" in categories(vs)


def test_prefix_ignores_goal():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("A", 1)], [at("A", 0, 0)],
                         goal=[{"type": "exact_cell", "block": "A", "x": 4, "h": 0}])
    assert validate_prefix(inst, Plan(((Pick("arm", "A"),),))) == []


def test_canonicalize_picks_leftmost_supported_unit():
    inst = make_instance([surf("Table", 0, 0, 6)], [blk("s", 1), blk("m", 3)], [at("s", 3, 0), at("m", 0, 0)],
                         makespan=2)
    # m's unit 2 sits on s: the leftmost supported unit is 2
    p = Plan(((Pick("arm", "m"),), (Place("arm", "s", 1, 2),)))
    assert validate_plan(inst, p) == []
    assert canonicalize(inst, p).steps[1] == (Place("arm", "s", 1, 2, "m"),)
    states, _ = replay_states(inst, p)
    assert states[-1].positions["m"] == (2, 1)


def test_replay_states_match_planner():
    inst = next(e for e in load_manifest() if e.name == "scaffold").load()
    p = plan(inst).plan
    states, vs = replay_states(inst, p)
    assert vs == []
    s = inst.initial
    for k, step in enumerate(p.steps, start=1):
        s = apply(s, step, inst)
        assert states[k].key() == s.key()
