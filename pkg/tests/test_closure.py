import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import at, blk, make_instance, random_state, surf
from stackbuild.closure import (CircularityError, bridge_holds, compute_above, connected_components,
                                derive_on, derive_relations, fixpoint_oracle, overhang_extent, project,
                                supported_closure)
from stackbuild.corpus import load_manifest
from stackbuild.model import LEFT, RIGHT
from stackbuild.planner import plan, replay


def _state(surfaces, blocks, anchored, **kw):
    return make_instance(surfaces, blocks, anchored, check_stability=False, **kw).initial


def grid_view(state):
    on = derive_on(state)
    return on, compute_above(state), supported_closure(project(on))


# -- above ------------------------------------------------------------------


def test_above_small_block_on_table():
    s = _state([surf("Table", 0, 0, 9)], [blk("b", 1)], [at("b", 3, 0)])
    assert compute_above(s) == {(1, "b", 1, 3)}


def test_above_medium_on_small():
    s = _state([surf("Table", 0, 0, 9)], [blk("s", 1), blk("m", 3)], [at("s", 5, 0), at("m", 5, 1)])
    assert {a for a in compute_above(s) if a[1] == "m"} == {(2, "m", 1, 5), (2, "m", 2, 6), (2, "m", 3, 7)}


def test_above_empty():
    assert compute_above(_state([surf("Table", 0, 0, 9)], [], [])) == frozenset()


def test_held_blocks_have_no_above_atoms():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("a", 1)], [at("a", 0, 0)])
    from stackbuild.model import HeldAssembly
    s = inst.initial.evolve(anchored=(), held=(HeldAssembly("g", "a", (("a", 0, 0),)),))
    assert compute_above(s) == frozenset()


# -- on -----------------------------------------------------------------------


def test_neighbor_ramification():
    s = _state([surf("Table", 0, 0, 9)], [blk("s1", 1), blk("s2", 1), blk("m", 3)],
               [at("s1", 5, 0), at("s2", 7, 0), at("m", 5, 1)])
    on = derive_on(s)
    assert ("m", "s1", 1, 1) in on
    assert ("m", "s2", 1, 3) in on
    assert not any(a[0] == "m" and a[3] == 2 for a in on)


def test_long_block_overhang_only_where_supported():
    s = _state([surf("Table", 0, 0, 9)], [blk("L", 5), blk("m", 3)], [at("L", 0, 0), at("m", 3, 1)])
    assert {a for a in derive_on(s) if a[0] == "m"} == {("m", "L", 4, 1), ("m", "L", 5, 2)}


def test_sliding_a_pillar_under_adds_on_atom():
    # the counterweighted plank rests on the ledge, then a pillar appears below its free end
    surfaces = [surf("Ledge", 1, 0, 2), surf("Floor", 0, 4, 8)]
    blocks = [blk("M", 3), blk("C", 1, 3.0), blk("S", 1)]
    before = _state(surfaces, blocks, [at("M", 2, 1), at("C", 2, 2), at("S", 6, 0)])
    after = _state(surfaces, blocks, [at("M", 2, 1), at("C", 2, 2), at("S", 4, 0)])
    assert ("M", "S", 1, 3) not in derive_on(before)
    assert ("M", "S", 1, 3) in derive_on(after)
    assert ("M", "Ledge", 2, 1) in derive_on(after)


def test_held_assembly_contributes_internal_on():
    inst = make_instance([surf("Table", 0, 0, 5)], [blk("m", 3), blk("s", 1), blk("t", 1)], [at("t", 5, 0)], grippers=["g"],
                         held=[{"gripper": "g", "root": "m", "members": [{"block": "s", "dh": 1, "dx": 0}]}])
    on = derive_on(inst.initial)
    assert ("s", "m", 1, 1) in on
    assert ("t", "Table", 5, 1) in on


# -- supported ----------------------------------------------------------------


def test_supported_closure_examples():
    assert supported_closure({("b", "Table")}) == {("b", "Table")}
    assert supported_closure({("b", "c"), ("c", "Table")}) == {("b", "c"), ("c", "Table"), ("b", "Table")}
    with pytest.raises(CircularityError):
        supported_closure({("b", "c"), ("c", "b")})
    with pytest.raises(CircularityError):
        supported_closure({("b", "b")})


def _adversarial(rng: random.Random):
    nodes = [f"n{i}" for i in range(rng.randint(2, 9))]
    edges = set()
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            if rng.random() < 0.3:
                edges.add((a, b))
        if rng.random() < 0.5:
            edges.add((a, "Table"))
    cycle = rng.sample(nodes, rng.randint(1, len(nodes)))
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        edges.add((a, b))
    return edges, set(cycle)


def test_injected_cycles_always_detected():
    rng = random.Random(7)
    for _ in range(100):
        edges, cycle = _adversarial(rng)
        with pytest.raises(CircularityError) as exc:
            supported_closure(edges)
        assert exc.value.block in {n for e in edges for n in e}


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=15))
def test_closure_is_transitive_or_circular(pairs):
    # order pairs so that edges only point from higher to lower index: acyclic
    edges = {(f"n{max(a, b)}", f"n{min(a, b)}") for a, b in pairs if a != b}
    sup = supported_closure(edges)
    assert edges <= sup
    for a, b in sup:
        for c, d in sup:
            if b == c:
                assert (a, d) in sup
    assert all(a != b for a, b in sup)


# -- connectivity and overhang ------------------------------------------------


def test_disjoint_towers_are_separate():
    s = _state([surf("L", 0, 0, 1), surf("R", 0, 5, 6)], [blk("a", 1), blk("b", 1), blk("c", 1)],
               [at("a", 0, 0), at("b", 0, 1), at("c", 5, 0)])
    connected, side = connected_components(s, ["L"], ["R"])
    assert ("a", "b") in connected and ("b", "a") in connected
    assert ("a", "c") not in connected
    assert side["b"] == frozenset({LEFT})
    assert side["c"] == frozenset({RIGHT})
    assert not bridge_holds(connected, side, s.positions)


def test_plank_bridging_both_groups():
    s = _state([surf("L", 0, 0, 1), surf("R", 0, 3, 4)], [blk("p", 3), blk("top", 1)],
               [at("p", 1, 0), at("top", 2, 1)])
    connected, side = connected_components(s, ["L"], ["R"])
    assert side["p"] == side["top"] and len(side["p"]) == 2
    assert bridge_holds(connected, side, s.positions)


def test_side_contact_does_not_connect():
    s = _state([surf("L", 0, 0, 1), surf("R", 0, 2, 3)], [blk("a", 1), blk("b", 1)],
               [at("a", 1, 0), at("b", 2, 0)])
    connected, side = connected_components(s, ["L"], ["R"])
    assert ("a", "b") not in connected
    assert not bridge_holds(connected, side, s.positions)


def test_connected_symmetric_and_transitive():
    rng = random.Random(3)
    for _ in range(100):
        s = random_state(rng)
        rel = derive_relations(s, [x.id for x in s.scene.surfaces[:1]], [x.id for x in s.scene.surfaces[1:]])
        c = rel.connected
        assert all((b, a) in c for a, b in c)
        for a, b in c:
            for x, y in c:
                if b == x and a != y:
                    assert (a, y) in c


def test_overhang_extent_examples():
    table = surf("Table", 0, 0, 3)
    assert overhang_extent(_state([table], [blk("a", 3)], [at("a", 0, 0)]), _surface(table), "right") == 0
    s = _state([table], [blk("a", 3)], [at("a", 2, 0)])
    assert overhang_extent(s, _surface(table), "right") == 1
    assert overhang_extent(s, _surface(table), "left") == 0
    s = _state([table], [blk("a", 3)], [at("a", -1, 0)])
    assert overhang_extent(s, _surface(table), "left") == 1


def _surface(doc):
    from stackbuild.model import Surface
    return Surface(doc["id"], doc["level"], tuple(doc["span"]))


# -- grid derivation equals the literal-rule fixpoint ----------------------------


def test_fixpoint_single_block():
    s = _state([surf("Table", 0, 0, 9)], [blk("b", 1)], [at("b", 3, 0)])
    assert fixpoint_oracle(s) == grid_view(s)


def test_fixpoint_five_block_stack():
    rng = random.Random(11)
    for _ in range(50):
        s = random_state(rng, n_blocks=5, held=False)
        assert fixpoint_oracle(s) == grid_view(s)


def test_fixpoint_matches_on_random_states():
    rng = random.Random(2024)
    for _ in range(1000):
        s = random_state(rng)
        assert fixpoint_oracle(s) == grid_view(s)


def test_fixpoint_matches_along_corpus_plans():
    for entry in load_manifest():
        inst = entry.load()
        result = plan(inst)
        states = replay(inst, result.plan) if result.solved else [inst.initial]
        for s in states:
            assert fixpoint_oracle(s) == grid_view(s), (entry.name, s.t)


def test_above_is_a_function():
    rng = random.Random(5)
    for _ in range(200):
        s = random_state(rng)
        seen = {}
        for h, b, v, x in compute_above(s):
            assert (b, v) not in seen
            seen[(b, v)] = (h, x)
        assert len(seen) == sum(s.scene.size(b) for b in s.positions)


def test_random_states_never_circular():
    rng = random.Random(99)
    for _ in range(1000):
        s = random_state(rng)
        sup = supported_closure(project(derive_on(s)))
        assert all(a != b for a, b in sup)
