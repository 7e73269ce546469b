"""Builders, random generators and the brute-force plan oracle used by tests."""

from __future__ import annotations

import itertools
import json
import random

from stackbuild.model import Pick, Place, Plan, Scene, WorldState, parse_instance
from stackbuild.stability import (GROUND, Body, Contact, ContactProblem, extract_contacts,
                                  tower_oracle)
from stackbuild.planner import NotPickable, lift, pickable_set
from stackbuild.validator import canonicalize, replay_states, validate_plan


def surf(i, level, lo, hi):
    return {"id": i, "level": level, "span": [lo, hi]}


def blk(i, size, weight=1.0, centroid_offset=None):
    d = {"id": i, "size": size, "weight": weight}
    if centroid_offset is not None:
        d["centroid_offset"] = centroid_offset
    return d


def at(b, x, h):
    return {"block": b, "x": x, "h": h}


def instance_doc(surfaces, blocks, anchored, *, grippers=("arm",), goal=(), makespan=2,
                 held=(), physics=None, ordering=()):
    doc = {
        "format": 1,
        "surfaces": list(surfaces),
        "blocks": list(blocks),
        "grippers": list(grippers),
        "initial": {"anchored": list(anchored), "held": list(held)},
        "goal": list(goal),
        "makespan": makespan,
        "ordering": list(ordering),
    }
    if physics is not None:
        doc["physics"] = physics
    return doc


def make_instance(*args, check_stability=True, **kw):
    return parse_instance(json.dumps(instance_doc(*args, **kw)), check_stability=check_stability)


# ---------------------------------------------------------------------------
# Random states
# ---------------------------------------------------------------------------


def random_scene(rng: random.Random, n_blocks: int) -> Scene:
    from stackbuild.model import BlockSpec, Surface
    surfaces = []
    x = 0
    for i in range(rng.randint(1, 3)):
        width = rng.randint(1, 5)
        surfaces.append(Surface(f"S{i}", rng.randint(0, 2), (x, x + width - 1)))
        x += width + rng.randint(0, 3)
    blocks = [BlockSpec(f"b{i}", rng.choice((1, 3, 5)), rng.choice((1.0, 2.0, 3.0)))
              for i in range(n_blocks)]
    return Scene(tuple(surfaces), tuple(blocks))


def drop(scene: Scene, placed: dict[tuple[int, int], str], size: int, x: int) -> int | None:
    """Level at which a block of ``size`` with leftmost column ``x`` comes to
    rest when lowered from above, or None if nothing is beneath it."""
    tops = []
    for c in range(x, x + size):
        top = None
        for s in scene.surfaces:
            if s.covers(c):
                top = s.level
        levels = [h + 1 for (cc, h) in placed if cc == c]
        if levels:
            top = max(levels + ([top] if top is not None else []))
        if top is not None:
            tops.append(top)
    return max(tops) if tops else None


def random_state(rng: random.Random, n_blocks: int | None = None, held: bool = True) -> WorldState:
    """A model-valid state (stability not required) built by dropping blocks
    at random columns and, optionally, lifting a few pickable sets."""
    scene = random_scene(rng, n_blocks if n_blocks is not None else rng.randint(1, 7))
    lo = min(s.lo for s in scene.surfaces)
    hi = max(s.hi for s in scene.surfaces)
    placed: dict[tuple[int, int], str] = {}
    anchored = []
    for b in scene.blocks:
        for _ in range(20):
            x = rng.randint(lo - b.size + 1, hi)
            h = drop(scene, placed, b.size, x)
            if h is not None:
                break
        else:
            continue
        anchored.append((b.id, x, h))
        for c in range(x, x + b.size):
            placed[(c, h)] = b.id
    state = WorldState(scene, 0, tuple(anchored))
    if held and anchored:
        for g in ("g1", "g2"):
            if rng.random() < 0.4 and state.anchored:
                b = rng.choice(state.anchored)[0]
                try:
                    members = pickable_set(state, b)
                except NotPickable:
                    continue
                a = lift(state, g, b, members)
                rest = tuple(e for e in state.anchored if e[0] not in members)
                state = WorldState(scene, 0, rest, state.held + (a,))
    return state


def random_tower(rng: random.Random, n: int | None = None):
    """A serial tower on a table: every block rests on the previous one only."""
    from stackbuild.model import BlockSpec, Surface
    n = n if n is not None else rng.randint(1, 5)
    sizes = [rng.choice((1, 3, 5)) for _ in range(n)]
    blocks = tuple(BlockSpec(f"t{i}", s, round(rng.uniform(0.5, 3.0), 3)) for i, s in enumerate(sizes))
    base_w = rng.randint(1, 5)
    table = Surface("Table", 0, (0, base_w - 1))
    anchored = []
    x = rng.randint(-sizes[0] + 1, base_w - 1)
    anchored.append(("t0", x, 0))
    for i in range(1, n):
        prev_x, prev_s = x, sizes[i - 1]
        x = rng.randint(prev_x - sizes[i] + 1, prev_x + prev_s - 1)
        anchored.append((f"t{i}", x, i))
    return WorldState(Scene((table,), blocks), 0, tuple(anchored))


# ---------------------------------------------------------------------------
# Stability fixtures
# ---------------------------------------------------------------------------


def tower_margin(problem: ContactProblem) -> float:
    """Smallest distance from a shifted load centroid to its contact edge;
    negative when the tower falls."""
    free = {b.id: b for b in problem.bodies if not b.fixed}
    above_of = {c.lower: c for c in problem.contacts}
    base = next(c for c in problem.contacts if c.lower == GROUND)
    chain, c = [], base
    while c is not None:
        chain.append(c)
        c = above_of.get(c.upper)
    worst = float("inf")
    for k, ct in enumerate(chain):
        load = [free[x.upper] for x in chain[k:]]
        w = sum(b.weight for b in load)
        xbar = sum(b.weight * b.cx for b in load) / w
        ybar = sum(b.weight * b.cy for b in load) / w
        m = problem.epsilon * (ybar - ct.y)
        worst = min(worst, xbar - m - ct.x_a, ct.x_b - xbar - m)
    return worst


def harmonic_problem(epsilon: float) -> ContactProblem:
    """Four unit blocks with overhangs 1/8, 1/6, 1/4, 1/2 from the bottom up."""
    overhangs = [1 / 8, 1 / 6, 1 / 4, 1 / 2]     # bottom to top
    right = []
    r = 0.0
    for d in overhangs:
        r += d
        right.append(r)
    bodies = [Body(GROUND, 0, 0, 0, fixed=True)]
    contacts = [Contact(GROUND, "h1", right[0] - 1, 0.0, 0.0)]
    for i, r in enumerate(right, start=1):
        bodies.append(Body(f"h{i}", 1.0, r - 0.5, i - 0.5))
        if i > 1:
            contacts.append(Contact(f"h{i - 1}", f"h{i}", r - 1, right[i - 2], float(i - 1)))
    return ContactProblem(tuple(bodies), tuple(contacts), 0.5, epsilon)


def counterweight_problem(w: float, eps: float = 0.05):
    """Medium A hangs two units past a 3-cell table; small B of weight w sits on its inner end."""
    inst = make_instance([surf("Table", 0, 0, 2)], [blk("A", 3), blk("B", 1, w)],
                         [at("A", 2, 0), at("B", 2, 1)], check_stability=False,
                         physics={"mu": 0.5, "epsilon": eps, "slack": 1e-9})
    return extract_contacts(inst.initial, inst.physics)


def counterweight_threshold(eps: float) -> float:
    """Smallest stable counterweight, by bisection on the closed-form oracle."""
    lo, hi = 0.0, 10.0
    for _ in range(80):
        mid = (lo + hi) / 2
        if tower_oracle(counterweight_problem(mid, eps), tol=0).stable:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Brute-force plan oracle
# ---------------------------------------------------------------------------


def raw_actions(instance, state: WorldState, gripper: str):
    """Every syntactically possible action for one gripper. Placements are
    only offered to a gripper that holds something; all other filtering is
    left to the validator."""
    scene = instance.scene
    out = [None]
    holding = state.holding.get(gripper)
    if holding is None:
        out += [Pick(gripper, b.id) for b in scene.blocks]
        return out
    size = scene.size(holding.root)
    targets = []
    for b in scene.blocks:
        targets += [(b.id, u) for u in range(1, b.size + 1)]
    for s in scene.surfaces:
        targets += [(s.id, u) for u in range(s.lo, s.hi + 1)]
    for (t, u) in targets:
        for v in range(1, size + 1):
            out.append(Place(gripper, t, u, v))
    return out


def _step_local_ok(violations, k):
    return not any(v.step == k and v.category in ("precondition", "format") for v in violations)


def brute_force_plans(instance) -> set[Plan]:
    """All valid plans of makespan <= T made of non-empty steps, found by
    enumerating raw action tuples and filtering with the validator."""
    found: set[Plan] = set()

    def extend(prefix: tuple):
        p = Plan(prefix)
        states, violations = replay_states(instance, p)
        if any(v.category != "goal" for v in violations):
            return
        if not violations:
            found.add(canonicalize(instance, p))
        if len(prefix) == instance.makespan:
            return
        state = states[-1]
        k = len(prefix) + 1
        per_gripper = []
        for g in instance.grippers:
            ok = [None]
            for a in raw_actions(instance, state, g)[1:]:
                vs = validate_plan(instance, Plan(prefix + ((a,),)))
                if _step_local_ok(vs, k):
                    ok.append(a)
            per_gripper.append(ok)
        for combo in itertools.product(*per_gripper):
            step = tuple(a for a in combo if a is not None)
            if step:
                extend(prefix + (step,))

    extend(())
    return found
