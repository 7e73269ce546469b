"""Independent plan validation.

The validator keeps its own relational state (one anchor ``on`` fact per
block) and re-derives every position and relation with the literal-rule
fixpoint oracle after each step. It shares no code with the planner; the
only common pieces are the model types, the closure oracle and the
stability checker.

All violations are collected; an action that fails its preconditions is
reported and skipped, and replay continues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .closure import CircularityError, NonTermination, anchor_atom, bridge_holds, connectivity, \
    fixpoint_from_anchors, held_anchors, project, supported_closure
from .model import (Bridge, ExactCell, HeldAssembly, Overhang, Pick, Place, PlacedOn, PlacedOnAt,
                    Plan, ProblemInstance, ValidationError, WorldState)
from .stability import StabilityCache

CATEGORIES = ("precondition", "concurrency", "circularity", "stability", "held-stability", "goal", "format")


@dataclass(frozen=True)
class Violation:
    step: int
    category: str
    detail: str

    def __str__(self) -> str:
        return f"step {self.step}: [{self.category}] {self.detail}"


@dataclass
class _Held:
    root: str
    anchors: dict[str, tuple[str, int, int]]  # member -> (location, u, v), root excluded

    def offsets(self, sizes) -> dict[str, tuple[int, int]]:
        """Relative ``(level, column)`` of every member, root at ``(0, 0)``."""
        pos = {self.root: (0, 0)}
        pending = dict(self.anchors)
        while pending:
            progressed = False
            for m, (l, u, v) in list(pending.items()):
                if l in pos:
                    dh, dx = pos[l]
                    pos[m] = (dh + 1, dx + (u - 1) - (v - 1))
                    del pending[m]
                    progressed = True
            if not progressed:
                raise ValueError("assembly anchors do not reach the root")
        return pos


@dataclass
class _State:
    anchors: dict[str, tuple[str, int, int]]
    held: dict[str, _Held]
    frontier: int | None = None


@dataclass
class _View:
    """Relations of one relational state, from the oracle."""

    on: frozenset
    above: frozenset
    supported: frozenset
    positions: dict[str, tuple[int, int]] = field(default_factory=dict)
    occupied: dict[tuple[int, int], tuple[str, int]] = field(default_factory=dict)


class _Replay:
    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.scene = instance.scene
        self.sizes = {b.id: b.size for b in instance.scene.blocks}
        self.cache = StabilityCache(instance.scene, instance.physics)
        self.violations: list[Violation] = []
        init = instance.initial
        anchors = {b: anchor_atom(init, b)[1:] for b, _, _ in init.anchored}
        held = {}
        for a in init.held:
            member_anchors = {m: (l, u, v) for m, l, u, v in held_anchors(self.scene, a)}
            held[a.gripper] = _Held(a.root, member_anchors)
        self.state = _State(anchors, held, None)

    def report(self, step: int, category: str, detail: str) -> None:
        self.violations.append(Violation(step, category, detail))

    # -- relations ----------------------------------------------------------

    def view(self, state: _State, step: int) -> _View | None:
        anchors = [(b, l, u, v) for b, (l, u, v) in state.anchors.items()]
        held = [(h.root, [(m, l, u, v) for m, (l, u, v) in h.anchors.items()]) for h in state.held.values()]
        try:
            on, above, supported = fixpoint_from_anchors(self.scene, anchors, held)
        except CircularityError as exc:
            self.report(step, "circularity", str(exc))
            return None
        except NonTermination as exc:
            self.report(step, "precondition", f"relations diverge: {exc}")
            return None
        v = _View(on, above, supported)
        where: dict[tuple[str, int], set] = {}
        for h, b, u, x in above:
            where.setdefault((b, u), set()).add((x, h - 1))
        ok = True
        for b in state.anchors:
            for u in range(1, self.sizes[b] + 1):
                cells = where.get((b, u), set())
                if len(cells) != 1:
                    self.report(step, "precondition",
                                f"unit {u} of {b} has {len(cells)} global positions")
                    ok = False
                    continue
                cell = next(iter(cells))
                if cell in v.occupied:
                    self.report(step, "precondition", f"{b} and {v.occupied[cell][0]} collide at {cell}")
                    ok = False
                if self.scene.solid(*cell):
                    self.report(step, "precondition", f"{b} is inside the ground at {cell}")
                    ok = False
                v.occupied[cell] = (b, u)
            if ok and (b, 1) in where:
                x, h = next(iter(where[(b, 1)]))
                v.positions[b] = (x, h)
        return v if ok else None

    def world(self, state: _State, view: _View, t: int) -> WorldState:
        held = []
        for g, hd in state.held.items():
            rel = hd.offsets(self.sizes)
            held.append(HeldAssembly(g, hd.root, tuple((m, dh, dx) for m, (dh, dx) in rel.items())))
        anchored = tuple((b, x, h) for b, (x, h) in view.positions.items())
        return WorldState(self.scene, t, anchored, tuple(held), state.frontier)

    # -- one step -----------------------------------------------------------

    def step(self, k: int, actions, pre: _View) -> None:
        state = self.state
        scene = self.scene
        blocks = set(self.sizes)
        used_grippers = set()
        picks = []
        places = []
        for action in actions:
            g = action.gripper
            if g not in self.instance.grippers:
                self.report(k, "format", f"unknown gripper {g}")
                continue
            if g in used_grippers:
                self.report(k, "concurrency", f"gripper {g} acts twice")
                continue
            used_grippers.add(g)
            if isinstance(action, Pick):
                if action.block not in blocks:
                    self.report(k, "format", f"unknown block {action.block}")
                    continue
                members = self.check_pick(k, action, pre)
                if members is not None:
                    picks.append((action, members))
            else:
                if action.target not in blocks and not scene.is_surface(action.target):
                    self.report(k, "format", f"unknown location {action.target}")
                    continue
                placed = self.check_place(k, action, pre)
                if placed is not None:
                    places.append((action, *placed))

        # conflicts inside the step
        dropped = set()
        for i, (a, ma) in enumerate(picks):
            for b, mb in picks[i + 1:]:
                if ma & mb:
                    self.report(k, "concurrency", f"{a.gripper} and {b.gripper} pick overlapping blocks")
                    dropped.add(id(b))
        for i, (a, ca, _) in enumerate(places):
            for b, cb, _ in places[i + 1:]:
                if ca & cb:
                    self.report(k, "concurrency", f"{a.gripper} and {b.gripper} place into the same cells")
                    dropped.add(id(b))
        for p, members in picks:
            for q, _, below in places:
                if members & below:
                    self.report(k, "concurrency",
                                f"{p.gripper} picks {sorted(members & below)} while {q.gripper} places on it")
                    dropped.add(id(p))
        picks = [(a, m) for a, m in picks if id(a) not in dropped]
        places = [(a, c, s) for a, c, s in places if id(a) not in dropped]

        ordering = self.instance.ordered
        frontier = state.frontier
        if ordering is not None:
            for a, cells, _ in places:
                left = min(c for c, _ in cells)
                if frontier is not None and left < state.frontier - ordering.slack:
                    self.report(k, "precondition", f"ordering: {a.gripper} places at column {left} "
                                                   f"left of column {state.frontier}")
                frontier = left if frontier is None else max(frontier, left)

        for a, members in picks:
            root = a.block
            state.held[a.gripper] = _Held(root, {m: state.anchors[m] for m in members if m != root})
            for m in members:
                del state.anchors[m]
        for a, _, _ in places:
            hd = state.held.pop(a.gripper)
            state.anchors[hd.root] = (a.target, a.u, a.v)
            state.anchors.update(hd.anchors)
        state.frontier = frontier

    def check_pick(self, k: int, action: Pick, pre: _View):
        state = self.state
        if action.gripper in state.held:
            self.report(k, "precondition", f"{action.gripper} is already holding {state.held[action.gripper].root}")
            return None
        b = action.block
        if b not in state.anchors:
            self.report(k, "precondition", f"{b} is not on the structure")
            return None
        anchored_on = {(x, l) for x, l in project(pre.on) if x in state.anchors}
        members = {b} | {x for x, l in supported_closure(anchored_on) if l == b}
        for x, l in anchored_on:
            if x in members and x != b and l not in members:
                self.report(k, "precondition", f"cannot lift {b}: {x} also rests on {l}")
                return None
        return frozenset(members)

    def check_place(self, k: int, action: Place, pre: _View):
        state, scene = self.state, self.scene
        hd = state.held.get(action.gripper)
        if hd is None:
            self.report(k, "precondition", f"{action.gripper} holds nothing to place")
            return None
        if action.block is not None and action.block != hd.root:
            self.report(k, "precondition", f"{action.gripper} holds {hd.root}, not {action.block}")
            return None
        root_size = self.sizes[hd.root]
        if not 1 <= action.v <= root_size:
            self.report(k, "precondition", f"{hd.root} has no unit {action.v}")
            return None
        l = action.target
        if scene.is_surface(l):
            s = scene.surface[l]
            if not s.covers(action.u):
                self.report(k, "precondition", f"column {action.u} is not on {l}")
                return None
            col, level = action.u, s.level
        else:
            if l not in pre.positions:
                self.report(k, "precondition", f"target {l} is not on the structure")
                return None
            if not 1 <= action.u <= self.sizes[l]:
                self.report(k, "precondition", f"{l} has no unit {action.u}")
                return None
            lx, lh = pre.positions[l]
            col, level = lx + action.u - 1, lh + 1
        x0 = col - (action.v - 1)
        cells = set()
        lo, hi = scene.column_bounds
        for m, (dh, dx) in hd.offsets(self.sizes).items():
            for i in range(self.sizes[m]):
                cell = (x0 + dx + i, level + dh)
                if cell in pre.occupied:
                    self.report(k, "precondition", f"placing {hd.root}: cell {cell} is occupied")
                    return None
                if scene.solid(*cell) or not lo <= cell[0] <= hi:
                    self.report(k, "precondition", f"placing {hd.root}: cell {cell} is not free space")
                    return None
                cells.add(cell)
        below = {pre.occupied[(x, h - 1)][0] for x, h in cells if (x, h - 1) in pre.occupied}
        return frozenset(cells), frozenset(below)

    # -- checks on a resulting state ----------------------------------------

    def check_state(self, k: int, view: _View) -> WorldState | None:
        try:
            world = self.world(self.state, view, k)
        except (ValidationError, ValueError) as exc:
            self.report(k, "precondition", f"invalid state: {exc}")
            return None
        verdict = self.cache.structure(world)
        if not verdict.stable:
            self.report(k, "stability", f"structure unstable (witness {verdict.witness}, {verdict.scenario})")
        for a in world.held:
            v = self.cache.held(a.members, a.root)
            if not v.stable:
                self.report(k, "held-stability", f"assembly of {a.gripper} unstable (witness {v.witness})")
        return world

    def check_goal(self, k: int, view: _View | None) -> None:
        state = self.state
        if state.held:
            self.report(k, "goal", "grippers still holding: " + ", ".join(sorted(state.held)))
        if view is None:
            self.report(k, "goal", "final state could not be evaluated")
            return
        anchored_on = [(b, l) for b, l in project(view.on) if b in state.anchors]
        nodes = list(state.anchors) + [s.id for s in self.scene.surfaces]
        for atom in self.instance.goal:
            if isinstance(atom, Bridge):
                connected, side = connectivity(anchored_on, nodes, atom.left, atom.right)
                if not bridge_holds(connected, side, state.anchors):
                    self.report(k, "goal", "no connected pair of left- and right-side blocks")
            elif isinstance(atom, Overhang):
                s = self.scene.surface[atom.surface]
                connected, _ = connectivity(anchored_on, nodes)
                linked = {y for x, y in connected if x == s.id and y in state.anchors}
                covered = {x for (x, h), (b, _) in view.occupied.items() if b in linked}
                step, col = (1, s.hi + 1) if atom.edge == "right" else (-1, s.lo - 1)
                n = 0
                while col in covered:
                    n, col = n + 1, col + step
                if n < atom.min_units:
                    self.report(k, "goal", f"overhang past {s.id} {atom.edge} edge is {n} < {atom.min_units}")
            elif isinstance(atom, PlacedOn):
                if (atom.block, atom.target) not in set(anchored_on):
                    self.report(k, "goal", f"{atom.block} is not on {atom.target}")
            elif isinstance(atom, PlacedOnAt):
                if (atom.block, atom.target, atom.u, atom.v) not in view.on:
                    self.report(k, "goal", f"unit {atom.v} of {atom.block} is not on unit {atom.u} of {atom.target}")
            elif isinstance(atom, ExactCell):
                if view.positions.get(atom.block) != (atom.x, atom.h):
                    self.report(k, "goal", f"{atom.block} is not at column {atom.x}, level {atom.h}")


def replay_states(instance: ProblemInstance, plan: Plan):
    """Validate while yielding ``(step, WorldState | None)`` after each step,
    followed by the full violation list."""
    r = _Replay(instance)
    if len(plan.steps) > instance.makespan:
        r.report(instance.makespan + 1, "format",
                 f"plan has {len(plan.steps)} steps but the makespan bound is {instance.makespan}")
    view = r.view(r.state, 0)
    states = [r.check_state(0, view) if view is not None else None]
    for k, actions in enumerate(plan.steps, start=1):
        if view is None:
            r.report(k, "precondition", "previous state is invalid; replay stopped")
            break
        r.step(k, actions, view)
        view = r.view(r.state, k)
        states.append(r.check_state(k, view) if view is not None else None)
    r.check_goal(len(plan.steps), view)
    return states, r.violations


def validate_plan(instance: ProblemInstance, plan: Plan) -> list[Violation]:
    """Replay ``plan`` from the instance's initial state. An empty list means
    the plan is valid."""
    return replay_states(instance, plan)[1]


def validate_prefix(instance: ProblemInstance, plan: Plan) -> list[Violation]:
    """Violations of a partial plan, goal conditions excluded."""
    return [v for v in validate_plan(instance, plan) if v.category != "goal"]


def canonicalize(instance: ProblemInstance, plan: Plan) -> Plan:
    """Rewrite every placement to its leftmost-supported-unit anchor and name
    the placed root. The plan must replay without precondition errors."""
    states, _ = replay_states(instance, plan)
    steps = []
    for k, step in enumerate(plan.steps):
        before, after = states[k], states[k + 1]
        out = []
        for a in step:
            if isinstance(a, Place):
                root = before.holding[a.gripper].root
                a = _leftmost_anchor(before, after, a.gripper, root)
            out.append(a)
        steps.append(tuple(sorted(out, key=lambda a: a.gripper)))
    return Plan(tuple(steps))


def _leftmost_anchor(before: WorldState, after: WorldState, gripper: str, root: str) -> Place:
    # support is judged against the state the placement was issued in
    x, h = after.positions[root]
    for v in range(1, before.scene.size(root) + 1):
        c = x + v - 1
        below = before.grid.get((c, h - 1))
        if below is not None:
            return Place(gripper, below[0], below[1], v, root)
        s = before.scene.surface_at(c, h)
        if s is not None:
            return Place(gripper, s.id, c, v, root)
    raise ValueError(f"placement of {root} has no support")
