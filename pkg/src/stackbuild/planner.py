"""Bounded-makespan search over truly concurrent joint actions.

Each step applies a set of per-gripper actions simultaneously; stability is
checked on the state after the whole step, never between its actions. The
planner deepens the horizon one step at a time and explores each horizon
depth-first, so the first plan found has minimal makespan and exhausting
the last horizon proves there is none.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Iterator

from .closure import (bridge_holds, connected_components, derive_on, overhang_extent,
                      project, supported_closure)
from .model import (Action, Bridge, ExactCell, GoalSpec, HeldAssembly, Overhang, Pick, Place,
                    PlacedOn, PlacedOnAt, Plan, ProblemInstance, WorldState, action_key,
                    assembly_cells)
from .stability import StabilityCache

JointAction = tuple[Action, ...]


class NotPickable(Exception):
    def __init__(self, block: str, reason: str):
        super().__init__(f"{block}: {reason}")
        self.block = block
        self.reason = reason


class Rejected(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class ResourceLimit(Exception):
    def __init__(self, kind: str, stats: "SearchStats"):
        super().__init__(f"{kind} limit reached")
        self.kind = kind
        self.stats = stats


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    pruned_unstable: int = 0
    duplicates: int = 0
    horizons: int = 0
    lp_calls: int = 0
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "nodes_expanded": self.nodes_expanded,
            "pruned_unstable": self.pruned_unstable,
            "duplicates": self.duplicates,
            "horizons_searched": self.horizons,
            "lp_calls": self.lp_calls,
        }


@dataclass(frozen=True)
class Unsat:
    makespan: int


@dataclass
class SearchResult:
    outcome: Plan | Unsat
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def plan(self) -> Plan | None:
        return self.outcome if isinstance(self.outcome, Plan) else None

    @property
    def solved(self) -> bool:
        return isinstance(self.outcome, Plan)


# ---------------------------------------------------------------------------
# Action semantics
# ---------------------------------------------------------------------------


def pickable_set(state: WorldState, block: str) -> frozenset[str]:
    """The subassembly lifted when ``block`` is picked: the block plus
    everything it supports, provided nothing in it rests outside it."""
    if block not in state.positions:
        raise NotPickable(block, "not anchored")
    on = [(b, l) for b, l, _, _ in derive_on(state) if b in state.positions]
    supported = supported_closure(on)
    members = {block} | {b for b, l in supported if l == block}
    for b, l in on:
        if b in members and b != block and l not in members:
            raise NotPickable(block, f"externally supported member {b} rests on {l}")
    return frozenset(members)


def lift(state: WorldState, gripper: str, block: str, members: frozenset[str]) -> HeldAssembly:
    x0, h0 = state.positions[block]
    rel = tuple((m, state.positions[m][1] - h0, state.positions[m][0] - x0) for m in members)
    return HeldAssembly(gripper, block, rel)


@dataclass(frozen=True)
class _Placement:
    action: Place
    x: int
    h: int
    cells: frozenset[tuple[int, int]]
    supporters: frozenset[str]


def _placements(state: WorldState, assembly: HeldAssembly) -> list[_Placement]:
    scene, grid = state.scene, state.grid
    root_size = scene.size(assembly.root)
    lo, hi = scene.column_bounds
    seats = set()
    for (x, h) in grid:
        seats.add((x, h + 1))
    for s in scene.surfaces:
        for x in range(s.lo, s.hi + 1):
            seats.add((x, s.level))
    origins = {(c - v + 1, h) for c, h in seats for v in range(1, root_size + 1)}
    out = []
    for x, h in sorted(origins):
        cells = assembly_cells(scene, assembly, x, h)
        if any(c in grid or scene.solid(*c) or not lo <= c[0] <= hi for c in cells):
            continue
        anchor = None
        for v in range(1, root_size + 1):
            c = x + v - 1
            below = grid.get((c, h - 1))
            if below is not None:
                anchor = (below[0], below[1], v)
                break
            surf = scene.surface_at(c, h)
            if surf is not None:
                anchor = (surf.id, c, v)
                break
        if anchor is None:
            continue
        action = Place(assembly.gripper, anchor[0], anchor[1], anchor[2], assembly.root)
        supporters = frozenset(state.supporters_below(cells)) & frozenset(state.positions)
        out.append(_Placement(action, x, h, frozenset(cells), supporters))
    return out


@dataclass(frozen=True)
class _Option:
    action: Action
    touched: frozenset[str]
    targets: frozenset[str] = frozenset()
    cells: frozenset[tuple[int, int]] = frozenset()
    payload: object = None


def _gripper_options(state: WorldState, gripper: str) -> list[_Option]:
    held = state.holding.get(gripper)
    if held is None:
        out = []
        for b, _, _ in state.anchored:
            try:
                members = pickable_set(state, b)
            except NotPickable:
                continue
            out.append(_Option(Pick(gripper, b), members, payload=members))
        return out
    return [_Option(p.action, held.blocks, p.supporters, p.cells, p) for p in _placements(state, held)]


def _compatible(a: _Option, b: _Option) -> bool:
    if a.touched & b.touched or a.cells & b.cells:
        return False
    if a.touched & b.targets or b.touched & a.targets:
        return False
    return True


def _joint_options(state: WorldState, instance: ProblemInstance) -> list[tuple[_Option, ...]]:
    per_gripper = [[None] + _gripper_options(state, g) for g in instance.grippers]
    joint = []
    for combo in itertools.product(*per_gripper):
        chosen = [o for o in combo if o is not None]
        if all(_compatible(a, b) for a, b in itertools.combinations(chosen, 2)):
            joint.append(tuple(sorted(chosen, key=lambda o: action_key(o.action))))
    joint.sort(key=lambda opts: [_tie_key(o) for o in opts])
    return joint


def _tie_key(option: _Option) -> tuple:
    a = option.action
    if isinstance(a, Pick):
        return (a.gripper, 0, a.block, 0, 0)
    p = option.payload
    return (a.gripper, 1, a.block, p.x, p.h)


def enumerate_joint_actions(state: WorldState, instance: ProblemInstance) -> list[JointAction]:
    """Every conflict-free combination of per-gripper actions, the empty
    joint action included, in tie-breaking order."""
    return [tuple(o.action for o in opts) for opts in _joint_options(state, instance)]


def _apply_options(state: WorldState, options: tuple[_Option, ...], instance: ProblemInstance,
                   cache: StabilityCache) -> WorldState:
    scene = state.scene
    anchored = {b: (x, h) for b, x, h in state.anchored}
    held = dict(state.holding)
    frontier = state.frontier
    ordering = instance.ordered
    new_frontier = frontier
    picked = []
    for opt in options:
        a = opt.action
        if isinstance(a, Pick):
            assembly = lift(state, a.gripper, a.block, opt.payload)
            for m in opt.payload:
                del anchored[m]
            held[a.gripper] = assembly
            picked.append(assembly)
        else:
            p: _Placement = opt.payload
            assembly = held.pop(a.gripper)
            for m, dh, dx in assembly.members:
                anchored[m] = (p.x + dx, p.h + dh)
            left = min(c for c, _ in p.cells)
            if ordering is not None:
                if frontier is not None and left < frontier - ordering.slack:
                    raise Rejected("ordering", f"{a.block} placed at column {left} after column {frontier}")
                new_frontier = left if new_frontier is None else max(new_frontier, left)
    nxt = WorldState(scene, state.t + 1, tuple((b, x, h) for b, (x, h) in anchored.items()),
                     tuple(held.values()), new_frontier)
    verdict = cache.structure(nxt)
    if not verdict.stable:
        raise Rejected("unstable", f"witness {verdict.witness} under {verdict.scenario}")
    for assembly in picked:
        v = cache.held(assembly.members, assembly.root)
        if not v.stable:
            raise Rejected("held unstable", f"{assembly.gripper}: witness {v.witness}")
    return nxt


def apply(state: WorldState, ja: JointAction, instance: ProblemInstance,
          cache: StabilityCache | None = None) -> WorldState:
    """Apply a joint action from :func:`enumerate_joint_actions`; raises
    :class:`Rejected` when the successor is unstable or breaks ordering."""
    cache = cache or StabilityCache(instance.scene, instance.physics)
    holding = state.holding
    wanted = set()
    for a in ja:
        if isinstance(a, Place) and a.block is None and a.gripper in holding:
            a = replace(a, block=holding[a.gripper].root)
        wanted.add(action_key(a))
    for opts in _joint_options(state, instance):
        if {action_key(o.action) for o in opts} == wanted and len(opts) == len(ja):
            return _apply_options(state, opts, instance, cache)
    raise Rejected("inapplicable", "joint action is not enabled in this state")


# ---------------------------------------------------------------------------
# Goals
# ---------------------------------------------------------------------------


def check_goal(state: WorldState, goal: GoalSpec) -> bool:
    """All conjuncts hold and every gripper is empty."""
    if state.held:
        return False
    atoms = list(goal)
    if not atoms:
        return True
    on = derive_on(state)
    on_aux = project(on)
    scene = state.scene
    for atom in atoms:
        if isinstance(atom, Bridge):
            connected, side = connected_components(state, atom.left, atom.right)
            if not bridge_holds(connected, side, state.positions):
                return False
        elif isinstance(atom, Overhang):
            if overhang_extent(state, scene.surface[atom.surface], atom.edge) < atom.min_units:
                return False
        elif isinstance(atom, PlacedOn):
            if (atom.block, atom.target) not in on_aux:
                return False
        elif isinstance(atom, PlacedOnAt):
            if (atom.block, atom.target, atom.u, atom.v) not in on:
                return False
        elif isinstance(atom, ExactCell):
            if state.positions.get(atom.block) != (atom.x, atom.h):
                return False
    return True


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


class _Search:
    def __init__(self, instance: ProblemInstance, max_nodes: int | None, time_limit: float | None):
        self.instance = instance
        self.cache = StabilityCache(instance.scene, instance.physics)
        self.stats = SearchStats()
        self.max_nodes = max_nodes
        self.deadline = None if time_limit is None else time.monotonic() + time_limit
        self._successors: dict[tuple, list[tuple[JointAction, WorldState]]] = {}
        self._goal: dict[tuple, bool] = {}

    def goal(self, state: WorldState) -> bool:
        k = state.key()
        if k not in self._goal:
            self._goal[k] = check_goal(state, self.instance.goal)
        return self._goal[k]

    def successors(self, state: WorldState) -> list[tuple[JointAction, WorldState]]:
        k = state.key()
        found = self._successors.get(k)
        if found is not None:
            return found
        self.stats.nodes_expanded += 1
        if self.max_nodes is not None and self.stats.nodes_expanded > self.max_nodes:
            raise ResourceLimit("nodes", self.stats)
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise ResourceLimit("time", self.stats)
        out = []
        for opts in _joint_options(state, self.instance):
            if not opts:
                continue
            try:
                nxt = _apply_options(state, opts, self.instance, self.cache)
            except Rejected:
                self.stats.pruned_unstable += 1
                continue
            out.append((tuple(o.action for o in opts), nxt))
        self._successors[k] = out
        return out


def plan(instance: ProblemInstance, *, max_nodes: int | None = None,
         time_limit: float | None = None) -> SearchResult:
    """Iterative deepening over horizons ``0..T``.

    Within a horizon the search is depth-first in tie-breaking order with
    duplicate pruning: a state reached again at the same or a later depth
    is skipped. Raises :class:`ResourceLimit` when a cap is hit.
    """
    search = _Search(instance, max_nodes, time_limit)
    started = time.monotonic()
    start = instance.initial

    def dfs(state: WorldState, depth: int, horizon: int, seen: dict) -> list[JointAction] | None:
        if search.goal(state):
            return []
        if depth == horizon:
            return None
        for ja, nxt in search.successors(state):
            k = nxt.key()
            if seen.get(k, horizon + 1) <= depth + 1:
                search.stats.duplicates += 1
                continue
            seen[k] = depth + 1
            rest = dfs(nxt, depth + 1, horizon, seen)
            if rest is not None:
                return [ja] + rest
        return None

    try:
        for horizon in range(instance.makespan + 1):
            search.stats.horizons = horizon + 1
            steps = dfs(start, 0, horizon, {start.key(): 0})
            if steps is not None:
                return SearchResult(Plan(tuple(steps)), _finish(search, started))
    except ResourceLimit as exc:
        _finish(search, started)
        raise exc
    return SearchResult(Unsat(instance.makespan), _finish(search, started))


def _finish(search: _Search, started: float) -> SearchStats:
    search.stats.lp_calls = search.cache.lp_calls
    search.stats.seconds = time.monotonic() - started
    return search.stats


def iter_plans(instance: ProblemInstance, *, max_nodes: int | None = None) -> Iterator[Plan]:
    """Every valid plan of makespan at most ``T`` made of non-empty steps."""
    search = _Search(instance, max_nodes, None)

    def walk(state: WorldState, prefix: list[JointAction]):
        if search.goal(state):
            yield Plan(tuple(prefix))
        if len(prefix) == instance.makespan:
            return
        for ja, nxt in search.successors(state):
            prefix.append(ja)
            yield from walk(nxt, prefix)
            prefix.pop()

    yield from walk(instance.initial, [])


def enumerate_plans(instance: ProblemInstance, *, max_nodes: int | None = 100_000) -> set[Plan]:
    return set(iter_plans(instance, max_nodes=max_nodes))


def replay(instance: ProblemInstance, plan_: Plan) -> list[WorldState]:
    """States ``0..len(plan)`` along a plan produced by this planner."""
    cache = StabilityCache(instance.scene, instance.physics)
    states = [instance.initial]
    for step in plan_.steps:
        states.append(apply(states[-1], step, instance, cache))
    return states
