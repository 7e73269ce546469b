"""Derived relations over a world state.

Two independent routes compute the same relations:

* grid derivation (``derive_on``, ``compute_above``) reads vertical cell
  adjacency straight off the occupancy grid;
* ``fixpoint_oracle`` starts from one anchor ``on`` fact per block and
  applies the placement ramification rules, the two ``above`` recursions and
  the neighbour rule until nothing new is derived.

Atoms are plain tuples:

* ``on``: ``(block, location, u, v)``, unit ``v`` of block on unit ``u`` of
  location (surface units are global columns)
* ``above``: ``(height, block, v, x)`` with ``height = level + 1``
* ``supported``: ``(block, location)``
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import LEFT, RIGHT, HeldAssembly, Scene, Surface, WorldState

OnAtom = tuple[str, str, int, int]
AboveAtom = tuple[int, str, int, int]

# virtual floor under a held assembly's root in the oracle
_FRAME = "\0frame"


class CircularityError(Exception):
    def __init__(self, block: str):
        super().__init__(f"{block} is supported by itself")
        self.block = block


class NonTermination(Exception):
    pass


@dataclass(frozen=True)
class DerivedRelations:
    on: frozenset[OnAtom]
    on_aux: frozenset[tuple[str, str]]
    above: frozenset[AboveAtom]
    supported: frozenset[tuple[str, str]]
    connected: frozenset[tuple[str, str]]
    side: Mapping[str, frozenset[str]]


# ---------------------------------------------------------------------------
# Grid derivation
# ---------------------------------------------------------------------------


def compute_above(state: WorldState) -> frozenset[AboveAtom]:
    return frozenset(
        (h + 1, b, v, x + v - 1)
        for b, x, h in state.anchored
        for v in range(1, state.scene.size(b) + 1)
    )


def held_on(scene: Scene, assembly: HeldAssembly) -> set[OnAtom]:
    """``on`` atoms internal to a carried subassembly."""
    cells = {}
    for m, dh, dx in assembly.members:
        for v in range(1, scene.size(m) + 1):
            cells[(dx + v - 1, dh)] = (m, v)
    out = set()
    for (c, dh), (m, v) in cells.items():
        below = cells.get((c, dh - 1))
        if below is not None:
            out.add((m, below[0], below[1], v))
    return out


def derive_on(state: WorldState) -> frozenset[OnAtom]:
    scene, grid = state.scene, state.grid
    out: set[OnAtom] = set()
    for (x, h), (b, v) in grid.items():
        below = grid.get((x, h - 1))
        if below is not None:
            out.add((b, below[0], below[1], v))
            continue
        s = scene.surface_at(x, h)
        if s is not None:
            out.add((b, s.id, x, v))
    for a in state.held:
        out |= held_on(scene, a)
    return frozenset(out)


def project(on: Iterable[OnAtom]) -> frozenset[tuple[str, str]]:
    return frozenset((b, l) for b, l, _, _ in on)


def supported_closure(on_aux: Iterable[tuple[str, str]]) -> frozenset[tuple[str, str]]:
    """Least fixpoint of

        supported(b, l) <- onAux(b, l)
        supported(b, l) <- onAux(b, l'), supported(l', l), b != l'

    Raises :class:`CircularityError` when some ``supported(b, b)`` is derived.
    """
    on_aux = set(on_aux)
    rests_on: dict[str, set[str]] = defaultdict(set)
    for b, l in on_aux:
        rests_on[b].add(l)
    supported = set(on_aux)
    frontier = set(on_aux)
    while frontier:
        new = set()
        for l_mid, l in frontier:
            # every b resting directly on l_mid inherits support by l
            for b in _resting_on(rests_on, l_mid):
                if b != l_mid and (b, l) not in supported:
                    new.add((b, l))
        supported |= new
        frontier = new
    for b, l in supported:
        if b == l:
            raise CircularityError(b)
    return frozenset(supported)


def _resting_on(rests_on: Mapping[str, set[str]], location: str) -> list[str]:
    return [b for b, ls in rests_on.items() if location in ls]


def _components(edges: Iterable[tuple[str, str]], nodes: Iterable[str]) -> dict[str, str]:
    parent = {n: n for n in nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for a, b in edges:
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return {n: find(n) for n in parent}


def connectivity(on_aux: Iterable[tuple[str, str]], nodes: Iterable[str],
                 left: Iterable[str] = (), right: Iterable[str] = ()):
    """Symmetric-transitive closure of support plus side labels.

    Returns ``(connected, side)``; ``connected`` holds every ordered pair
    of distinct-or-equal nodes sharing a component of the contact graph.
    """
    on_aux = list(on_aux)
    comp = _components(on_aux, nodes)
    members: dict[str, list[str]] = defaultdict(list)
    for n, r in comp.items():
        members[r].append(n)
    touched = {n for e in on_aux for n in e}
    connected = frozenset(
        (x, y) for group in members.values() if len(group) > 1
        for x in group for y in group if x in touched and y in touched)
    left, right = set(left), set(right)
    side = {}
    for n, r in comp.items():
        labels = set()
        if any(m in left for m in members[r]):
            labels.add(LEFT)
        if any(m in right for m in members[r]):
            labels.add(RIGHT)
        side[n] = frozenset(labels)
    return connected, side


def connected_components(state: WorldState, left: Iterable[str] = (), right: Iterable[str] = ()):
    """Connectedness over anchored blocks and surfaces. Held assemblies are
    excluded, and side-by-side contact never connects anything."""
    scene = state.scene
    anchored_on = [(b, l) for b, l, _, _ in derive_on(state) if b in state.positions]
    nodes = [b for b, _, _ in state.anchored] + [s.id for s in scene.surfaces]
    return connectivity(anchored_on, nodes, left, right)


def bridge_holds(connected: Iterable[tuple[str, str]], side: Mapping[str, frozenset[str]],
                 blocks: Iterable[str]) -> bool:
    blocks = set(blocks)
    return any(x in blocks and y in blocks and LEFT in side[x] and RIGHT in side[y]
               for x, y in connected)


def overhang_extent(state: WorldState, surface: Surface, edge: str) -> int:
    """Contiguous columns past ``surface``'s edge covered by blocks that are
    connected to it."""
    connected, _ = connected_components(state)
    linked = {y for x, y in connected if x == surface.id and y in state.positions}
    covered = {x for b in linked for x, _ in state.cells_of(b)}
    step, col = (1, surface.hi + 1) if edge == "right" else (-1, surface.lo - 1)
    n = 0
    while col in covered:
        n += 1
        col += step
    return n


def derive_relations(state: WorldState, left: Iterable[str] = (), right: Iterable[str] = ()) -> DerivedRelations:
    on = derive_on(state)
    on_aux = project(on)
    connected, side = connected_components(state, left, right)
    return DerivedRelations(on, on_aux, compute_above(state), supported_closure(on_aux), connected, side)


# ---------------------------------------------------------------------------
# Literal-rule fixpoint oracle
# ---------------------------------------------------------------------------


def anchor_atom(state: WorldState, block: str) -> OnAtom:
    """The single placement fact for an anchored block: its leftmost unit
    that has something directly beneath it."""
    scene, grid = state.scene, state.grid
    x, h = state.positions[block]
    for v in range(1, scene.size(block) + 1):
        c = x + v - 1
        below = grid.get((c, h - 1))
        if below is not None:
            return (block, below[0], below[1], v)
        s = scene.surface_at(c, h)
        if s is not None:
            return (block, s.id, c, v)
    raise AssertionError(f"{block} is floating")


def held_anchors(scene: Scene, assembly: HeldAssembly) -> set[OnAtom]:
    """One anchor per non-root member, taken inside the assembly."""
    cells = {}
    for m, dh, dx in assembly.members:
        for v in range(1, scene.size(m) + 1):
            cells[(dx + v - 1, dh)] = (m, v)
    out = set()
    for m, dh, dx in assembly.members:
        if m == assembly.root:
            continue
        for v in range(1, scene.size(m) + 1):
            below = cells.get((dx + v - 1, dh - 1))
            if below is not None:
                out.add((m, below[0], below[1], v))
                break
    return out


def run_rules(anchors: Iterable[OnAtom], sizes: Mapping[str, int],
              surfaces: Mapping[str, tuple[int, int, int]], guard: int):
    """Naive iteration of the ramification and position rules.

    ``surfaces`` maps id to ``(level, lo, hi)``. Returns ``(on, above)``.
    """
    on: set[OnAtom] = set(anchors)
    above: set[AboveAtom] = set()
    iterations = 0
    while True:
        iterations += 1
        if iterations > guard:
            raise NonTermination(f"no fixpoint after {guard} rounds")
        new_on: set[OnAtom] = set()
        new_above: set[AboveAtom] = set()

        for b, l, u, v in on:
            if l in surfaces:
                level, lo, hi = surfaces[l]
                right_room, left_room = hi - u, u - lo
                # base case of the vertical recursion
                new_above.add((level + 1, b, v, u))
            else:
                right_room, left_room = sizes[l] - u, u - 1
            # long-block ramification, both directions
            for i in range(1, min(sizes[b] - v, right_room) + 1):
                new_on.add((b, l, u + i, v + i))
            for j in range(1, min(v - 1, left_room) + 1):
                new_on.add((b, l, u - j, v - j))

        above_at = defaultdict(list)
        for h, b, v, x in above:
            above_at[(h, x)].append((b, v))
        on_by_location = defaultdict(list)
        for b, l, u, v in on:
            on_by_location[(l, u)].append((b, v))

        for h, b, v, x in above:
            # vertical recursion
            for b2, v2 in on_by_location.get((b, v), ()):
                new_above.add((h + 1, b2, v2, x))
            # horizontal recursion
            if v < sizes[b]:
                new_above.add((h, b, v + 1, x + 1))
            if v > 1:
                new_above.add((h, b, v - 1, x - 1))
            # neighbour ramification
            for b_low, u_low in above_at.get((h - 1, x), ()):
                if b_low != b:
                    new_on.add((b, b_low, u_low, v))
            # the same rule against a surface at the level below
            for sid, (level, lo, hi) in surfaces.items():
                if level + 1 == h and lo <= x <= hi:
                    new_on.add((b, sid, x, v))

        if new_on <= on and new_above <= above:
            return on, above
        on |= new_on
        above |= new_above


def fixpoint_from_anchors(scene: Scene, anchors: Iterable[OnAtom],
                          held: Iterable[tuple[str, Iterable[OnAtom]]] = ()):
    """Fixpoint over anchor facts alone.

    ``held`` lists ``(root, member anchors)`` per carried assembly; each is
    solved in its own frame with the root on a virtual floor, and only its
    internal ``on`` atoms are reported. Returns ``(on, above, supported)``;
    ``above`` covers anchored blocks only.
    """
    sizes = {b.id: b.size for b in scene.blocks}
    surfaces = {s.id: (s.level, s.lo, s.hi) for s in scene.surfaces}
    n_blocks = max(1, len(sizes))
    lo, hi = scene.column_bounds
    guard = n_blocks * n_blocks * (hi - lo + 1) + 2

    on, above = run_rules(anchors, sizes, surfaces, guard)
    on = set(on)
    for root, member_anchors in held:
        frame = {_FRAME: (-1, 0, sizes[root] - 1)}
        seed = {(root, _FRAME, v - 1, v) for v in range(1, sizes[root] + 1)}
        frame_on, _ = run_rules(seed | set(member_anchors), sizes, frame, guard)
        on |= {a for a in frame_on if a[1] != _FRAME}
    supported = supported_closure(project(on))
    return frozenset(on), frozenset(above), supported


def fixpoint_oracle(state: WorldState):
    """Recompute ``(on, above, supported)`` by literal rule iteration."""
    anchors = [anchor_atom(state, b) for b, _, _ in state.anchored]
    held = [(a.root, held_anchors(state.scene, a)) for a in state.held]
    return fixpoint_from_anchors(state.scene, anchors, held)
