"""Domain types, the instance/plan document formats and the grid world state.

The canonical state is an occupancy grid: every anchored block occupies
``size`` contiguous columns at a single level, and every relation the
planner reasons about (``on``, ``above``, ``supported``, ``connected``) is
derived from that grid in :mod:`stackbuild.closure`.

Columns are global integers shared by all surfaces. A block at level ``h``
rests on a surface whose ``level`` equals ``h``, or on block cells at level
``h - 1``. Cells below a surface's level inside its span are solid ground.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Mapping, Sequence, Union

FORMAT_VERSION = 1

LEFT = "Left"
RIGHT = "Right"


class ModelError(Exception):
    """Base class for document and state errors."""


class DocumentSyntaxError(ModelError):
    """The document is not well-formed JSON."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ModelError):
    """The document parsed but describes an invalid instance or state."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class FormatError(ModelError):
    """A plan document is malformed."""


# ---------------------------------------------------------------------------
# Static description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSpec:
    id: str
    size: int
    weight: float = 1.0
    centroid_offset: float | None = None

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ValidationError("block", f"{self.id}: size must be a positive integer")
        if not self.weight > 0:
            raise ValidationError("block", f"{self.id}: weight must be positive")
        if self.centroid_offset is None:
            object.__setattr__(self, "centroid_offset", self.size / 2)
        elif not 0 <= self.centroid_offset <= self.size:
            raise ValidationError("block", f"{self.id}: centroid_offset outside [0, size]")


@dataclass(frozen=True)
class Surface:
    id: str
    level: int
    span: tuple[int, int]

    def __post_init__(self):
        lo, hi = self.span
        if lo > hi:
            raise ValidationError("surface", f"{self.id}: empty span {self.span}")
        if self.level < 0:
            raise ValidationError("surface", f"{self.id}: negative level")

    @property
    def lo(self) -> int:
        return self.span[0]

    @property
    def hi(self) -> int:
        return self.span[1]

    @property
    def capacity(self) -> int:
        return self.hi - self.lo + 1

    def covers(self, x: int) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class PhysicsParams:
    mu: float = 0.5
    epsilon: float = 0.05
    slack: float = 1e-9

    def __post_init__(self):
        if self.mu < 0 or self.epsilon < 0 or not self.slack > 0:
            raise ValidationError("physics", "need mu >= 0, epsilon >= 0, slack > 0")


@dataclass(frozen=True)
class Scene:
    """Surfaces and block catalogue shared by every state of an instance."""

    surfaces: tuple[Surface, ...]
    blocks: tuple[BlockSpec, ...]

    def __post_init__(self):
        ids = [s.id for s in self.surfaces] + [b.id for b in self.blocks]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValidationError("duplicate id", ", ".join(sorted(dup)))
        spans = sorted(self.surfaces, key=lambda s: s.lo)
        for a, b in zip(spans, spans[1:]):
            if b.lo <= a.hi:
                raise ValidationError("surface", f"spans of {a.id} and {b.id} overlap")

    @cached_property
    def block(self) -> dict[str, BlockSpec]:
        return {b.id: b for b in self.blocks}

    @cached_property
    def surface(self) -> dict[str, Surface]:
        return {s.id: s for s in self.surfaces}

    def size(self, location: str) -> int:
        return self.block[location].size

    def is_surface(self, location: str) -> bool:
        return location in self.surface

    def surface_at(self, x: int, h: int) -> Surface | None:
        """The surface a block cell at ``(x, h)`` would rest on, if any."""
        for s in self.surfaces:
            if s.level == h and s.covers(x):
                return s
        return None

    def solid(self, x: int, h: int) -> bool:
        if h < 0:
            return True
        return any(s.covers(x) and h < s.level for s in self.surfaces)

    @cached_property
    def column_bounds(self) -> tuple[int, int]:
        # generous enough that no supported placement can be excluded
        reach = sum(b.size for b in self.blocks)
        return (min(s.lo for s in self.surfaces) - reach,
                max(s.hi for s in self.surfaces) + reach)


# ---------------------------------------------------------------------------
# Goals, ordering, actions, plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bridge:
    left: tuple[str, ...]
    right: tuple[str, ...]


@dataclass(frozen=True)
class Overhang:
    surface: str
    edge: str
    min_units: int


@dataclass(frozen=True)
class PlacedOn:
    block: str
    target: str


@dataclass(frozen=True)
class PlacedOnAt:
    block: str
    target: str
    u: int
    v: int


@dataclass(frozen=True)
class ExactCell:
    block: str
    x: int
    h: int


GoalAtom = Union[Bridge, Overhang, PlacedOn, PlacedOnAt, ExactCell]


@dataclass(frozen=True)
class GoalSpec:
    atoms: tuple[GoalAtom, ...] = ()

    def __iter__(self) -> Iterator[GoalAtom]:
        return iter(self.atoms)

    @property
    def bridges(self) -> tuple[Bridge, ...]:
        return tuple(a for a in self.atoms if isinstance(a, Bridge))


@dataclass(frozen=True)
class Ordering:
    """Left-to-right construction: a placement's leftmost column may not lie
    more than ``slack`` columns left of any earlier placement's."""

    kind: str = "left-to-right"
    slack: int = 0


@dataclass(frozen=True)
class Pick:
    gripper: str
    block: str


@dataclass(frozen=True)
class Place:
    """Put the held assembly down so that unit ``v`` of its root rests on
    unit ``u`` of ``target``. Surface units are global columns."""

    gripper: str
    target: str
    u: int
    v: int
    block: str | None = None


Action = Union[Pick, Place]


def action_key(action: Action) -> tuple:
    if isinstance(action, Pick):
        return (action.gripper, 0, action.block, "", 0, 0)
    return (action.gripper, 1, action.block or "", action.target, action.u, action.v)


@dataclass(frozen=True)
class Plan:
    steps: tuple[tuple[Action, ...], ...] = ()

    @property
    def makespan(self) -> int:
        return len(self.steps)

    def __len__(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# World state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeldAssembly:
    """A rigid subassembly carried by one gripper.

    ``members`` holds ``(block, level offset, column offset)`` triples
    relative to the root's leftmost cell; the root sits at ``(0, 0)``.
    """

    gripper: str
    root: str
    members: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(self.members)))

    @property
    def blocks(self) -> frozenset[str]:
        return frozenset(m for m, _, _ in self.members)

    def offsets(self) -> dict[str, tuple[int, int]]:
        return {m: (dh, dx) for m, dh, dx in self.members}


@dataclass(frozen=True)
class WorldState:
    """Anchored block positions plus per-gripper held assemblies at step ``t``.

    ``anchored`` holds ``(block, x, h)`` with ``x`` the leftmost column.
    ``frontier`` tracks the largest leftmost column placed so far, and is
    only maintained when the instance carries an ordering constraint.
    """

    scene: Scene = field(compare=False, repr=False)
    t: int = 0
    anchored: tuple[tuple[str, int, int], ...] = ()
    held: tuple[HeldAssembly, ...] = ()
    frontier: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "anchored", tuple(sorted(self.anchored)))
        object.__setattr__(self, "held", tuple(sorted(self.held, key=lambda a: a.gripper)))
        self._check()

    # -- views --------------------------------------------------------------

    @cached_property
    def positions(self) -> dict[str, tuple[int, int]]:
        return {b: (x, h) for b, x, h in self.anchored}

    @cached_property
    def grid(self) -> dict[tuple[int, int], tuple[str, int]]:
        """``(column, level) -> (block, unit index)`` for anchored blocks."""
        cells: dict[tuple[int, int], tuple[str, int]] = {}
        for b, x, h in self.anchored:
            for v in range(1, self.scene.size(b) + 1):
                cells[(x + v - 1, h)] = (b, v)
        return cells

    @cached_property
    def holding(self) -> dict[str, HeldAssembly]:
        return {a.gripper: a for a in self.held}

    def key(self) -> tuple:
        """Canonical hashable form, independent of ``t``."""
        return (self.anchored, self.held, self.frontier)

    def cells_of(self, block: str) -> list[tuple[int, int]]:
        x, h = self.positions[block]
        return [(x + i, h) for i in range(self.scene.size(block))]

    def supporters_below(self, cells: Sequence[tuple[int, int]]) -> set[str]:
        """Blocks and surfaces directly beneath the given cells."""
        out = set()
        for x, h in cells:
            below = self.grid.get((x, h - 1))
            if below is not None:
                out.add(below[0])
            else:
                s = self.scene.surface_at(x, h)
                if s is not None:
                    out.add(s.id)
        return out

    def evolve(self, **changes: Any) -> "WorldState":
        data = dict(t=self.t, anchored=self.anchored, held=self.held, frontier=self.frontier)
        data.update(changes)
        return WorldState(self.scene, **data)

    # -- invariants ---------------------------------------------------------

    def _check(self):
        scene = self.scene
        seen: dict[str, str] = {}
        for b, _, _ in self.anchored:
            if b not in scene.block:
                raise ValidationError("unknown id", b)
            if b in seen:
                raise ValidationError("duplicate", f"{b} placed twice")
            seen[b] = "grid"
        grippers = set()
        for a in self.held:
            if a.gripper in grippers:
                raise ValidationError("gripper", f"{a.gripper} holds two assemblies")
            grippers.add(a.gripper)
            for m in a.blocks:
                if m not in scene.block:
                    raise ValidationError("unknown id", m)
                if m in seen:
                    raise ValidationError("duplicate", f"{m} is both {seen[m]} and held")
                seen[m] = f"held by {a.gripper}"
            _check_assembly(scene, a)

        occupied: dict[tuple[int, int], str] = {}
        lo, hi = scene.column_bounds
        for b, x, h in self.anchored:
            for c in range(x, x + scene.size(b)):
                if (c, h) in occupied:
                    raise ValidationError("overlap", f"{b} and {occupied[(c, h)]} share cell ({c}, {h})")
                if scene.solid(c, h):
                    raise ValidationError("solid", f"{b} intersects ground at ({c}, {h})")
                if not lo <= c <= hi:
                    raise ValidationError("bounds", f"{b} outside columns [{lo}, {hi}]")
                occupied[(c, h)] = b
        for b, x, h in self.anchored:
            cells = [(c, h) for c in range(x, x + scene.size(b))]
            if not any((c, h - 1) in occupied or scene.surface_at(c, h) for c, _ in cells):
                raise ValidationError("floating", f"{b} has nothing beneath it")


def _check_assembly(scene: Scene, a: HeldAssembly) -> None:
    offsets = a.offsets()
    if offsets.get(a.root) != (0, 0):
        raise ValidationError("held", f"root {a.root} must sit at offset (0, 0)")
    cells: dict[tuple[int, int], str] = {}
    for m, dh, dx in a.members:
        if dh < 0:
            raise ValidationError("held", f"{m} below the root of {a.gripper}'s assembly")
        for c in range(dx, dx + scene.size(m)):
            if (c, dh) in cells:
                raise ValidationError("held", f"{m} overlaps {cells[(c, dh)]}")
            cells[(c, dh)] = m
    for m, dh, dx in a.members:
        if m == a.root:
            continue
        if not any((c, dh - 1) in cells for c in range(dx, dx + scene.size(m))):
            raise ValidationError("held", f"{m} has no support inside the assembly")


def assembly_cells(scene: Scene, a: HeldAssembly, x: int, h: int) -> list[tuple[int, int]]:
    """Grid cells the assembly would occupy with its root's left end at ``(x, h)``."""
    return [(x + dx + i, h + dh) for m, dh, dx in a.members for i in range(scene.size(m))]


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemInstance:
    scene: Scene
    grippers: tuple[str, ...]
    initial: WorldState
    goal: GoalSpec = GoalSpec()
    makespan: int = 0
    physics: PhysicsParams = PhysicsParams()
    ordering: tuple[Ordering, ...] = ()
    description: str = ""

    @property
    def surfaces(self) -> tuple[Surface, ...]:
        return self.scene.surfaces

    @property
    def blocks(self) -> tuple[BlockSpec, ...]:
        return self.scene.blocks

    @property
    def ordered(self) -> Ordering | None:
        return self.ordering[0] if self.ordering else None


def initial_state(instance: ProblemInstance) -> WorldState:
    return instance.initial


_INSTANCE_KEYS = {"format", "description", "surfaces", "blocks", "grippers",
                  "initial", "goal", "makespan", "physics", "ordering"}


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, exc.lineno) from None


def _expect_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError("schema", f"{where} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError("unknown key", f"{where}: {', '.join(sorted(unknown))}")
    missing = required - set(obj)
    if missing:
        raise ValidationError("missing key", f"{where}: {', '.join(sorted(missing))}")
    return obj


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError("schema", f"{where} must be an integer")
    return value


def _parse_goal(items: Any) -> GoalSpec:
    if not isinstance(items, list):
        raise ValidationError("schema", "goal must be a list of atoms")
    atoms: list[GoalAtom] = []
    for i, g in enumerate(items):
        where = f"goal[{i}]"
        kind = g.get("type") if isinstance(g, dict) else None
        if kind == "bridge":
            _expect_keys(g, {"type", "left", "right"}, {"type", "left", "right"}, where)
            atoms.append(Bridge(tuple(g["left"]), tuple(g["right"])))
        elif kind == "overhang":
            _expect_keys(g, {"type", "surface", "edge", "min_units"}, {"type", "surface", "edge", "min_units"}, where)
            if g["edge"] not in ("left", "right"):
                raise ValidationError("schema", f"{where}: edge must be 'left' or 'right'")
            atoms.append(Overhang(g["surface"], g["edge"], _int(g["min_units"], where)))
        elif kind == "placed_on":
            _expect_keys(g, {"type", "block", "target"}, {"type", "block", "target"}, where)
            atoms.append(PlacedOn(g["block"], g["target"]))
        elif kind == "placed_on_at":
            keys = {"type", "block", "target", "u", "v"}
            _expect_keys(g, keys, keys, where)
            atoms.append(PlacedOnAt(g["block"], g["target"], _int(g["u"], where), _int(g["v"], where)))
        elif kind == "exact_cell":
            keys = {"type", "block", "x", "h"}
            _expect_keys(g, keys, keys, where)
            atoms.append(ExactCell(g["block"], _int(g["x"], where), _int(g["h"], where)))
        else:
            raise ValidationError("schema", f"{where}: unknown goal type {kind!r}")
    return GoalSpec(tuple(atoms))


def _check_goal_ids(scene: Scene, goal: GoalSpec) -> None:
    locations = set(scene.block) | set(scene.surface)
    for atom in goal:
        if isinstance(atom, Bridge):
            names = list(atom.left) + list(atom.right)
            if not atom.left or not atom.right:
                raise ValidationError("goal", "bridge needs non-empty left and right groups")
            bad = [n for n in names if n not in scene.surface]
        elif isinstance(atom, Overhang):
            bad = [] if atom.surface in scene.surface else [atom.surface]
            if atom.min_units < 1:
                raise ValidationError("goal", "overhang min_units must be positive")
        elif isinstance(atom, (PlacedOn, PlacedOnAt)):
            bad = [n for n in (atom.block,) if n not in scene.block]
            bad += [n for n in (atom.target,) if n not in locations]
        else:
            bad = [] if atom.block in scene.block else [atom.block]
        if bad:
            raise ValidationError("unknown id", ", ".join(bad))


def parse_instance(text: str, *, check_stability: bool = True) -> ProblemInstance:
    """Parse and validate an instance document.

    The initial state must satisfy every grid invariant and, unless
    ``check_stability`` is false, pass the stability checks.
    """
    doc = _expect_keys(_load_json(text), _INSTANCE_KEYS,
                       {"format", "surfaces", "blocks", "grippers", "initial", "goal", "makespan"},
                       "instance")
    if doc["format"] != FORMAT_VERSION:
        raise ValidationError("format", f"unsupported format {doc['format']!r}")

    surfaces = []
    for i, s in enumerate(doc["surfaces"]):
        _expect_keys(s, {"id", "level", "span"}, {"id", "level", "span"}, f"surfaces[{i}]")
        lo, hi = s["span"]
        surfaces.append(Surface(s["id"], _int(s["level"], "level"), (_int(lo, "span"), _int(hi, "span"))))
    if not surfaces:
        raise ValidationError("schema", "at least one surface is required")
    blocks = []
    for i, b in enumerate(doc["blocks"]):
        _expect_keys(b, {"id", "size", "weight", "centroid_offset"}, {"id", "size"}, f"blocks[{i}]")
        blocks.append(BlockSpec(b["id"], _int(b["size"], "size"), float(b.get("weight", 1.0)),
                                b.get("centroid_offset")))
    scene = Scene(tuple(surfaces), tuple(blocks))

    grippers = tuple(doc["grippers"])
    if len(set(grippers)) != len(grippers) or not all(isinstance(g, str) for g in grippers):
        raise ValidationError("gripper", "gripper ids must be distinct strings")

    init = _expect_keys(doc["initial"], {"anchored", "held"}, {"anchored"}, "initial")
    anchored = []
    for i, p in enumerate(init["anchored"]):
        _expect_keys(p, {"block", "x", "h"}, {"block", "x", "h"}, f"initial.anchored[{i}]")
        anchored.append((p["block"], _int(p["x"], "x"), _int(p["h"], "h")))
    held = []
    for i, a in enumerate(init.get("held", [])):
        where = f"initial.held[{i}]"
        _expect_keys(a, {"gripper", "root", "members"}, {"gripper", "root"}, where)
        if a["gripper"] not in grippers:
            raise ValidationError("unknown id", a["gripper"])
        members = [(a["root"], 0, 0)]
        for m in a.get("members", []):
            _expect_keys(m, {"block", "dh", "dx"}, {"block", "dh", "dx"}, where)
            members.append((m["block"], _int(m["dh"], "dh"), _int(m["dx"], "dx")))
        held.append(HeldAssembly(a["gripper"], a["root"], tuple(members)))

    ordering = []
    for i, o in enumerate(doc.get("ordering", [])):
        _expect_keys(o, {"kind", "slack"}, {"kind"}, f"ordering[{i}]")
        if o["kind"] != "left-to-right":
            raise ValidationError("ordering", f"unknown ordering kind {o['kind']!r}")
        ordering.append(Ordering(o["kind"], _int(o.get("slack", 0), "slack")))

    phys = _expect_keys(doc.get("physics", {}), {"mu", "epsilon", "slack"}, set(), "physics")
    physics = PhysicsParams(**{k: float(v) for k, v in phys.items()})

    goal = _parse_goal(doc["goal"])
    _check_goal_ids(scene, goal)
    makespan = _int(doc["makespan"], "makespan")
    if makespan < 0:
        raise ValidationError("makespan", "must be nonnegative")

    state = WorldState(scene, 0, tuple(anchored), tuple(held),
                       frontier=None)
    placed = {b for b, _, _ in state.anchored} | {m for a in state.held for m in a.blocks}
    missing = sorted(set(scene.block) - placed)
    if missing:
        raise ValidationError("unplaced", ", ".join(missing))
    instance = ProblemInstance(scene, grippers, state, goal, makespan, physics,
                               tuple(ordering), doc.get("description", ""))
    if check_stability:
        from .stability import state_verdicts

        for what, verdict in state_verdicts(state, physics):
            if not verdict.stable:
                raise ValidationError("unstable", f"initial {what} (witness {verdict.witness})")
    return instance


def _goal_doc(atom: GoalAtom) -> dict:
    if isinstance(atom, Bridge):
        return {"type": "bridge", "left": list(atom.left), "right": list(atom.right)}
    if isinstance(atom, Overhang):
        return {"type": "overhang", "surface": atom.surface, "edge": atom.edge, "min_units": atom.min_units}
    if isinstance(atom, PlacedOn):
        return {"type": "placed_on", "block": atom.block, "target": atom.target}
    if isinstance(atom, PlacedOnAt):
        return {"type": "placed_on_at", "block": atom.block, "target": atom.target, "u": atom.u, "v": atom.v}
    return {"type": "exact_cell", "block": atom.block, "x": atom.x, "h": atom.h}


def instance_to_dict(instance: ProblemInstance) -> dict:
    scene = instance.scene
    blocks = []
    for b in scene.blocks:
        entry: dict[str, Any] = {"id": b.id, "size": b.size, "weight": b.weight}
        if b.centroid_offset != b.size / 2:
            entry["centroid_offset"] = b.centroid_offset
        blocks.append(entry)
    initial: dict[str, Any] = {
        "anchored": [{"block": b, "x": x, "h": h} for b, x, h in instance.initial.anchored]}
    if instance.initial.held:
        initial["held"] = [
            {"gripper": a.gripper, "root": a.root,
             "members": [{"block": m, "dh": dh, "dx": dx} for m, dh, dx in a.members if m != a.root]}
            for a in instance.initial.held]
    doc: dict[str, Any] = {"format": FORMAT_VERSION}
    if instance.description:
        doc["description"] = instance.description
    doc.update({
        "surfaces": [{"id": s.id, "level": s.level, "span": list(s.span)} for s in scene.surfaces],
        "blocks": blocks,
        "grippers": list(instance.grippers),
        "initial": initial,
        "goal": [_goal_doc(a) for a in instance.goal],
        "makespan": instance.makespan,
        "physics": {"mu": instance.physics.mu, "epsilon": instance.physics.epsilon,
                    "slack": instance.physics.slack},
        "ordering": [{"kind": o.kind, "slack": o.slack} for o in instance.ordering],
    })
    return doc


def serialize_instance(instance: ProblemInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Plan documents
# ---------------------------------------------------------------------------


def action_to_dict(action: Action) -> dict:
    if isinstance(action, Pick):
        return {"op": "pick", "gripper": action.gripper, "block": action.block}
    out: dict[str, Any] = {"op": "place", "gripper": action.gripper}
    if action.block is not None:
        out["block"] = action.block
    out.update({"target": action.target, "u": action.u, "v": action.v})
    return out


def plan_to_dict(plan: Plan, statistics: Mapping[str, Any] | None = None) -> dict:
    doc: dict[str, Any] = {
        "format": FORMAT_VERSION,
        "steps": [[action_to_dict(a) for a in step] for step in plan.steps],
    }
    if statistics is not None:
        doc["statistics"] = dict(statistics)
    return doc


def serialize_plan(plan: Plan, statistics: Mapping[str, Any] | None = None) -> str:
    return json.dumps(plan_to_dict(plan, statistics), indent=2) + "\n"


def _parse_action(rec: Any, where: str) -> Action:
    if not isinstance(rec, dict):
        raise FormatError(f"{where}: action must be an object")
    unknown = set(rec) - {"op", "gripper", "block", "target", "u", "v"}
    if unknown:
        raise FormatError(f"{where}: unknown keys {sorted(unknown)}")
    op = rec.get("op")
    if not isinstance(rec.get("gripper"), str):
        raise FormatError(f"{where}: missing gripper")
    if op == "pick":
        if not isinstance(rec.get("block"), str) or {"target", "u", "v"} & set(rec):
            raise FormatError(f"{where}: pick takes exactly a gripper and a block")
        return Pick(rec["gripper"], rec["block"])
    if op == "place":
        if not isinstance(rec.get("target"), str):
            raise FormatError(f"{where}: place needs a target")
        for k in ("u", "v"):
            if isinstance(rec.get(k), bool) or not isinstance(rec.get(k), int):
                raise FormatError(f"{where}: place needs integer {k}")
        block = rec.get("block")
        if block is not None and not isinstance(block, str):
            raise FormatError(f"{where}: block must be a string")
        return Place(rec["gripper"], rec["target"], rec["u"], rec["v"], block)
    raise FormatError(f"{where}: unknown op {op!r}")


def plan_from_dict(doc: Any) -> Plan:
    if not isinstance(doc, dict):
        raise FormatError("plan document must be an object")
    unknown = set(doc) - {"format", "steps", "statistics"}
    if unknown:
        raise FormatError(f"unknown keys {sorted(unknown)}")
    if doc.get("format") != FORMAT_VERSION:
        raise FormatError(f"unsupported format {doc.get('format')!r}")
    steps = doc.get("steps")
    if not isinstance(steps, list) or not all(isinstance(s, list) for s in steps):
        raise FormatError("steps must be an array of arrays")
    return Plan(tuple(tuple(_parse_action(a, f"steps[{i}][{j}]") for j, a in enumerate(step))
                      for i, step in enumerate(steps)))


def parse_plan(text: str) -> Plan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}: {exc.msg}") from None
    return plan_from_dict(doc)
