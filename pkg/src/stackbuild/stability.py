"""Static-equilibrium stability checks for grounded structures and carried
subassemblies.

A structure is stable when admissible contact forces exist for three load
cases: gravity alone, and gravity plus a horizontal push of
``epsilon * weight`` on every free body in either direction. Each maximal
contact interval carries two force points (its endpoints) with a
nonnegative normal force and Coulomb friction ``|f| <= mu * n``. Feasibility
is decided per load case by a phase-one LP: minimise the total equilibrium
residual and accept when it is within ``slack`` of zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from .model import PhysicsParams, Scene, WorldState

GROUND = "ground"

SCENARIOS = (("gravity", 0), ("push +x", 1), ("push -x", -1))


class NumericalError(RuntimeError):
    """The LP solver did not reach an optimal phase-one solution."""


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class Body:
    id: str
    weight: float
    cx: float
    cy: float
    fixed: bool = False


@dataclass(frozen=True)
class Contact:
    """Contact of ``upper`` resting on ``lower`` over ``[x_a, x_b]`` at height ``y``."""

    lower: str
    upper: str
    x_a: float
    x_b: float
    y: float


@dataclass(frozen=True)
class ContactProblem:
    bodies: tuple[Body, ...]
    contacts: tuple[Contact, ...]
    mu: float = 0.5
    epsilon: float = 0.05

    def disturbance(self, body: Body) -> float:
        return self.epsilon * body.weight

    @property
    def free_bodies(self) -> list[Body]:
        return [b for b in self.bodies if not b.fixed]


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    witness: str | None = None
    scenario: str | None = None
    residual: float = 0.0

    def __bool__(self) -> bool:
        return self.stable


# ---------------------------------------------------------------------------
# Building contact problems
# ---------------------------------------------------------------------------


def _runs(columns: list[tuple[int, str]]) -> Iterable[tuple[str, int, int]]:
    """Group ``(column, supporter)`` pairs into maximal runs."""
    start = prev = None
    who = None
    for c, s in columns:
        if who == s and c == prev + 1:
            prev = c
            continue
        if who is not None:
            yield who, start, prev
        who, start, prev = s, c, c
    if who is not None:
        yield who, start, prev


def extract_contacts(state: WorldState, physics: PhysicsParams = PhysicsParams()) -> ContactProblem:
    """One body per anchored block, one contact per maximal interval of
    vertically adjacent cells between a block and one supporter. Surfaces
    collapse into a single fixed ground body."""
    scene, grid = state.scene, state.grid
    bodies = [Body(GROUND, 0.0, 0.0, 0.0, fixed=True)]
    contacts = []
    for b, x, h in state.anchored:
        spec = scene.block[b]
        bodies.append(Body(b, spec.weight, x + spec.centroid_offset, h + 0.5))
        below = []
        for c in range(x, x + spec.size):
            cell = grid.get((c, h - 1))
            if cell is not None:
                below.append((c, cell[0]))
            elif scene.surface_at(c, h) is not None:
                below.append((c, GROUND))
        for who, c0, c1 in _runs(below):
            contacts.append(Contact(who, b, float(c0), float(c1 + 1), float(h)))
    return ContactProblem(tuple(bodies), tuple(contacts), physics.mu, physics.epsilon)


def held_contact_problem(scene: Scene, members: Iterable[tuple[str, int, int]], root: str,
                         physics: PhysicsParams = PhysicsParams()) -> ContactProblem:
    members = sorted(members)
    cells = {}
    bodies = []
    for m, dh, dx in members:
        spec = scene.block[m]
        bodies.append(Body(m, spec.weight, dx + spec.centroid_offset, dh + 0.5, fixed=(m == root)))
        for c in range(dx, dx + spec.size):
            cells[(c, dh)] = m
    contacts = []
    for m, dh, dx in members:
        below = [(c, cells[(c, dh - 1)]) for c in range(dx, dx + scene.size(m)) if (c, dh - 1) in cells]
        for who, c0, c1 in _runs(below):
            contacts.append(Contact(who, m, float(c0), float(c1 + 1), float(dh)))
    return ContactProblem(tuple(bodies), tuple(contacts), physics.mu, physics.epsilon)


# ---------------------------------------------------------------------------
# The LP
# ---------------------------------------------------------------------------


@dataclass
class _LP:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    bounds: list[tuple[float | None, float | None]]
    columns: list[str]
    rows: list[tuple[str, str]]


def _build_lp(problem: ContactProblem, push: int) -> _LP:
    free = problem.free_bodies
    scale = sum(b.weight for b in free) or 1.0
    index = {b.id: i for i, b in enumerate(free)}
    body = {b.id: b for b in problem.bodies}

    columns: list[str] = []
    for k, ct in enumerate(problem.contacts):
        for end in ("a", "b"):
            columns += [f"n{k}{end}", f"f{k}{end}"]
    n_force = len(columns)
    n_eq = 3 * len(free)
    a_eq = np.zeros((n_eq, n_force))
    b_eq = np.zeros(n_eq)
    rows = []
    for b in free:
        rows += [(b.id, "Fx"), (b.id, "Fy"), (b.id, "M")]
        i = 3 * index[b.id]
        b_eq[i] = -push * problem.disturbance(b) / scale
        b_eq[i + 1] = b.weight / scale

    a_ub = np.zeros((4 * len(problem.contacts), n_force))
    b_ub = np.zeros(a_ub.shape[0])
    for k, ct in enumerate(problem.contacts):
        for e, xp in enumerate((ct.x_a, ct.x_b)):
            jn, jf = 4 * k + 2 * e, 4 * k + 2 * e + 1
            for who, sign in ((ct.upper, 1.0), (ct.lower, -1.0)):
                if who not in index:
                    continue
                i = 3 * index[who]
                cx, cy = body[who].cx, body[who].cy
                a_eq[i, jf] += sign
                a_eq[i + 1, jn] += sign
                a_eq[i + 2, jn] += sign * (xp - cx)
                a_eq[i + 2, jf] -= sign * (ct.y - cy)
            # |f| <= mu n
            a_ub[2 * (2 * k + e), jf], a_ub[2 * (2 * k + e), jn] = 1.0, -problem.mu
            a_ub[2 * (2 * k + e) + 1, jf], a_ub[2 * (2 * k + e) + 1, jn] = -1.0, -problem.mu

    frictionless = problem.mu == 0
    bounds = []
    for name in columns:
        if name.startswith("n"):
            bounds.append((0.0, None))
        else:
            bounds.append((0.0, 0.0) if frictionless else (None, None))
    # residual columns r+ and r- for every equation
    c = np.concatenate([np.zeros(n_force), np.ones(2 * n_eq)])
    a_eq = np.hstack([a_eq, np.eye(n_eq), -np.eye(n_eq)])
    a_ub = np.hstack([a_ub, np.zeros((a_ub.shape[0], 2 * n_eq))])
    bounds += [(0.0, None)] * (2 * n_eq)
    columns += [f"r+{r}" for r in range(n_eq)] + [f"r-{r}" for r in range(n_eq)]
    return _LP(c, a_eq, b_eq, a_ub, b_ub, bounds, columns, rows)


def _scenarios(problem: ContactProblem):
    return SCENARIOS if problem.epsilon > 0 else SCENARIOS[:1]


def check_static_equilibrium(problem: ContactProblem, slack: float = 1e-9) -> StabilityVerdict:
    """Decide whether every free body can be held in equilibrium."""
    free = problem.free_bodies
    if not free:
        return StabilityVerdict(True)
    for name, push in _scenarios(problem):
        lp = _build_lp(problem, push)
        res = linprog(lp.c, A_ub=lp.a_ub if lp.a_ub.size else None,
                      b_ub=lp.b_ub if lp.a_ub.size else None,
                      A_eq=lp.a_eq, b_eq=lp.b_eq, bounds=lp.bounds, method="highs")
        if res.status != 0:
            raise NumericalError(f"{name}: {res.message}")
        if res.fun > slack:
            n_eq = len(lp.rows)
            r = res.x[-2 * n_eq:]
            per_row = r[:n_eq] + r[n_eq:]
            worst = int(np.argmax(per_row))
            return StabilityVerdict(False, lp.rows[worst][0], name, float(res.fun))
    return StabilityVerdict(True)


def check_held_stability(state: WorldState, gripper: str,
                         physics: PhysicsParams = PhysicsParams()) -> StabilityVerdict:
    """Stability of the subassembly carried by ``gripper``, with its root
    held rigidly and no ground."""
    assembly = state.holding[gripper]
    if len(assembly.members) < 2:
        return StabilityVerdict(True)
    problem = held_contact_problem(state.scene, assembly.members, assembly.root, physics)
    return check_static_equilibrium(problem, physics.slack)


def state_verdicts(state: WorldState, physics: PhysicsParams = PhysicsParams()):
    """``(label, verdict)`` for the grounded structure and every carried
    assembly of two or more blocks."""
    out = [("structure", check_static_equilibrium(extract_contacts(state, physics), physics.slack))]
    for a in state.held:
        if len(a.members) > 1:
            out.append((f"assembly held by {a.gripper}", check_held_stability(state, a.gripper, physics)))
    return out


def dump_lp(problem: ContactProblem) -> str:
    """Human-readable tableau of the phase-one LP for every load case."""
    lines = []
    for name, push in _scenarios(problem):
        lp = _build_lp(problem, push)
        n_force = len(lp.columns) - 2 * len(lp.rows)
        lines.append(f"# load case: {name}")
        lines.append("minimise  sum of residuals r+ r-")
        for i, (who, eq) in enumerate(lp.rows):
            terms = [f"{lp.a_eq[i, j]:+.4g}*{lp.columns[j]}"
                     for j in range(n_force) if lp.a_eq[i, j] != 0]
            lines.append(f"{who:>10} {eq:<2}: {' '.join(terms) or '0'} + r+{i} - r-{i} = {lp.b_eq[i]:.6g}")
        for i in range(lp.a_ub.shape[0]):
            terms = [f"{lp.a_ub[i, j]:+.4g}*{lp.columns[j]}" for j in range(n_force) if lp.a_ub[i, j] != 0]
            if terms:
                lines.append(f"{'friction':>13}: {' '.join(terms)} <= 0")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Serial-tower oracle
# ---------------------------------------------------------------------------


def tower_oracle(problem: ContactProblem, tol: float = 1e-9) -> StabilityVerdict:
    """Closed-form verdict for a single serial tower.

    For every contact the weighted centroid of the bodies above it, shifted
    by ``epsilon * (mean centroid height - contact height)`` in either push
    direction, must stay inside the contact interval; pushes also need
    ``epsilon <= mu``.
    """
    fixed = {b.id for b in problem.bodies if b.fixed}
    free = {b.id: b for b in problem.bodies if not b.fixed}
    below_of: dict[str, Contact] = {}
    above_of: dict[str, Contact] = {}
    for ct in problem.contacts:
        if ct.upper in below_of or ct.lower in above_of:
            raise NotApplicable("not a serial tower")
        below_of[ct.upper] = ct
        above_of[ct.lower] = ct
    if set(below_of) != set(free):
        raise NotApplicable("every free body needs exactly one supporter")
    bases = [ct for ct in problem.contacts if ct.lower in fixed]
    if len(bases) != 1:
        raise NotApplicable("a serial tower stands on exactly one fixed body")

    chain = []
    ct = bases[0]
    while True:
        chain.append(ct)
        nxt = above_of.get(ct.upper)
        if nxt is None:
            break
        ct = nxt
    if len(chain) != len(free):
        raise NotApplicable("contacts do not form one chain")

    if problem.epsilon > 0 and problem.epsilon > problem.mu:
        return StabilityVerdict(False, chain[0].upper, "push +x")
    for k, ct in enumerate(chain):
        load = [free[c.upper] for c in chain[k:]]
        w = sum(b.weight for b in load)
        xbar = sum(b.weight * b.cx for b in load) / w
        ybar = sum(b.weight * b.cy for b in load) / w
        margin = problem.epsilon * (ybar - ct.y)
        if xbar - margin < ct.x_a - tol:
            return StabilityVerdict(False, ct.upper, "push -x" if margin else "gravity")
        if xbar + margin > ct.x_b + tol:
            return StabilityVerdict(False, ct.upper, "push +x" if margin else "gravity")
    return StabilityVerdict(True)


# ---------------------------------------------------------------------------
# Cached checks for search
# ---------------------------------------------------------------------------


class StabilityCache:
    """Memoised verdicts for one instance's physics.

    The grounded structure is split into its contact components (ground
    absorbs any reaction, so components are independent LPs); each
    component is keyed by its full block placement.
    """

    def __init__(self, scene: Scene, physics: PhysicsParams):
        self.scene = scene
        self.physics = physics
        self._structures: dict[tuple, StabilityVerdict] = {}
        self._held: dict[tuple, StabilityVerdict] = {}
        self.lp_calls = 0

    def components(self, state: WorldState) -> list[tuple[tuple[str, int, int], ...]]:
        grid = state.grid
        parent = {b: b for b, _, _ in state.anchored}

        def find(n):
            while parent[n] != n:
                parent[n] = parent[parent[n]]
                n = parent[n]
            return n

        for (x, h), (b, _) in grid.items():
            below = grid.get((x, h - 1))
            if below is not None:
                ra, rb = find(b), find(below[0])
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        groups: dict[str, list] = {}
        for entry in state.anchored:
            groups.setdefault(find(entry[0]), []).append(entry)
        return [tuple(g) for g in groups.values()]

    def structure(self, state: WorldState) -> StabilityVerdict:
        for comp in self.components(state):
            verdict = self._structures.get(comp)
            if verdict is None:
                sub = WorldState(self.scene, 0, comp)
                verdict = check_static_equilibrium(extract_contacts(sub, self.physics), self.physics.slack)
                self._structures[comp] = verdict
                self.lp_calls += 1
            if not verdict.stable:
                return verdict
        return StabilityVerdict(True)

    def held(self, members: tuple[tuple[str, int, int], ...], root: str) -> StabilityVerdict:
        key = (members, root)
        verdict = self._held.get(key)
        if verdict is None:
            if len(members) < 2:
                verdict = StabilityVerdict(True)
            else:
                problem = held_contact_problem(self.scene, members, root, self.physics)
                verdict = check_static_equilibrium(problem, self.physics.slack)
                self.lp_calls += 1
            self._held[key] = verdict
        return verdict
