"""Benchmark scenarios and the checks that go with them.

Each manifest entry names an instance file and what a run must show: that a
plan exists (or does not), a minimum overhang, a bridge, a block whose removal
breaks the plan, or concurrency that every plan needs.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .closure import bridge_holds, connected_components, overhang_extent
from .model import Bridge, Pick, Place, Plan, ProblemInstance, parse_instance, serialize_plan
from .planner import Unsat, enumerate_plans, plan, replay
from .render import RenderSpec, render_states
from .validator import validate_plan

ENV_VAR = "STACKBUILD_CORPUS"


def default_corpus_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(str(resources.files("stackbuild") / "corpus"))


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    path: Path
    figure: str
    expect: dict[str, Any]

    def load(self) -> ProblemInstance:
        return parse_instance(self.path.read_text(encoding="utf-8"))


def load_manifest(directory: Path | None = None) -> list[CorpusEntry]:
    directory = Path(directory) if directory is not None else default_corpus_dir()
    items = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    return [CorpusEntry(Path(it["file"]).stem, directory / it["file"], it.get("figure", "-"),
                        dict(it.get("expect", {}))) for it in items]


def without_block(plan_: Plan, block: str) -> Plan:
    """Drop every pick of ``block`` and every placement of it as a root."""
    steps = []
    for step in plan_.steps:
        kept = tuple(a for a in step
                     if not (isinstance(a, Pick) and a.block == block)
                     and not (isinstance(a, Place) and a.block == block))
        if kept:
            steps.append(kept)
    return Plan(tuple(steps))


def simultaneous_placements(plan_: Plan) -> int:
    return max((sum(isinstance(a, Place) for a in step) for step in plan_.steps), default=0)


@dataclass
class EntryResult:
    entry: CorpusEntry
    outcome: str = ""
    plan: Plan | None = None
    checks: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())


def run_entry(entry: CorpusEntry) -> EntryResult:
    res = EntryResult(entry)
    started = time.monotonic()
    inst = entry.load()
    result = plan(inst)
    want = entry.expect.get("solvable", True)
    if isinstance(result.outcome, Unsat):
        res.outcome = f"Unsat({result.outcome.makespan})"
        res.checks["outcome"] = not want
        res.seconds = time.monotonic() - started
        return res

    p = result.plan
    res.plan = p
    res.outcome = f"plan of {p.makespan} step(s)"
    res.checks["outcome"] = bool(want) and p.makespan <= inst.makespan
    violations = validate_plan(inst, p)
    res.checks["validator"] = not violations
    res.notes += [f"step {v.step}: {v.category}: {v.detail}" for v in violations]
    final = replay(inst, p)[-1]

    if "overhang" in entry.expect:
        need = int(entry.expect["overhang"])
        got = max(overhang_extent(final, s, e) for s in inst.surfaces for e in ("left", "right"))
        res.checks["overhang"] = got >= need
        res.notes.append(f"overhang {got}")
    if entry.expect.get("bridge"):
        ok = True
        for atom in inst.goal:
            if isinstance(atom, Bridge):
                connected, side = connected_components(final, atom.left, atom.right)
                ok = ok and bridge_holds(connected, side, final.positions)
        res.checks["bridge"] = ok
    if "counterweight" in entry.expect:
        cw = entry.expect["counterweight"]
        broken = validate_plan(inst, without_block(p, cw))
        res.checks["counterweight"] = any(v.category == "stability" for v in broken)
    if "simultaneous_placements" in entry.expect:
        need = int(entry.expect["simultaneous_placements"])
        plans = enumerate_plans(inst)
        res.checks["concurrency"] = bool(plans) and all(simultaneous_placements(q) >= need for q in plans)
        res.notes.append(f"{len(plans)} plan(s), all concurrent" if res.checks["concurrency"]
                         else f"{len(plans)} plan(s)")
    if entry.expect.get("carried_subassembly"):
        states = replay(inst, p)
        res.checks["subassembly"] = any(len(a.members) > 1 for s in states for a in s.held)
    res.seconds = time.monotonic() - started
    return res


def write_artifacts(res: EntryResult, out_dir: Path) -> None:
    """Plan document plus ASCII and SVG step renders, all byte-deterministic."""
    inst = res.entry.load()
    p = res.plan if res.plan is not None else Plan()
    (out_dir / "plans").mkdir(parents=True, exist_ok=True)
    (out_dir / "renders").mkdir(parents=True, exist_ok=True)
    stats = {"outcome": res.outcome, "checks": dict(sorted(res.checks.items()))}
    (out_dir / "plans" / f"{res.entry.name}.json").write_text(serialize_plan(p, stats), encoding="utf-8")
    states = replay(inst, p)
    (out_dir / "renders" / f"{res.entry.name}.txt").write_text(
        "\n".join(render_states(states, RenderSpec("ascii"))), encoding="utf-8")
    (out_dir / "renders" / f"{res.entry.name}.svg").write_text(
        render_states(states, RenderSpec("svg", final_only=True))[0], encoding="utf-8")


def format_table(results: list[EntryResult]) -> str:
    rows = [("instance", "figure", "outcome", "checks", "result")]
    for r in results:
        checks = ",".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in sorted(r.checks.items()))
        rows.append((r.entry.name, r.entry.figure, r.outcome, checks, "PASS" if r.passed else "FAIL"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows) + "\n"
