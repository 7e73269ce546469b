"""Command-line interface: ``stackbuild <command> ...``.

Exit status is 0 on success, 1 when the answer is negative (no plan, plan
invalid, structure unstable, corpus check failed) and 2 on usage or input
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Sequence

from .closure import CircularityError, derive_relations, fixpoint_oracle, overhang_extent
from .corpus import default_corpus_dir, format_table, load_manifest, run_entry, write_artifacts
from .model import (ModelError, Bridge, parse_instance, parse_plan, plan_to_dict,
                    serialize_plan)
from .planner import ResourceLimit, Unsat, enumerate_plans, plan
from .render import RenderSpec, render_states
from .stability import (check_held_stability, check_static_equilibrium, dump_lp,
                        extract_contacts)
from .validator import replay_states, validate_plan


class UsageError(Exception):
    pass


def _resolve(path: str) -> Path:
    # corpus/NAME.json falls back to the corpus directory when not found locally
    p = Path(path)
    if not p.exists() and p.parts[:1] == ("corpus",) and len(p.parts) > 1:
        bundled = default_corpus_dir().joinpath(*p.parts[1:])
        if bundled.exists():
            return bundled
    return p


def _read(path: str) -> str:
    try:
        return _resolve(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: str, **kw):
    return parse_instance(_read(path), **kw)


def _states_for(args) -> list:
    inst = _load(args.instance)
    if not getattr(args, "plan", None):
        return [inst.initial]
    p = parse_plan(_read(args.plan))
    states, violations = replay_states(inst, p)
    if violations:
        for v in violations:
            print(f"warning: step {v.step}: {v.category}: {v.detail}", file=sys.stderr)
    return [s for s in states if s is not None]


# -- commands -----------------------------------------------------------------


def cmd_plan(args) -> int:
    if args.seed_order != "default":
        raise UsageError(f"unknown tie-breaking order {args.seed_order!r}")
    inst = _load(args.instance)
    if args.makespan is not None:
        if args.makespan < 0:
            raise UsageError("--makespan must be non-negative")
        inst = _with_makespan(inst, args.makespan)
    try:
        if args.all:
            plans = sorted(enumerate_plans(inst, max_nodes=args.max_nodes),
                           key=lambda p: json.dumps(plan_to_dict(p), sort_keys=True))
            doc = {"format": 1, "plans": [plan_to_dict(p)["steps"] for p in plans],
                   "statistics": {"count": len(plans), "makespan_bound": inst.makespan}}
            _emit(json.dumps(doc, indent=2) + "\n", args.out)
            if not plans:
                print(f"Unsat({inst.makespan})", file=sys.stderr)
                return 1
            return 0
        result = plan(inst, max_nodes=args.max_nodes, time_limit=args.time_limit)
    except ResourceLimit as exc:
        print(f"resource limit: {exc.kind} ({exc.stats.as_dict()})", file=sys.stderr)
        return 1
    stats = dict(result.stats.as_dict(), workers=1)
    if isinstance(result.outcome, Unsat):
        print(f"Unsat({result.outcome.makespan})", file=sys.stderr)
        return 1
    _emit(serialize_plan(result.plan, stats), args.out)
    return 0


def _with_makespan(inst, t: int):
    from dataclasses import replace
    return replace(inst, makespan=t)


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    violations = validate_plan(inst, parse_plan(_read(args.plan)))
    if violations:
        for v in violations:
            print(f"step {v.step}: {v.category}: {v.detail}", file=sys.stderr)
        return 1
    print("OK")
    return 0


def cmd_check_stability(args) -> int:
    inst = _load(args.state, check_stability=False)
    state = inst.initial
    problem = extract_contacts(state, inst.physics)
    verdict = check_static_equilibrium(problem, inst.physics.slack)
    if args.dump_lp:
        sys.stdout.write(dump_lp(problem))
    stable = bool(verdict)
    if verdict:
        print("structure: stable")
    else:
        print(f"structure: UNSTABLE (witness {verdict.witness}, load case {verdict.scenario}, "
              f"residual {verdict.residual:.3g})")
    for a in state.held:
        hv = check_held_stability(state, a.gripper, inst.physics)
        if hv:
            print(f"held by {a.gripper}: stable")
        else:
            stable = False
            print(f"held by {a.gripper}: UNSTABLE (witness {hv.witness}, load case {hv.scenario})")
    return 0 if stable else 1


def cmd_inspect(args) -> int:
    inst = _load(args.instance, check_stability=False)
    states = _states_for(args)
    step = len(states) - 1 if args.step is None else args.step
    if not 0 <= step < len(states):
        raise UsageError(f"--step must be in 0..{len(states) - 1}")
    state = states[step]
    left, right = [], []
    for atom in inst.goal:
        if isinstance(atom, Bridge):
            left += atom.left
            right += atom.right
    try:
        rel = derive_relations(state, left, right)
    except CircularityError as exc:
        print(f"circular support through {exc}", file=sys.stderr)
        return 1
    oracle = fixpoint_oracle(state)
    lines = [f"t={state.t}"]
    lines.append("on:")
    lines += [f"  on({b}, {loc}, {u}, {v})" for b, loc, u, v in sorted(rel.on)]
    lines.append("above:")
    lines += [f"  above({h}, {b}, {v}, {x})" for h, b, v, x in sorted(rel.above)]
    lines.append("supported:")
    lines += [f"  supported({a}, {b})" for a, b in sorted(rel.supported)]
    if left or right:
        lines.append("connected:")
        lines += [f"  connected({a}, {b})" for a, b in sorted(rel.connected)]
    for s in inst.surfaces:
        lines.append(f"overhang {s.id}: left {overhang_extent(state, s, 'left')}, "
                     f"right {overhang_extent(state, s, 'right')}")
    for a in state.held:
        lines.append(f"held by {a.gripper}: root {a.root}, members "
                     + ", ".join(f"{m}@({dx},{dh})" for m, dh, dx in a.members))
    agree = (oracle[0] == rel.on and oracle[1] == rel.above and oracle[2] == rel.supported)
    lines.append(f"rule fixpoint agrees: {'yes' if agree else 'NO'}")
    print("\n".join(lines))
    return 0 if agree else 1


def cmd_render(args) -> int:
    spec = RenderSpec(args.format, args.final_only, args.scale)
    frames = render_states(_states_for(args), spec)
    sep = "\n" if spec.format == "ascii" else ""
    _emit(sep.join(frames), args.out)
    return 0


def cmd_corpus(args) -> int:
    directory = Path(args.dir) if args.dir else default_corpus_dir()
    entries = load_manifest(directory)
    if args.action == "list":
        for e in entries:
            print(f"{e.name:<28} {e.figure:<4} {json.dumps(e.expect, sort_keys=True)}")
        return 0
    if args.only:
        unknown = sorted(set(args.only) - {e.name for e in entries})
        if unknown:
            raise UsageError(f"no corpus entry named {', '.join(unknown)}")
        entries = [e for e in entries if e.name in set(args.only)]
    started = time.monotonic()
    results = []
    for e in entries:
        r = run_entry(e)
        results.append(r)
        if args.out:
            write_artifacts(r, Path(args.out))
        if args.verbose:
            for note in r.notes:
                print(f"  {e.name}: {note}", file=sys.stderr)
    sys.stdout.write(format_table(results))
    print(f"{sum(r.passed for r in results)}/{len(results)} passed in "
          f"{time.monotonic() - started:.1f}s", file=sys.stderr)
    return 0 if all(r.passed for r in results) else 1


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stackbuild", description="Stable block-stacking planner.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("plan", help="search for a plan of minimal makespan")
    q.add_argument("instance")
    q.add_argument("--makespan", type=int, help="override the instance's makespan bound T")
    q.add_argument("--all", action="store_true", help="list every valid plan (tiny instances)")
    q.add_argument("--max-nodes", type=int, default=None)
    q.add_argument("--time-limit", type=float, default=None, help="seconds")
    q.add_argument("--seed-order", default="default", help="tie-breaking order (only 'default')")
    q.add_argument("--out")
    q.set_defaults(func=cmd_plan)

    q = sub.add_parser("validate", help="re-check a plan independently")
    q.add_argument("instance")
    q.add_argument("plan")
    q.set_defaults(func=cmd_validate)

    q = sub.add_parser("check-stability", help="static equilibrium of an instance's initial state")
    q.add_argument("state")
    q.add_argument("--dump-lp", action="store_true")
    q.set_defaults(func=cmd_check_stability)

    q = sub.add_parser("inspect", help="print derived relations")
    q.add_argument("instance")
    q.add_argument("--plan")
    q.add_argument("--step", type=int)
    q.set_defaults(func=cmd_inspect)

    q = sub.add_parser("render", help="draw a state or every state along a plan")
    q.add_argument("instance")
    q.add_argument("--plan")
    q.add_argument("--format", choices=("ascii", "svg"), default="ascii")
    q.add_argument("--final-only", action="store_true")
    q.add_argument("--scale", type=int, default=1)
    q.add_argument("--out")
    q.set_defaults(func=cmd_render)

    q = sub.add_parser("corpus", help="benchmark scenarios")
    q.add_argument("action", choices=("list", "run"))
    q.add_argument("--dir", help="corpus directory (default: $STACKBUILD_CORPUS or bundled)")
    q.add_argument("--out", help="write plans and renders here")
    q.add_argument("--only", nargs="*")
    q.add_argument("-v", "--verbose", action="store_true")
    q.set_defaults(func=cmd_corpus)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


run = main

if __name__ == "__main__":
    sys.exit(main())
