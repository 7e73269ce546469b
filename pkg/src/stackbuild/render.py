"""Text and SVG drawings of world states.

Both renderers are pure functions of their input; output bytes depend only on
the state and the :class:`RenderSpec`.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .model import Scene, WorldState


@dataclass(frozen=True)
class RenderSpec:
    format: str = "ascii"          # "ascii" or "svg"
    final_only: bool = False
    scale: int = 1                 # characters (ascii) or 24px multiples (svg) per column

    def __post_init__(self):
        if self.format not in ("ascii", "svg"):
            raise ValueError(f"unknown render format {self.format!r}")
        if self.scale < 1:
            raise ValueError("scale must be at least 1")


def glyphs(scene: Scene) -> dict[str, str]:
    """One character per block. Single-character ids are kept; the rest
    take the first unused letter in id order."""
    out: dict[str, str] = {}
    used = set()
    for b in scene.blocks:
        if len(b.id) == 1 and b.id not in "=.#":
            out[b.id] = b.id
            used.add(b.id)
    pool = [c for c in string.ascii_uppercase + string.ascii_lowercase + string.digits if c not in used]
    for b in sorted(scene.block):
        if b not in out:
            out[b] = pool.pop(0)
    return out


def _extent(state: WorldState) -> tuple[int, int, int, int]:
    scene = state.scene
    xs = [s.lo for s in scene.surfaces] + [s.hi for s in scene.surfaces]
    hs = [s.level - 1 for s in scene.surfaces] + [0]
    for (x, h) in state.grid:
        xs.append(x)
        hs.append(h)
    lo_h = min(s.level for s in scene.surfaces) - 1 if scene.surfaces else 0
    return min(xs), max(xs), lo_h, max(hs)


def _ascii(state: WorldState, scale: int) -> str:
    scene = state.scene
    g = glyphs(scene)
    x0, x1, h0, h1 = _extent(state)
    lines = [f"t={state.t}"]
    for h in range(h1, h0 - 1, -1):
        row = []
        for x in range(x0, x1 + 1):
            cell = state.grid.get((x, h))
            if cell is not None:
                ch = g[cell[0]]
            elif any(s.covers(x) and h < s.level for s in scene.surfaces):
                ch = "="
            elif h < 0:
                ch = " "
            else:
                ch = "."
            row.append(ch * scale)
        lines.append(f"{h:>3} |{''.join(row)}|")
    ruler = "".join(str(abs(x) % 10) * scale for x in range(x0, x1 + 1))
    lines.append(f"    {ruler}  (columns {x0}..{x1})")
    for a in state.held:
        parts = ", ".join(f"{g[m]}@({dx},{dh})" for m, dh, dx in a.members)
        lines.append(f"    {a.gripper} holds {g[a.root]}: {parts}")
    legend = " ".join(f"{c}={b}" for b, c in sorted(g.items()) if c != b)
    if legend:
        lines.append(f"    legend: {legend}")
    return "\n".join(lines) + "\n"


def _svg(state: WorldState, scale: int) -> str:
    scene = state.scene
    unit = 24 * scale
    x0, x1, h0, h1 = _extent(state)
    held_rows = sum(1 + max(dh for _, dh, _ in a.members) for a in state.held)
    width = (x1 - x0 + 3) * unit
    height = (h1 - h0 + 3 + held_rows) * unit

    def px(x: int) -> int:
        return (x - x0 + 1) * unit

    def py(h: int) -> int:
        return (h1 - h + 1) * unit

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<text x="4" y="{unit // 2 + 4}" font-size="{unit // 2}">t={state.t}</text>']
    for s in scene.surfaces:
        top = py(s.level - 1)
        out.append(f'<rect class="surface" x="{px(s.lo)}" y="{top}" width="{s.capacity * unit}" '
                   f'height="{(s.level - h0) * unit}" fill="#bbbbbb" stroke="#555555">'
                   f'<title>{escape(s.id)}</title></rect>')

    def block(b: str, x: int, h: int, yoff: int = 0, fill: str = "#f0d9a0") -> None:
        w = scene.size(b) * unit
        out.append(f'<rect class="block" x="{px(x)}" y="{py(h) + yoff}" width="{w}" height="{unit}" '
                   f'fill="{fill}" stroke="#333333"/>')
        out.append(f'<text x="{px(x) + w // 2}" y="{py(h) + yoff + unit * 2 // 3}" '
                   f'font-size="{unit // 2}" text-anchor="middle">{escape(b)}</text>')

    for b, x, h in state.anchored:
        block(b, x, h)
    row = h1 - h0 + 2
    for a in state.held:
        depth = max(dh for _, dh, _ in a.members)
        base = (row + depth) * unit
        out.append(f'<text x="4" y="{base - (depth) * unit + unit * 2 // 3}" font-size="{unit // 2}">'
                   f'{escape(a.gripper)}</text>')
        for m, dh, dx in a.members:
            block(m, x0 + 1 + dx, h1, yoff=base - dh * unit - unit, fill="#a0c8f0")
        row += depth + 1
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_state(state: WorldState, spec: RenderSpec = RenderSpec()) -> str:
    if spec.format == "svg":
        return _svg(state, spec.scale)
    return _ascii(state, spec.scale)


def render_states(states: Sequence[WorldState], spec: RenderSpec = RenderSpec()) -> list[str]:
    """Render a state sequence; ``final_only`` keeps just the last frame."""
    if spec.final_only:
        states = list(states)[-1:]
    return [render_state(s, spec) for s in states]
