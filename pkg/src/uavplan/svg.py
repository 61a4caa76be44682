"""Static SVG renders of a scenario and planned paths."""

from __future__ import annotations

from typing import Sequence

from .scenario import CellCoord, CoverageGrid, Scenario

CELL_PX = 20
MARGIN_PX = 10
PATH_COLORS = ("#1f4e9c", "#c0392b", "#7d3c98", "#117a65")


def _center(cell: CellCoord) -> tuple[float, float]:
    return MARGIN_PX + (cell[0] + 0.5) * CELL_PX, MARGIN_PX + (cell[1] + 0.5) * CELL_PX


def render(
    scenario: Scenario,
    coverage: CoverageGrid,
    paths: Sequence[tuple[str, Sequence[CellCoord]]] = (),
    show_radius: bool = True,
) -> str:
    """Grid with shaded reliable cells, BS markers, start/goal and path polylines.

    ``paths`` is a sequence of ``(label, cells)``; each gets its own color and
    a legend entry.  With ``show_radius`` a dashed circle marks the analytic
    coverage radius around each BS.
    """
    w, h = scenario.width_cells, scenario.height_cells
    legend_h = 18 * len(paths)
    width = 2 * MARGIN_PX + w * CELL_PX
    height = 2 * MARGIN_PX + h * CELL_PX + legend_h
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        '<g id="reliable" fill="#a9dfbf" stroke="none">',
    ]
    for y in range(h):
        for x in range(w):
            if coverage.reliable[y, x]:
                out.append(
                    f'<rect x="{MARGIN_PX + x * CELL_PX}" y="{MARGIN_PX + y * CELL_PX}" '
                    f'width="{CELL_PX}" height="{CELL_PX}"/>'
                )
    out.append("</g>")

    out.append('<g id="grid" stroke="#d5d8dc" stroke-width="0.5">')
    for x in range(w + 1):
        px = MARGIN_PX + x * CELL_PX
        out.append(f'<line x1="{px}" y1="{MARGIN_PX}" x2="{px}" y2="{MARGIN_PX + h * CELL_PX}"/>')
    for y in range(h + 1):
        py = MARGIN_PX + y * CELL_PX
        out.append(f'<line x1="{MARGIN_PX}" y1="{py}" x2="{MARGIN_PX + w * CELL_PX}" y2="{py}"/>')
    out.append("</g>")

    if show_radius and scenario.base_stations:
        r_px = scenario.coverage_radius_m / scenario.cell_size_m * CELL_PX
        out.append('<g id="radius" fill="none" stroke="#27ae60" stroke-dasharray="4 3">')
        for bs in scenario.base_stations:
            cx, cy = _center(bs.cell)
            out.append(f'<circle cx="{cx:g}" cy="{cy:g}" r="{r_px:g}"/>')
        out.append("</g>")

    out.append('<g id="base-stations" fill="#145a32">')
    for bs in scenario.base_stations:
        cx, cy = _center(bs.cell)
        s = CELL_PX * 0.3
        out.append(f'<rect x="{cx - s:g}" y="{cy - s:g}" width="{2 * s:g}" height="{2 * s:g}"/>')
    out.append("</g>")

    for i, (label, cells) in enumerate(paths):
        color = PATH_COLORS[i % len(PATH_COLORS)]
        points = " ".join(f"{px:g},{py:g}" for px, py in map(_center, cells))
        out.append(
            f'<polyline class="path" data-label="{label}" points="{points}" fill="none" '
            f'stroke="{color}" stroke-width="2.5" stroke-linejoin="round" opacity="0.85"/>'
        )

    sx, sy = _center(scenario.start)
    gx, gy = _center(scenario.goal)
    out.append(f'<circle id="start" cx="{sx:g}" cy="{sy:g}" r="{CELL_PX * 0.35:g}" fill="#f1c40f" stroke="black"/>')
    out.append(f'<circle id="goal" cx="{gx:g}" cy="{gy:g}" r="{CELL_PX * 0.35:g}" fill="#e74c3c" stroke="black"/>')

    base_y = 2 * MARGIN_PX + h * CELL_PX
    for i, (label, _) in enumerate(paths):
        color = PATH_COLORS[i % len(PATH_COLORS)]
        y = base_y + 18 * i + 9
        out.append(f'<line x1="{MARGIN_PX}" y1="{y}" x2="{MARGIN_PX + 24}" y2="{y}" stroke="{color}" stroke-width="2.5"/>')
        out.append(
            f'<text x="{MARGIN_PX + 30}" y="{y + 4}" font-family="sans-serif" font-size="12">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
