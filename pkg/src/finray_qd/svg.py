"""Self-contained SVG rendering of the archive heatmap (no plot library)."""
from __future__ import annotations

# viridis anchor colors, interpolated linearly in RGB
_VIRIDIS = [
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
]

_EMPTY = "#e8e8e8"


def colormap(value: float) -> str:
    """Hex color for an objective in [0, 1] (clamped)."""
    v = min(max(float(value), 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_VIRIDIS, _VIRIDIS[1:]):
        if v <= t1:
            w = 0.0 if t1 == t0 else (v - t0) / (t1 - t0)
            rgb = tuple(round(a + w * (b - a)) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    return "#%02x%02x%02x" % _VIRIDIS[-1][1]


def heatmap_svg(archive, benchmark_cell=None, cell_px: int = 22) -> str:
    """Archive objective heatmap; one rect per cell, benchmark cell outlined.

    Rows (volume) increase upward, columns (workspace) increase rightward;
    the color scale spans objectives 0 to 1 regardless of the data.
    """
    rows, cols = archive.dims
    margin = 60
    legend_w = 50
    width = margin + cols * cell_px + legend_w + 40
    height = margin + rows * cell_px + 40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<g shape-rendering="crispEdges">',
    ]
    for i in range(rows):
        for j in range(cols):
            elite = archive.cells.get((i, j))
            fill = colormap(elite.objective) if elite is not None else _EMPTY
            x = margin + j * cell_px
            y = margin + (rows - 1 - i) * cell_px
            parts.append(f'<rect class="cell" x="{x}" y="{y}" width="{cell_px}" '
                         f'height="{cell_px}" fill="{fill}"/>')
    parts.append("</g>")
    if benchmark_cell is not None:
        i, j = benchmark_cell
        x = margin + j * cell_px
        y = margin + (rows - 1 - i) * cell_px
        parts.append(f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" '
                     'fill="none" stroke="red" stroke-width="3"/>')
        cx, cy = x + cell_px / 2, y + cell_px / 2
        parts.append(f'<circle cx="{cx}" cy="{cy}" r="{cell_px / 5:.1f}" fill="red"/>')
    # axes labels and a ten-step color legend over [0, 1]
    wlo, whi = archive.workspace_range
    vlo, vhi = archive.volume_range
    parts.append(f'<text x="{margin}" y="{margin - 28}" font-size="13" '
                 'font-family="sans-serif">archive objective (grasp success rate)</text>')
    parts.append(f'<text x="{margin}" y="{margin + rows * cell_px + 26}" font-size="11" '
                 f'font-family="sans-serif">workspace {wlo:.0f} to {whi:.0f} mm^2 -&gt;</text>')
    parts.append(f'<text x="14" y="{margin + rows * cell_px}" font-size="11" '
                 f'font-family="sans-serif" transform="rotate(-90 14 {margin + rows * cell_px})">'
                 f'volume {vlo:.0f} to {vhi:.0f} mm^3 -&gt;</text>')
    lx = margin + cols * cell_px + 16
    steps = 10
    lh = rows * cell_px / steps
    for s in range(steps):
        val = (s + 0.5) / steps
        y = margin + (steps - 1 - s) * lh
        parts.append(f'<rect x="{lx}" y="{y:.1f}" width="14" height="{lh:.1f}" '
                     f'fill="{colormap(val)}"/>')
    parts.append(f'<text x="{lx + 18}" y="{margin + 10}" font-size="10" '
                 'font-family="sans-serif">1.0</text>')
    parts.append(f'<text x="{lx + 18}" y="{margin + rows * cell_px}" font-size="10" '
                 'font-family="sans-serif">0.0</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
