"""Deterministic SVG rendering of layouts.

2D layouts draw the container outline, the small circles at partial opacity
(overlaps show darker), and a cross marking the container center.  3D
layouts render three orthographic views side by side with painter-order
depth sorting.  Output is plain SVG 1.1 text with fixed float formatting,
so identical layouts produce byte-identical documents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Layout


@dataclass(frozen=True)
class SvgStyle:
    canvas: float = 800.0  # square canvas per view
    scale_fraction: float = 0.9  # container spans this fraction of the view
    fill: str = "#4878a8"
    fill_opacity: float = 0.4
    outline: str = "#000000"
    marker: str = "#d62728"
    marker_size: float = 10.0


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _View:
    """One orthographic view: world (u, v) -> canvas with y flipped."""

    def __init__(self, style: SvgStyle, world_half: float, offset_x: float):
        self.style = style
        self.k = style.canvas * style.scale_fraction / (2.0 * world_half)
        self.cx = offset_x + style.canvas / 2.0
        self.cy = style.canvas / 2.0

    def point(self, u: float, v: float) -> tuple[float, float]:
        return self.cx + self.k * u, self.cy - self.k * v

    def circle(self, u: float, v: float, radius: float, extra: str) -> str:
        x, y = self.point(u, v)
        return (
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(self.k * radius)}" {extra}/>'
        )

    def rect(self, half: float, extra: str) -> str:
        x, y = self.point(-half, half)
        side = self.k * 2.0 * half
        return (
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(side)}" '
            f'height="{_fmt(side)}" {extra}/>'
        )

    def marker(self) -> str:
        m = self.style.marker_size
        x, y = self.cx, self.cy
        return (
            f'<path d="M {_fmt(x - m)} {_fmt(y)} L {_fmt(x + m)} {_fmt(y)} '
            f'M {_fmt(x)} {_fmt(y - m)} L {_fmt(x)} {_fmt(y + m)}" '
            f'stroke="{self.style.marker}" stroke-width="2" fill="none"/>'
        )


def _view_elements(
    view: _View, layout: Layout, axes: tuple[int, int], depth_axis: int | None
) -> list[str]:
    style = view.style
    container = layout.instance.container
    r = layout.instance.small_radius
    parts = []
    outline = f'fill="none" stroke="{style.outline}" stroke-width="2"'
    if container.kind == "ball":
        parts.append(view.circle(0.0, 0.0, container.extent, outline))
    else:
        parts.append(view.rect(container.extent / 2.0, outline))
    centers = layout.centers
    if depth_axis is not None and centers.shape[0] > 1:
        order = np.argsort(centers[:, depth_axis], kind="stable")
    else:
        order = np.arange(centers.shape[0])
    body = f'fill="{style.fill}" fill-opacity="{style.fill_opacity}" stroke="{style.outline}" stroke-width="1"'
    for i in order:
        u, v = centers[i, axes[0]], centers[i, axes[1]]
        parts.append(view.circle(float(u), float(v), r, body))
    parts.append(view.marker())
    return parts


def render_svg(layout: Layout, style: SvgStyle | None = None) -> str:
    """Render a layout to an SVG 1.1 document string."""
    style = style or SvgStyle()
    container = layout.instance.container
    world_half = container.extent if container.kind == "ball" else container.extent / 2.0
    dim = container.dim
    if dim == 2:
        views = [((0, 1), None, "")]
    elif dim == 3:
        views = [((0, 1), 2, "xy"), ((0, 2), 1, "xz"), ((1, 2), 0, "yz")]
    else:
        raise ValueError(f"unsupported dimension {dim}")
    width = style.canvas * len(views)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(width)}" height="{_fmt(style.canvas)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(style.canvas)}">',
    ]
    for idx, (axes, depth_axis, label) in enumerate(views):
        view = _View(style, world_half, idx * style.canvas)
        parts.extend(_view_elements(view, layout, axes, depth_axis))
        if label:
            parts.append(
                f'<text x="{_fmt(idx * style.canvas + 10.0)}" y="24.000" '
                f'font-size="20" font-family="monospace">{label}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
