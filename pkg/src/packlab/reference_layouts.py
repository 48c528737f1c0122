"""Known-optimal layouts used as fixtures and executable provenance checks.

The 2D constructions are elementary (ring and ring-plus-center patterns at
the feasibility bound); the 15-spheres-in-a-unit-cube layout realizes the
best-known configuration, whose unit-frame coordinates are dyadic rationals
with minimum pairwise distance exactly 5/8: fourteen boundary points linked
by 3-4-5 chains plus the cube center (a rattler with clearance sqrt(2)/2).
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Container, Layout, PackingInstance

# Radius reported for the fifteen-spheres-in-a-unit-cube packing.  It is
# 5/26 truncated to nine decimals; the truncation leaves ~6e-10 of genuine
# slack, so the scaled layout below is strictly non-overlapping in float64.
CUBE15_RADIUS = 0.192307692

# Unit-cube frame, exact eighths/halves.
_CUBE15_UNIT = (
    (0, 0, 0),
    (5 / 8, 0, 0),
    (1, 1 / 2, 0),
    (0, 5 / 8, 0),
    (1 / 2, 1, 0),
    (1, 1, 3 / 8),
    (1, 0, 1 / 2),
    (0, 1, 1 / 2),
    (0, 0, 5 / 8),
    (1 / 2, 0, 1),
    (1, 3 / 8, 1),
    (0, 1 / 2, 1),
    (3 / 8, 1, 1),
    (1, 1, 1),
    (1 / 2, 1 / 2, 1 / 2),
)


def fifteen_spheres_in_unit_cube(r: float = CUBE15_RADIUS) -> Layout:
    """The best-known non-overlapping layout of 15 radius-r spheres in the
    unit cube (requires r <= 5/26)."""
    instance = PackingInstance(Container("box", 3, 1.0), 15, r)
    unit = np.asarray(_CUBE15_UNIT, dtype=np.float64)
    centers = (unit - 0.5) * (1.0 - 2.0 * r)
    return Layout(instance, centers)


def ball2d_optimal_centers(n: int, radius_ratio: float, big_radius: float = 1.0) -> np.ndarray:
    """Optimal center patterns for n in {2, 3, 4, 7} circles in a circle.

    radius_ratio is the small radius as a fraction of big_radius; centers sit
    at the feasibility bound R - r (ring for n <= 4, hexagon plus center for
    n = 7), which is the optimal pattern whenever r <= r*(n).
    """
    r = radius_ratio * big_radius
    bound = big_radius - r
    if n in (2, 3, 4):
        angles = 2.0 * math.pi * np.arange(n) / n
        return bound * np.c_[np.cos(angles), np.sin(angles)]
    if n == 7:
        angles = 2.0 * math.pi * np.arange(6) / 6
        ring = bound * np.c_[np.cos(angles), np.sin(angles)]
        return np.vstack([[0.0, 0.0], ring])
    raise ValueError(f"no tabulated optimal pattern for n = {n}")


def ball2d_optimal_layout(n: int, radius_ratio: float, big_radius: float = 1.0) -> Layout:
    instance = PackingInstance(
        Container("ball", 2, big_radius), n, radius_ratio * big_radius
    )
    return Layout(instance, ball2d_optimal_centers(n, radius_ratio, big_radius))
