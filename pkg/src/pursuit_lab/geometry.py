"""2D geometry shared by the simulator, scripted drones, and config checks.

Conventions: positions are (x, y) in meters, headings are radians in
(-pi, pi], rectangles are axis-aligned. "Clearance" distances are signed:
negative means the point is inside the shape (or outside the boundary).
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]. Works on scalars and arrays."""
    if isinstance(a, np.ndarray):
        return np.pi - np.mod(np.pi - a, TWO_PI)
    return math.pi - (math.pi - a) % TWO_PI


def unit(vx: float, vy: float) -> tuple[float, float]:
    """Normalize a vector; the zero vector maps to (0, 0)."""
    n = math.hypot(vx, vy)
    if n < 1e-12:
        return 0.0, 0.0
    return vx / n, vy / n


def circle_clearance(px: float, py: float, cx: float, cy: float, radius: float) -> float:
    """Distance from a point to a circle's rim; negative inside."""
    return math.hypot(px - cx, py - cy) - radius


def rect_clearance(px: float, py: float, cx: float, cy: float, hx: float, hy: float) -> float:
    """Distance from a point to an axis-aligned rectangle; negative inside."""
    dx = abs(px - cx) - hx
    dy = abs(py - cy) - hy
    if dx > 0.0 and dy > 0.0:
        return math.hypot(dx, dy)
    return max(dx, dy)


def closest_point_on_circle(px: float, py: float, cx: float, cy: float, radius: float) -> tuple[float, float]:
    ux, uy = unit(px - cx, py - cy)
    if ux == 0.0 and uy == 0.0:
        ux = 1.0  # point at the exact center: pick a fixed direction
    return cx + radius * ux, cy + radius * uy


def closest_point_on_rect(px: float, py: float, cx: float, cy: float, hx: float, hy: float) -> tuple[float, float]:
    """Closest point on the rectangle's boundary (not interior)."""
    qx = min(max(px, cx - hx), cx + hx)
    qy = min(max(py, cy - hy), cy + hy)
    if qx != px or qy != py:
        return qx, qy
    # Inside: project to the nearest edge.
    gaps = (
        (px - (cx - hx), cx - hx, py, "x"),
        ((cx + hx) - px, cx + hx, py, "x"),
        (py - (cy - hy), px, cy - hy, "y"),
        ((cy + hy) - py, px, cy + hy, "y"),
    )
    best = min(gaps, key=lambda g: g[0])
    if best[3] == "x":
        return best[1], best[2]
    return best[1], best[2]


def boundary_clearance(px: float, py: float, width: float, height: float) -> float:
    """Distance to the nearest arena wall; negative outside the arena."""
    return min(px, width - px, py, height - py)


def closest_point_on_boundary(px: float, py: float, width: float, height: float) -> tuple[float, float]:
    gaps = (
        (px, 0.0, py),
        (width - px, width, py),
        (py, px, 0.0),
        (height - py, px, height),
    )
    best = min(gaps, key=lambda g: g[0])
    return best[1], best[2]


def wall_entries(px: float, py: float, width: float, height: float):
    """Per-wall (clearance, closest point) for all four arena walls."""
    return [
        (px, (0.0, py)),
        (width - px, (width, py)),
        (py, (px, 0.0)),
        (height - py, (px, height)),
    ]


def rects_intersect(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> bool:
    """Overlap test for two AABBs given as (x_min, y_min, x_max, y_max)."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def rect_circle_intersect(a: tuple[float, float, float, float], cx: float, cy: float, radius: float) -> bool:
    ax0, ay0, ax1, ay1 = a
    hx = (ax1 - ax0) / 2.0
    hy = (ay1 - ay0) / 2.0
    return rect_clearance(cx, cy, (ax0 + ax1) / 2.0, (ay0 + ay1) / 2.0, hx, hy) < radius
