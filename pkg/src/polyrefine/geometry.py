"""2D geometric kernel for simple polygons.

Vertex loops are stored counter-clockwise; clockwise input is reversed on
construction. Aligned (collinear) vertices are legal and preserved, since
meshes with hanging nodes rely on them.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

# Relative geometric tolerance: absolute tolerances are REL_TOL * diameter.
REL_TOL = 1e-10


class Point2(NamedTuple):
    x: float
    y: float


class PolygonError(ValueError):
    """Vertex loop does not describe a valid simple polygon."""


def _signed_area(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, p3, p4, eps: float) -> bool:
    """True if segments (p1,p2) and (p3,p4) intersect or touch."""
    d21 = p2 - p1
    d43 = p4 - p3
    d1 = d43[0] * (p1[1] - p3[1]) - d43[1] * (p1[0] - p3[0])
    d2 = d43[0] * (p2[1] - p3[1]) - d43[1] * (p2[0] - p3[0])
    d3 = d21[0] * (p3[1] - p1[1]) - d21[1] * (p3[0] - p1[0])
    d4 = d21[0] * (p4[1] - p1[1]) - d21[1] * (p4[0] - p1[0])
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True

    def on_seg(a, b, c):
        # c collinear-ish with (a, b): does it fall inside the bounding box?
        return (
            min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps
        )

    if abs(d1) <= eps and on_seg(p3, p4, p1):
        return True
    if abs(d2) <= eps and on_seg(p3, p4, p2):
        return True
    if abs(d3) <= eps and on_seg(p1, p2, p3):
        return True
    if abs(d4) <= eps and on_seg(p1, p2, p4):
        return True
    return False


def _is_simple(coords: np.ndarray) -> bool:
    n = len(coords)
    scale = float(np.max(np.abs(coords - coords.mean(axis=0)))) + 1e-300
    eps = 1e-13 * scale * scale
    for i in range(n):
        a1, a2 = coords[i], coords[(i + 1) % n]
        for j in range(i + 1, n):
            # skip edges adjacent to edge i (share an endpoint)
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = coords[j], coords[(j + 1) % n]
            if _segments_cross(a1, a2, b1, b2, eps):
                return False
    return True


class Polygon:
    """Simple CCW polygon over an immutable (n, 2) float64 coordinate array."""

    __slots__ = ("coords",)

    def __init__(self, vertices: Sequence) -> None:
        arr = np.asarray(
            [(float(p[0]), float(p[1])) for p in vertices], dtype=np.float64
        )
        if arr.ndim != 2 or arr.shape[0] < 3:
            raise PolygonError("polygon needs at least 3 vertices")
        if not np.isfinite(arr).all():
            raise PolygonError("non-finite vertex coordinates")
        diag = float(np.hypot(*(arr.max(axis=0) - arr.min(axis=0)))) + 1e-300
        signed = _signed_area(arr)
        if abs(signed) <= 1e-14 * diag * diag:
            raise PolygonError("degenerate polygon (zero area)")
        if signed < 0:
            arr = arr[::-1].copy()
        gaps = np.hypot(*(np.roll(arr, -1, axis=0) - arr).T)
        if np.any(gaps <= 1e-13 * diag):
            raise PolygonError("repeated consecutive vertices")
        if not _is_simple(arr):
            raise PolygonError("self-intersecting loop")
        arr.setflags(write=False)
        self.coords = arr

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def vertices(self) -> tuple[Point2, ...]:
        return tuple(Point2(float(x), float(y)) for x, y in self.coords)

    def __repr__(self) -> str:
        return f"Polygon({self.n} vertices)"


def centroid(p: Polygon) -> Point2:
    """Arithmetic mean of the vertex coordinates (not the area centroid)."""
    c = p.coords.mean(axis=0)
    return Point2(float(c[0]), float(c[1]))


def area_centroid(p: Polygon) -> Point2:
    """Center of mass of the enclosed region (used by Lloyd smoothing)."""
    x, y = p.coords[:, 0], p.coords[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * float(np.sum(cross))
    cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
    return Point2(cx, cy)


def area(p: Polygon) -> float:
    return _signed_area(p.coords)


def perimeter(p: Polygon) -> float:
    return float(np.sum(np.hypot(*(np.roll(p.coords, -1, axis=0) - p.coords).T)))


def diameter(p: Polygon) -> float:
    """Max pairwise vertex distance (attained at vertices for a polygon)."""
    d = p.coords[:, None, :] - p.coords[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2).max()))


def edge_lengths(p: Polygon) -> np.ndarray:
    return np.hypot(*(np.roll(p.coords, -1, axis=0) - p.coords).T)


def edge_midpoints(p: Polygon) -> list[Point2]:
    mids = 0.5 * (p.coords + np.roll(p.coords, -1, axis=0))
    return [Point2(float(x), float(y)) for x, y in mids]


def geom_tol(p: Polygon) -> float:
    return REL_TOL * diameter(p)


def distance_to_boundary(p: Polygon, pts: np.ndarray) -> np.ndarray:
    """Min distance from each point (m, 2) to the polygon boundary."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = p.coords
    b = np.roll(a, -1, axis=0)
    ab = b - a  # (n, 2)
    ab2 = (ab * ab).sum(axis=1)  # (n,)
    ap = pts[:, None, :] - a[None, :, :]  # (m, n, 2)
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / ab2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.hypot(*(pts[:, None, :] - proj).transpose(2, 0, 1))
    return d.min(axis=1)


def contains_many(p: Polygon, pts: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Ray-crossing containment for points (m, 2); boundary counts as inside."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if tol is None:
        tol = geom_tol(p)
    a = p.coords
    b = np.roll(a, -1, axis=0)
    x, y = pts[:, 0:1], pts[:, 1:2]  # (m, 1)
    y1, y2 = a[None, :, 1], b[None, :, 1]
    x1, x2 = a[None, :, 0], b[None, :, 0]
    straddle = (y1 <= y) != (y2 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (xcross > x)
    inside = (hits.sum(axis=1) % 2) == 1
    near = distance_to_boundary(p, pts) <= tol
    return inside | near


def contains(p: Polygon, q) -> bool:
    return bool(contains_many(p, np.asarray([[q[0], q[1]]], dtype=float))[0])


def strictly_inside(p: Polygon, q, margin: float | None = None) -> bool:
    """Inside and farther than `margin` from the boundary."""
    if margin is None:
        margin = geom_tol(p)
    pt = np.asarray([[q[0], q[1]]], dtype=float)
    if distance_to_boundary(p, pt)[0] <= margin:
        return False
    return bool(contains_many(p, pt, tol=0.0)[0])


def interior_angles(p: Polygon) -> np.ndarray:
    """Interior angle at each vertex, in (0, 2*pi); aligned vertices give pi."""
    prev = np.roll(p.coords, 1, axis=0)
    nxt = np.roll(p.coords, -1, axis=0)
    u = p.coords - prev  # incoming edge direction
    v = nxt - p.coords  # outgoing edge direction
    turn = np.arctan2(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0], (u * v).sum(axis=1))
    return np.pi - turn


def min_inner_angle(p: Polygon) -> float:
    return float(interior_angles(p).min())


def corner_count(p: Polygon, angle_tol: float = 1e-6) -> int:
    """Number of vertices whose interior angle differs from pi (true corners)."""
    return int(np.sum(np.abs(interior_angles(p) - np.pi) > angle_tol))


def is_convex(p: Polygon) -> bool:
    """All turns are left turns up to tolerance; aligned vertices are fine."""
    prev = np.roll(p.coords, 1, axis=0)
    nxt = np.roll(p.coords, -1, axis=0)
    u = p.coords - prev
    v = nxt - p.coords
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    lens = np.hypot(u[:, 0], u[:, 1]) * np.hypot(v[:, 0], v[:, 1])
    return bool(np.all(cross >= -REL_TOL * diameter(p) * np.sqrt(lens + 1e-300)))


# 16 probe directions: 8 would stall on ridges of the distance field
_PROBE_ANGLES = np.pi * np.arange(16) / 8.0
_PROBE_DIRS = np.column_stack([np.cos(_PROBE_ANGLES), np.sin(_PROBE_ANGLES)])


def _pattern_search(p: Polygon, start, d0: float, step: float, span: float, iters: int = 40):
    x, best = np.asarray(start, dtype=float), d0
    stop = 1e-5 * span
    for _ in range(iters):
        if step < stop:
            break  # two decades below the required 1e-3*diameter accuracy
        cand = x[None, :] + step * _PROBE_DIRS
        inside = contains_many(p, cand, tol=0.0)
        if inside.any():
            d = np.where(inside, distance_to_boundary(p, cand), -np.inf)
            k = int(np.argmax(d))
            if d[k] > best:
                best, x = float(d[k]), cand[k]
                continue
        step *= 0.5
    return best


def inscribed_radius(p: Polygon) -> float:
    """Radius of the largest inscribed circle, to ~1e-3 * diameter.

    Coarse 32x32 grid seed over the bounding box refined by pattern search;
    non-convex polygons can have several near-tied pockets, so those refine
    from a few separated seeds.
    """
    lo = p.coords.min(axis=0)
    hi = p.coords.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    inside_pts = None
    for res in (32, 64, 128):
        gx = lo[0] + (np.arange(res) + 0.5) * (hi[0] - lo[0]) / res
        gy = lo[1] + (np.arange(res) + 0.5) * (hi[1] - lo[1]) / res
        pts = np.column_stack([np.repeat(gx, res), np.tile(gy, res)])
        mask = contains_many(p, pts, tol=0.0)
        if mask.any():
            inside_pts = pts[mask]
            step = span / res
            break
    if inside_pts is None:
        return 0.0
    d = distance_to_boundary(p, inside_pts)
    order = np.argsort(-d)
    seeds = [order[0]]
    if not is_convex(p):
        for idx in order[1:]:
            if len(seeds) >= 4 or d[idx] < 0.6 * d[order[0]]:
                break
            pt = inside_pts[idx]
            if all(np.hypot(*(pt - inside_pts[s])) > 3.0 * step for s in seeds):
                seeds.append(idx)
    return max(
        _pattern_search(p, inside_pts[s], float(d[s]), step, span) for s in seeds
    )


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> Polygon:
    """Regular n-gon with given circumradius, centered at `center`."""
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])
    return Polygon(pts)


def segment_point(a, b, t: float) -> Point2:
    return Point2(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def point_on_segment(q, a, b, tol: float) -> bool:
    """q lies on segment (a, b) within distance tol."""
    ab = (b[0] - a[0], b[1] - a[1])
    ab2 = ab[0] * ab[0] + ab[1] * ab[1]
    if ab2 == 0.0:
        return math.hypot(q[0] - a[0], q[1] - a[1]) <= tol
    t = ((q[0] - a[0]) * ab[0] + (q[1] - a[1]) * ab[1]) / ab2
    t = min(1.0, max(0.0, t))
    px, py = a[0] + t * ab[0], a[1] + t * ab[1]
    return math.hypot(q[0] - px, q[1] - py) <= tol
