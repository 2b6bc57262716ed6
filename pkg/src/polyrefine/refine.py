"""Single-element refinement strategies for polygonal meshes.

The classifier-driven strategies accept either a plain callable mapping a
Polygon to an integer label (3 = triangle, 4 = quad, ...) or any object with
a ``classify_polygon`` method (e.g. a trained Network).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    Point2,
    Polygon,
    PolygonError,
    area,
    centroid,
    contains,
    contains_many,
    corner_count,
    diameter,
    edge_lengths,
    edge_midpoints,
    geom_tol,
    point_on_segment,
    segment_point,
    strictly_inside,
)

# Enumeration cap for the representative-vertex subset search.
_MAX_SUBSETS = 200_000


class Strategy(str, Enum):
    MP = "mp"
    CNN_MP = "cnn-mp"
    CNN_RP = "cnn-rp"
    FALLBACK_BISECT = "fallback-bisect"


class RefinementError(ValueError):
    pass


@dataclass
class RefinementResult:
    children: list[Polygon]
    new_boundary_points: list[Point2]
    strategy_used: Strategy


@dataclass(frozen=True)
class _BoundaryPoint:
    s: float  # arc-length parameter along the loop
    point: Point2
    vertex_index: int | None  # index into the loop when the point is a vertex


def _as_classifier(obj):
    if obj is None:
        raise TypeError("a classifier is required for CNN strategies")
    method = getattr(obj, "classify_polygon", None)
    if method is not None:
        return method
    if callable(obj):
        return obj
    raise TypeError("classifier must be callable or expose classify_polygon()")


def _vertex_arcs(p: Polygon) -> tuple[np.ndarray, float]:
    lens = edge_lengths(p)
    starts = np.concatenate([[0.0], np.cumsum(lens)[:-1]])
    return starts, float(lens.sum())


# ---------------------------------------------------------------------------
# plain mid-point strategy
# ---------------------------------------------------------------------------

def refine_mp(p: Polygon) -> RefinementResult:
    """Connect every edge midpoint to the vertex-average centroid.

    Produces one quad per stored vertex. Raises when the centroid is not
    strictly inside (caller should fall back to bisection).
    """
    c = centroid(p)
    if not strictly_inside(p, c):
        raise RefinementError("non-star-shaped about centroid")
    mids = edge_midpoints(p)
    verts = p.vertices
    n = p.n
    children = []
    for i in range(n):
        loop = (verts[i], mids[i], c, mids[i - 1])
        children.append(Polygon(loop))
    return RefinementResult(children, list(mids), Strategy.MP)


# ---------------------------------------------------------------------------
# refinement-point identification (shared by CNN-MP and CNN-RP)
# ---------------------------------------------------------------------------

def select_representative_vertices(p: Polygon, label: int) -> list[Point2]:
    """The label-sized vertex subset maximizing the sum of pairwise distances."""
    idx = _representative_indices(p, label)
    return [Point2(float(p.coords[i, 0]), float(p.coords[i, 1])) for i in idx]


def _representative_indices(p: Polygon, label: int) -> list[int]:
    n = p.n
    if label >= n:
        return list(range(n))
    dist = np.hypot(
        p.coords[:, None, 0] - p.coords[None, :, 0],
        p.coords[:, None, 1] - p.coords[None, :, 1],
    )
    if math.comb(n, label) <= _MAX_SUBSETS:
        best, best_sum = None, -1.0
        for combo in itertools.combinations(range(n), label):
            s = float(dist[np.ix_(combo, combo)].sum())
            if s > best_sum + 1e-15:
                best, best_sum = combo, s
        return list(best)
    # Greedy fallback for pathological vertex counts.
    i0, j0 = np.unravel_index(int(np.argmax(dist)), dist.shape)
    chosen = [int(i0), int(j0)]
    while len(chosen) < label:
        gains = dist[:, chosen].sum(axis=1)
        gains[chosen] = -np.inf
        chosen.append(int(np.argmax(gains)))
    return sorted(chosen)


def _candidate_points(p: Polygon) -> list[_BoundaryPoint]:
    starts, _ = _vertex_arcs(p)
    lens = edge_lengths(p)
    out = [
        _BoundaryPoint(float(starts[i]), Point2(float(p.coords[i, 0]), float(p.coords[i, 1])), i)
        for i in range(p.n)
    ]
    mids = edge_midpoints(p)
    out.extend(
        _BoundaryPoint(float(starts[i] + 0.5 * lens[i]), mids[i], None)
        for i in range(p.n)
    )
    return out


def _refinement_points(p: Polygon, label: int, mode: str = "nearest") -> list[_BoundaryPoint]:
    rep = _representative_indices(p, label)
    rep_pts = p.coords[rep]
    hat_mids = 0.5 * (rep_pts + np.roll(rep_pts, -1, axis=0))
    c = centroid(p)
    cands = _candidate_points(p)
    cxy = np.array([[bp.point.x, bp.point.y] for bp in cands])
    d_c = np.hypot(cxy[:, 0] - c.x, cxy[:, 1] - c.y)
    chosen: dict[float, _BoundaryPoint] = {}
    for m in hat_mids:
        d_m = np.hypot(cxy[:, 0] - m[0], cxy[:, 1] - m[1])
        if mode == "nearest":
            # closest to the representative midpoint, then closest to c_P
            order = np.lexsort((d_c, d_m))
        elif mode == "sum":
            order = np.lexsort((d_c, d_m + d_c))
        else:
            raise ValueError(f"unknown proximity mode {mode!r}")
        bp = cands[int(order[0])]
        chosen[bp.s] = bp
    return sorted(chosen.values(), key=lambda bp: bp.s)


def refinement_points(p: Polygon, label: int, mode: str = "nearest") -> list[Point2]:
    """Boundary points acting as edge midpoints of the approximating polygon."""
    return [bp.point for bp in _refinement_points(p, label, mode)]


def _locate_on_boundary(p: Polygon, pts) -> list[_BoundaryPoint]:
    """Map arbitrary boundary points to arc parameters (tolerant snap)."""
    starts, per = _vertex_arcs(p)
    lens = edge_lengths(p)
    tol = max(geom_tol(p), 1e-12 * per)
    out = []
    for q in pts:
        located = None
        for i in range(p.n):
            vi = p.coords[i]
            if math.hypot(q[0] - vi[0], q[1] - vi[1]) <= tol:
                located = _BoundaryPoint(float(starts[i]), Point2(*vi), i)
                break
            vj = p.coords[(i + 1) % p.n]
            if point_on_segment(q, vi, vj, tol):
                t = math.hypot(q[0] - vi[0], q[1] - vi[1]) / lens[i]
                located = _BoundaryPoint(
                    float(starts[i] + t * lens[i]), Point2(float(q[0]), float(q[1])), None
                )
                break
        if located is None:
            raise RefinementError("refinement point not on the boundary")
        out.append(located)
    return sorted(out, key=lambda bp: bp.s)


def _walk(p: Polygon, a: _BoundaryPoint, b: _BoundaryPoint, per: float) -> list[Point2]:
    """Points from a to b CCW along the boundary, inclusive of both ends."""
    starts, _ = _vertex_arcs(p)
    eps = 1e-12 * per
    sb = b.s if b.s > a.s + eps else b.s + per
    inner = []
    for i in range(p.n):
        for base in (0.0, per):
            s = starts[i] + base
            if a.s + eps < s < sb - eps:
                inner.append((s, Point2(float(p.coords[i, 0]), float(p.coords[i, 1]))))
    inner.sort(key=lambda t: t[0])
    return [a.point] + [pt for _, pt in inner] + [b.point]


def _fan_children(p: Polygon, rps: list[_BoundaryPoint]) -> list[list[Point2]]:
    c = centroid(p)
    _, per = _vertex_arcs(p)
    loops = []
    k = len(rps)
    for j in range(k):
        walk = _walk(p, rps[j], rps[(j + 1) % k], per)
        loops.append(walk + [c])
    return loops


# ---------------------------------------------------------------------------
# CNN-enhanced mid-point strategy
# ---------------------------------------------------------------------------

def refine_cnn_mp(p: Polygon, classifier, mode: str = "nearest") -> RefinementResult:
    """Fan the classifier's refinement points to the centroid."""
    label = int(_as_classifier(classifier)(p))
    return _refine_fan(p, label, Strategy.CNN_MP, mode)


def _refine_fan(p: Polygon, label: int, tag: Strategy, mode: str) -> RefinementResult:
    label = max(3, min(label, p.n))
    c = centroid(p)
    if not strictly_inside(p, c):
        return fallback_bisect(p)
    rps = _refinement_points(p, label, mode)
    if len(rps) < 3:
        return fallback_bisect(p)
    try:
        children = [Polygon(loop) for loop in _fan_children(p, rps)]
    except PolygonError:
        return fallback_bisect(p)
    if not validate_partition(p, children):
        return fallback_bisect(p)
    new_pts = [bp.point for bp in rps if bp.vertex_index is None]
    return RefinementResult(children, new_pts, tag)


# ---------------------------------------------------------------------------
# reference-polygon templates
# ---------------------------------------------------------------------------

def template_triangle(p: Polygon, pts) -> RefinementResult:
    """Connect three refinement points into four triangle-like children."""
    rps = pts if pts and isinstance(pts[0], _BoundaryPoint) else _locate_on_boundary(p, pts)
    if len(rps) != 3:
        raise RefinementError("triangle template needs exactly 3 points")
    _, per = _vertex_arcs(p)
    loops = []
    for j in range(3):
        walk = _walk(p, rps[j], rps[(j + 1) % 3], per)
        if len(walk) < 3:
            raise RefinementError("empty boundary walk between refinement points")
        loops.append(walk)
    loops.append([rps[0].point, rps[1].point, rps[2].point])
    children = [Polygon(loop) for loop in loops]
    if not validate_partition(p, children):
        raise RefinementError("invalid triangle-template partition")
    new_pts = [bp.point for bp in rps if bp.vertex_index is None]
    return RefinementResult(children, new_pts, Strategy.CNN_RP)


def template_regular(p: Polygon, label: int, pts, rho: float = 0.5) -> RefinementResult:
    """Inner scaled polygon plus one boundary pentagon per refinement point."""
    rps = pts if pts and isinstance(pts[0], _BoundaryPoint) else _locate_on_boundary(p, pts)
    k = len(rps)
    if k < 3:
        raise RefinementError("regular template needs at least 3 points")
    c = centroid(p)
    if not strictly_inside(p, c):
        raise RefinementError("centroid outside polygon")
    inner = [
        Point2(c.x + rho * (bp.point.x - c.x), c.y + rho * (bp.point.y - c.y))
        for bp in rps
    ]
    _, per = _vertex_arcs(p)
    loops = [list(inner)]
    for j in range(k):
        walk = _walk(p, rps[j - 1], rps[j], per)
        loops.append(walk + [inner[j], inner[j - 1]])
    children = [Polygon(loop) for loop in loops]
    if not validate_partition(p, children):
        raise RefinementError("invalid regular-template partition")
    new_pts = [bp.point for bp in rps if bp.vertex_index is None]
    return RefinementResult(children, new_pts, Strategy.CNN_RP)


def refine_cnn_rp(
    p: Polygon, classifier, rho: float = 0.5, mode: str = "nearest"
) -> RefinementResult:
    """Dispatch on the predicted label: 3 -> triangles, 4 -> quad fan,
    >= 5 -> inner regular polygon with boundary pentagons."""
    label = int(_as_classifier(classifier)(p))
    label = max(3, min(label, p.n))
    if label == 4:
        return _refine_fan(p, label, Strategy.CNN_RP, mode)
    c = centroid(p)
    if not strictly_inside(p, c):
        return fallback_bisect(p)
    rps = _refinement_points(p, label, mode)
    try:
        if label == 3:
            if len(rps) != 3:
                return fallback_bisect(p)
            return template_triangle(p, rps)
        if len(rps) < 3:
            return fallback_bisect(p)
        return template_regular(p, label, rps, rho)
    except (RefinementError, PolygonError):
        return fallback_bisect(p)


# ---------------------------------------------------------------------------
# fallback bisection
# ---------------------------------------------------------------------------

def fallback_bisect(p: Polygon) -> RefinementResult:
    """Split into two comparable children along an interior diagonal."""
    if p.n == 3:
        lens = edge_lengths(p)
        i = int(np.argmax(lens))
        v = p.vertices
        m = segment_point(v[i], v[(i + 1) % 3], 0.5)
        children = [
            Polygon((v[i], m, v[(i + 2) % 3])),
            Polygon((m, v[(i + 1) % 3], v[(i + 2) % 3])),
        ]
        return RefinementResult(children, [m], Strategy.FALLBACK_BISECT)

    n = p.n
    tol = geom_tol(p)
    candidates = []
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the wrap
            if not _diagonal_is_interior(p, i, j, tol):
                continue
            try:
                a = Polygon(p.coords[i : j + 1])
                b = Polygon(np.vstack([p.coords[j:], p.coords[: i + 1]]))
            except PolygonError:
                continue
            candidates.append((min(area(a), area(b)), i, j, (a, b)))
    if not candidates:
        raise RefinementError("no valid interior diagonal")
    # most balanced split first; prefer pairs passing the partition checks
    # (a strongly non-convex chain child can put its vertex average outside)
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    for _, _, _, pair in candidates:
        if validate_partition(p, pair):
            return RefinementResult(list(pair), [], Strategy.FALLBACK_BISECT)
    return RefinementResult(list(candidates[0][3]), [], Strategy.FALLBACK_BISECT)


def _diagonal_is_interior(p: Polygon, i: int, j: int, tol: float) -> bool:
    a, b = p.coords[i], p.coords[j]
    mid = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
    if not strictly_inside(p, mid, margin=tol):
        return False
    n = p.n
    for k in range(n):
        if k not in (i, j) and point_on_segment(p.coords[k], a, b, tol):
            return False
    seg_len = math.hypot(b[0] - a[0], b[1] - a[1])
    eps = 1e-13 * seg_len * seg_len
    for k in range(n):
        k2 = (k + 1) % n
        if k in (i, j) or k2 in (i, j):
            continue
        if _proper_cross(a, b, p.coords[k], p.coords[k2], eps):
            return False
    return True


def _proper_cross(p1, p2, p3, p4, eps: float) -> bool:
    d43 = (p4[0] - p3[0], p4[1] - p3[1])
    d21 = (p2[0] - p1[0], p2[1] - p1[1])
    d1 = d43[0] * (p1[1] - p3[1]) - d43[1] * (p1[0] - p3[0])
    d2 = d43[0] * (p2[1] - p3[1]) - d43[1] * (p2[0] - p3[0])
    d3 = d21[0] * (p3[1] - p1[1]) - d21[1] * (p3[0] - p1[0])
    d4 = d21[0] * (p4[1] - p1[1]) - d21[1] * (p4[0] - p1[0])
    return ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    )


# ---------------------------------------------------------------------------
# partition validity
# ---------------------------------------------------------------------------

def validate_partition(parent: Polygon, children) -> bool:
    """Simple CCW children, centroids and vertices inside the parent,
    no proper edge crossings between children, areas summing to the parent."""
    try:
        polys = [c if isinstance(c, Polygon) else Polygon(c) for c in children]
    except PolygonError:
        return False
    if not polys:
        return False
    total = sum(area(c) for c in polys)
    pa = area(parent)
    if abs(total - pa) > 1e-10 * pa:
        return False
    tol = geom_tol(parent)
    all_verts = np.vstack([c.coords for c in polys])
    if not contains_many(parent, all_verts, tol=max(tol, 1e-9 * diameter(parent))).all():
        return False
    for c in polys:
        if not contains(parent, centroid(c)):
            return False
    return not _any_child_edges_cross(polys)


def _any_child_edges_cross(polys: list[Polygon]) -> bool:
    segs = []
    owner = []
    for ci, c in enumerate(polys):
        a = c.coords
        b = np.roll(a, -1, axis=0)
        segs.append(np.hstack([a, b]))
        owner.extend([ci] * len(a))
    E = np.vstack(segs)  # (m, 4): x1 y1 x2 y2
    own = np.asarray(owner)
    m = len(E)
    scale = float(np.abs(E).max()) + 1e-300
    eps = 1e-13 * scale * scale
    p1x, p1y, p2x, p2y = E[:, 0], E[:, 1], E[:, 2], E[:, 3]
    # pairwise orientation tests, masked to pairs from different children
    d43x = p2x[None, :] - p1x[None, :]
    d43y = p2y[None, :] - p1y[None, :]
    d1 = d43x * (p1y[:, None] - p1y[None, :]) - d43y * (p1x[:, None] - p1x[None, :])
    d2 = d43x * (p2y[:, None] - p1y[None, :]) - d43y * (p2x[:, None] - p1x[None, :])
    d21x = p2x[:, None] - p1x[:, None]
    d21y = p2y[:, None] - p1y[:, None]
    d3 = d21x * (p1y[None, :] - p1y[:, None]) - d21y * (p1x[None, :] - p1x[:, None])
    d4 = d21x * (p2y[None, :] - p1y[:, None]) - d21y * (p2x[None, :] - p1x[:, None])
    straddle_a = ((d1 > eps) & (d2 < -eps)) | ((d1 < -eps) & (d2 > eps))
    straddle_b = ((d3 > eps) & (d4 < -eps)) | ((d3 < -eps) & (d4 > eps))
    cross = straddle_a & straddle_b & (own[:, None] != own[None, :])
    return bool(cross.any())


# ---------------------------------------------------------------------------
# strategy dispatch
# ---------------------------------------------------------------------------

def refine_element(
    p: Polygon,
    strategy: Strategy | str,
    classifier=None,
    rho: float = 0.5,
    mode: str = "nearest",
) -> RefinementResult:
    """Refine one element with the requested strategy, falling back to
    bisection whenever the strategy cannot produce a valid partition."""
    strategy = Strategy(strategy)
    if strategy == Strategy.MP:
        try:
            res = refine_mp(p)
        except (RefinementError, PolygonError):
            return fallback_bisect(p)
        if not validate_partition(p, res.children):
            return fallback_bisect(p)
        return res
    if strategy == Strategy.CNN_MP:
        return refine_cnn_mp(p, classifier, mode)
    if strategy == Strategy.CNN_RP:
        return refine_cnn_rp(p, classifier, rho, mode)
    return fallback_bisect(p)


def corner_label(p: Polygon, max_label: int = 6, angle_tol: float = 1e-6) -> int:
    """Geometric stand-in classifier: count non-straight corners, clamped."""
    return max(3, min(max_label, corner_count(p, angle_tol)))
