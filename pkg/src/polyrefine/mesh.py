"""Polygonal mesh container, initial-grid generators and refinement driver.

Hanging nodes are realized as aligned vertices stored in every incident
element loop. Within one refinement pass the marked elements are processed
sequentially: each element is refined against the current mesh, so it sees
the boundary points inserted by elements processed earlier in the same pass
(this is what makes midpoint refinement counts grow the way they do on
conforming grids).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (
    Point2,
    Polygon,
    area,
    area_centroid,
    diameter,
    point_on_segment,
)
from .refine import RefinementResult, Strategy, refine_element


class MeshError(ValueError):
    pass


class PolyMesh:
    """Vertices plus CCW vertex-index loops, one per element."""

    def __init__(self, vertices, elements, validate: bool = True):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
        self.elements = [list(map(int, loop)) for loop in elements]
        if validate:
            self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def polygon(self, i: int) -> Polygon:
        return Polygon(self.vertices[self.elements[i]])

    def polygons(self) -> list[Polygon]:
        return [self.polygon(i) for i in range(self.n_elements)]

    @property
    def h(self) -> float:
        return max(diameter(p) for p in self.polygons())

    def total_area(self) -> float:
        return sum(area(p) for p in self.polygons())

    def edge_incidence(self) -> dict[tuple[int, int], list[int]]:
        """Undirected edge -> incident element ids."""
        inc: dict[tuple[int, int], list[int]] = {}
        for eid, loop in enumerate(self.elements):
            for k in range(len(loop)):
                a, b = loop[k], loop[(k + 1) % len(loop)]
                inc.setdefault((min(a, b), max(a, b)), []).append(eid)
        return inc

    def boundary_vertices(self) -> set[int]:
        out: set[int] = set()
        for (a, b), elems in self.edge_incidence().items():
            if len(elems) == 1:
                out.add(a)
                out.add(b)
        return out

    def validate(self) -> None:
        n = self.n_vertices
        directed: set[tuple[int, int]] = set()
        for eid, loop in enumerate(self.elements):
            if len(loop) < 3:
                raise MeshError(f"element {eid}: fewer than 3 vertices")
            if any(v < 0 or v >= n for v in loop):
                raise MeshError(f"element {eid}: vertex index out of range")
            if len(set(loop)) != len(loop):
                raise MeshError(f"element {eid}: repeated vertex in loop")
            self.polygon(eid)  # raises PolygonError if not simple CCW
            for k in range(len(loop)):
                e = (loop[k], loop[(k + 1) % len(loop)])
                if e in directed:
                    raise MeshError(f"element {eid}: duplicated directed edge {e}")
                directed.add(e)
        for (a, b), elems in self.edge_incidence().items():
            if len(elems) > 2:
                raise MeshError(f"edge ({a},{b}) shared by {len(elems)} elements")

    def copy(self) -> "PolyMesh":
        return PolyMesh(self.vertices.copy(), [list(l) for l in self.elements], validate=False)


# ---------------------------------------------------------------------------
# vertex registry with tolerant lookup
# ---------------------------------------------------------------------------

class _VertexRegistry:
    def __init__(self, coords: np.ndarray, tol: float):
        self.tol = tol
        self.cell = max(tol * 8.0, 1e-300)
        self.points: list[tuple[float, float]] = []
        self.grid: dict[tuple[int, int], list[int]] = {}
        for x, y in coords:
            self.add(float(x), float(y))

    def _key(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor(x / self.cell)), int(math.floor(y / self.cell)))

    def find(self, x: float, y: float) -> int | None:
        kx, ky = self._key(x, y)
        best, best_d = None, self.tol
        for ix in (kx - 1, kx, kx + 1):
            for iy in (ky - 1, ky, ky + 1):
                for vid in self.grid.get((ix, iy), ()):
                    px, py = self.points[vid]
                    d = math.hypot(px - x, py - y)
                    if d <= best_d:
                        best, best_d = vid, d
        return best

    def add(self, x: float, y: float) -> int:
        found = self.find(x, y)
        if found is not None:
            return found
        vid = len(self.points)
        self.points.append((x, y))
        self.grid.setdefault(self._key(x, y), []).append(vid)
        return vid


# ---------------------------------------------------------------------------
# refinement driver
# ---------------------------------------------------------------------------

@dataclass
class RefinePassReport:
    created: list[int] = field(default_factory=list)  # new-mesh element indices
    strategy_counts: dict[str, int] = field(default_factory=dict)


class _WorkingMesh:
    def __init__(self, mesh: PolyMesh, tol: float):
        self.reg = _VertexRegistry(mesh.vertices, tol)
        self.tol = tol
        self.loops: list[list[int] | None] = [list(l) for l in mesh.elements]
        self.children_of: dict[int, list[int]] = {}
        self.edge_map: dict[tuple[int, int], set[int]] = {}
        self.vertex_edges: dict[int, set[tuple[int, int]]] = {}
        for eid, loop in enumerate(mesh.elements):
            self._add_edges(eid, loop)

    # -- edge bookkeeping ---------------------------------------------------
    def _edge_key(self, a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def _add_edges(self, eid: int, loop: list[int]) -> None:
        for k in range(len(loop)):
            key = self._edge_key(loop[k], loop[(k + 1) % len(loop)])
            self.edge_map.setdefault(key, set()).add(eid)
            self.vertex_edges.setdefault(key[0], set()).add(key)
            self.vertex_edges.setdefault(key[1], set()).add(key)

    def _remove_edges(self, eid: int, loop: list[int]) -> None:
        for k in range(len(loop)):
            key = self._edge_key(loop[k], loop[(k + 1) % len(loop)])
            elems = self.edge_map.get(key)
            if elems is None:
                continue
            elems.discard(eid)
            if not elems:
                del self.edge_map[key]
                for v in key:
                    self.vertex_edges.get(v, set()).discard(key)

    # -- element replacement -------------------------------------------------
    def polygon(self, eid: int) -> Polygon:
        return Polygon([self.reg.points[v] for v in self.loops[eid]])

    def replace(self, eid: int, children: list[Polygon]) -> list[int]:
        old = self.loops[eid]
        self._remove_edges(eid, old)
        self.loops[eid] = None
        ids = []
        for child in children:
            loop = [self.reg.add(float(x), float(y)) for x, y in child.coords]
            dedup = [v for k, v in enumerate(loop) if v != loop[(k - 1) % len(loop)]]
            if len(dedup) < 3:
                raise MeshError(f"degenerate child while refining element {eid}")
            cid = len(self.loops)
            self.loops.append(dedup)
            self._add_edges(cid, dedup)
            ids.append(cid)
        self.children_of[eid] = ids
        return ids

    # -- hanging-node insertion ----------------------------------------------
    def insert_boundary_point(self, pt: Point2, old_loop: list[int]) -> None:
        vid = self.reg.add(pt.x, pt.y)
        host = None
        for k in range(len(old_loop)):
            u, w = old_loop[k], old_loop[(k + 1) % len(old_loop)]
            if u == vid or w == vid:
                return
            if point_on_segment(
                self.reg.points[vid], self.reg.points[u], self.reg.points[w], self.tol
            ):
                host = (u, w)
                break
        if host is None:
            raise MeshError("boundary point not on the parent boundary")
        self._insert_on_chain(host[0], host[1], vid)

    def _insert_on_chain(self, u: int, w: int, vid: int) -> None:
        """Split every current edge of the u-w collinear chain that strictly
        contains vid. Both sides of the interface may subdivide the chain at
        different granularities, so all overlapping edges are inspected."""
        ux, uy = self.reg.points[u]
        wx, wy = self.reg.points[w]
        seg2 = (wx - ux) ** 2 + (wy - uy) ** 2

        def param(i: int) -> float:
            px, py = self.reg.points[i]
            return ((px - ux) * (wx - ux) + (py - uy) * (wy - uy)) / seg2

        def on_chain(i: int) -> bool:
            return point_on_segment(self.reg.points[i], (ux, uy), (wx, wy), self.tol)

        t_target = param(vid)
        eps_t = self.tol / math.sqrt(seg2)
        # gather the chain vertices reachable from u through collinear edges
        chain = {u}
        frontier = [u]
        while frontier:
            cur = frontier.pop()
            for key in tuple(self.vertex_edges.get(cur, ())):
                other = key[0] if key[1] == cur else key[1]
                if other not in chain and on_chain(other):
                    chain.add(other)
                    frontier.append(other)
        # vid may already be a chain vertex (the refining element's children
        # realize it), but coarser edges on the other side of the interface
        # can still strictly contain it and must be split.
        hit = False
        for key in [
            k
            for v in chain
            for k in self.vertex_edges.get(v, ())
            if k[0] in chain and k[1] in chain
        ]:
            if key not in self.edge_map:
                continue
            ta, tb = param(key[0]), param(key[1])
            if ta > tb:
                ta, tb = tb, ta
            if ta + eps_t < t_target < tb - eps_t:
                self._split_edge(key, vid)
                hit = True
        if not hit and vid not in chain:
            raise MeshError("hanging node could not be placed on the edge chain")

    def _split_edge(self, key: tuple[int, int], vid: int) -> None:
        elems = self.edge_map.pop(key, set())
        for v in key:
            self.vertex_edges.get(v, set()).discard(key)
        a, b = key
        for eid in elems:
            loop = self.loops[eid]
            n = len(loop)
            for k in range(n):
                u, w = loop[k], loop[(k + 1) % n]
                if (u, w) in ((a, b), (b, a)):
                    loop.insert(k + 1, vid)
                    break
            else:
                raise MeshError("edge not found in incident element loop")
            for half in ((a, vid), (vid, b)):
                hk = self._edge_key(*half)
                self.edge_map.setdefault(hk, set()).add(eid)
                self.vertex_edges.setdefault(hk[0], set()).add(hk)
                self.vertex_edges.setdefault(hk[1], set()).add(hk)

    # -- output ---------------------------------------------------------------
    def finish(self, n_original: int) -> tuple[PolyMesh, RefinePassReport]:
        order: list[tuple[int, bool]] = []  # (slot id, is_new)
        for eid in range(n_original):
            if self.loops[eid] is not None:
                order.append((eid, False))
            else:
                order.extend((cid, True) for cid in self.children_of[eid])
        used: dict[int, int] = {}
        coords = []
        new_elements = []
        report = RefinePassReport()
        for new_id, (slot, is_new) in enumerate(order):
            loop = self.loops[slot]
            remapped = []
            for v in loop:
                if v not in used:
                    used[v] = len(coords)
                    coords.append(self.reg.points[v])
                remapped.append(used[v])
            new_elements.append(remapped)
            if is_new:
                report.created.append(new_id)
        mesh = PolyMesh(np.asarray(coords), new_elements, validate=False)
        return mesh, report


def refine_mesh_report(
    mesh: PolyMesh,
    marks,
    strategy: Strategy | str,
    classifier=None,
    rho: float = 0.5,
    mode: str = "nearest",
) -> tuple[PolyMesh, RefinePassReport]:
    """Refine the marked elements sequentially and restore mesh invariants."""
    marks = sorted(set(int(m) for m in marks))
    if marks and (marks[0] < 0 or marks[-1] >= mesh.n_elements):
        raise MeshError("mark index out of range")
    tol = 1e-9 * mesh.h
    work = _WorkingMesh(mesh, tol)
    strategy_counts: dict[str, int] = {}
    for eid in marks:
        poly = work.polygon(eid)
        res: RefinementResult = refine_element(poly, strategy, classifier, rho, mode)
        old_loop = list(work.loops[eid])
        work.replace(eid, res.children)
        for pt in res.new_boundary_points:
            work.insert_boundary_point(pt, old_loop)
        name = res.strategy_used.value
        strategy_counts[name] = strategy_counts.get(name, 0) + 1
    new_mesh, report = work.finish(mesh.n_elements)
    report.strategy_counts = strategy_counts
    old_area = mesh.total_area()
    if abs(new_mesh.total_area() - old_area) > 1e-10 * old_area:
        raise MeshError("area not conserved by refinement pass")
    new_mesh.validate()
    return new_mesh, report


def refine_mesh(
    mesh: PolyMesh,
    marks,
    strategy: Strategy | str,
    classifier=None,
    rho: float = 0.5,
    mode: str = "nearest",
) -> PolyMesh:
    new_mesh, _ = refine_mesh_report(mesh, marks, strategy, classifier, rho, mode)
    return new_mesh


def mark_fixed_fraction(errors, r: float):
    """Indices of the ceil(r*N) largest errors; ties go to the lower index."""
    errors = np.asarray(errors, dtype=float)
    n = len(errors)
    if not 0.0 < r <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    k = int(math.ceil(r * n))
    order = np.lexsort((np.arange(n), -errors))
    return sorted(int(i) for i in order[:k])


# ---------------------------------------------------------------------------
# initial grids on (0,1)^2
# ---------------------------------------------------------------------------

def generate_triangle_grid(n: int) -> PolyMesh:
    """Structured n x n grid of squares, each split along one diagonal."""
    xs = np.linspace(0.0, 1.0, n + 1)
    vid = lambda i, j: j * (n + 1) + i
    verts = [(x, y) for y in xs for x in xs]
    elements = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            elements.append([a, b, c])
            elements.append([a, c, d])
    return PolyMesh(np.asarray(verts), elements)


_UNIT_BOX = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _clip_halfplane(pts: np.ndarray, normal, offset: float) -> np.ndarray:
    """Keep the part of the polygon with normal . x <= offset."""
    out = []
    m = len(pts)
    d = pts @ np.asarray(normal) - offset
    for i in range(m):
        j = (i + 1) % m
        if d[i] <= 1e-14:
            out.append(pts[i])
        if (d[i] < -1e-14 and d[j] > 1e-14) or (d[i] > 1e-14 and d[j] < -1e-14):
            t = d[i] / (d[i] - d[j])
            out.append(pts[i] + t * (pts[j] - pts[i]))
    return np.asarray(out) if out else np.empty((0, 2))


def _voronoi_cells(seeds: np.ndarray) -> list[np.ndarray]:
    cells = []
    for i, s in enumerate(seeds):
        poly = _UNIT_BOX.copy()
        for j, t in enumerate(seeds):
            if i == j or len(poly) == 0:
                continue
            n = t - s
            c = float(n @ (0.5 * (s + t)))
            poly = _clip_halfplane(poly, n, c)
        if len(poly) < 3:
            raise MeshError("degenerate Voronoi cell; choose a different seed")
        keep = [
            k
            for k in range(len(poly))
            if np.hypot(*(poly[k] - poly[k - 1])) > 1e-12
        ]
        cells.append(poly[keep])
    return cells


def _mesh_from_cells(cells: list[np.ndarray]) -> PolyMesh:
    reg = _VertexRegistry(np.empty((0, 2)), tol=1e-9)
    loops = []
    for cell in cells:
        loop = [reg.add(float(x), float(y)) for x, y in cell]
        loops.append([v for k, v in enumerate(loop) if v != loop[(k - 1) % len(loop)]])
    coords = np.asarray(reg.points)
    loops = _make_conforming(coords, loops, tol=1e-9)
    return PolyMesh(coords, loops)


def _make_conforming(coords: np.ndarray, loops: list[list[int]], tol: float) -> list[list[int]]:
    """Insert every vertex that falls strictly inside another element's edge."""
    out = []
    for loop in loops:
        rebuilt: list[int] = []
        n = len(loop)
        for k in range(n):
            a, b = loop[k], loop[(k + 1) % n]
            pa, pb = coords[a], coords[b]
            rebuilt.append(a)
            ab = pb - pa
            ab2 = float(ab @ ab)
            t = ((coords - pa) @ ab) / ab2
            proj = pa + np.clip(t, 0.0, 1.0)[:, None] * ab
            dist = np.hypot(*(coords - proj).T)
            eps_t = tol / math.sqrt(ab2)
            hits = np.where((dist <= tol) & (t > eps_t) & (t < 1.0 - eps_t))[0]
            hits = [int(h) for h in hits if h not in (a, b)]
            hits.sort(key=lambda h: t[h])
            rebuilt.extend(hits)
        out.append(rebuilt)
    return out


def generate_voronoi_grid(n_seeds: int, seed: int = 0) -> PolyMesh:
    rng = np.random.default_rng(seed)
    seeds = rng.uniform(0.08, 0.92, size=(n_seeds, 2))
    return _mesh_from_cells(_voronoi_cells(seeds))


def generate_smoothed_voronoi_grid(
    n_seeds: int, lloyd_iters: int = 20, seed: int = 0
) -> PolyMesh:
    rng = np.random.default_rng(seed)
    seeds = rng.uniform(0.08, 0.92, size=(n_seeds, 2))
    for _ in range(lloyd_iters):
        cells = _voronoi_cells(seeds)
        seeds = np.asarray([area_centroid(Polygon(c)) for c in cells])
    return _mesh_from_cells(_voronoi_cells(seeds))


def generate_nonconvex_grid() -> PolyMesh:
    """14 chevron-style non-convex cells tiling the unit square.

    Two columns of seven rows separated by sagging zigzag interfaces; every
    cell has exactly one reflex vertex (the ridge of a neighboring row poking
    into it) yet stays star-shaped about its vertex average, so the midpoint
    strategy refines it without falling back.
    """
    rows = 7
    h = 1.0 / rows
    d = h / 5.0  # ridge depth; keeps midpoint-fan children valid (see tests)

    def interface(x0: float, w: float, k: int) -> list[tuple[float, float]]:
        """Interior points of the boundary between rows k-1 and k, left to
        right. Rows 1-2 sag down, row 3 gets a W (one sag each way), rows
        4-6 sag up; each sag hands a reflex vertex to one adjacent row."""
        y = k * h
        if k <= 2:
            return [(x0 + 0.5 * w, y - d)]
        if k == 3:
            return [(x0 + 0.25 * w, y - d), (x0 + 0.5 * w, y), (x0 + 0.75 * w, y + d)]
        return [(x0 + 0.5 * w, y + d)]

    cells = []
    ncols = 2
    w = 1.0 / ncols
    for col in range(ncols):
        x0 = col * w
        for k in range(rows):
            bottom = [(x0, k * h)] + (interface(x0, w, k) if k > 0 else []) + [(x0 + w, k * h)]
            top = [(x0 + w, (k + 1) * h)] + (
                list(reversed(interface(x0, w, k + 1))) if k < rows - 1 else []
            ) + [(x0, (k + 1) * h)]
            cells.append(np.asarray(bottom + top))
    return _mesh_from_cells(cells)


GRID_GENERATORS = {
    "triangles": lambda seed=0: generate_triangle_grid(4),
    "voronoi": lambda seed=0: generate_voronoi_grid(9, seed=seed),
    "smoothed": lambda seed=0: generate_smoothed_voronoi_grid(10, seed=seed),
    "nonconvex": lambda seed=0: generate_nonconvex_grid(),
}


# ---------------------------------------------------------------------------
# mesh file format
# ---------------------------------------------------------------------------

def save_mesh(mesh: PolyMesh, path) -> None:
    lines = ["POLYMESH 1", f"{mesh.n_vertices} {mesh.n_elements}"]
    lines.extend(f"{repr(float(x))} {repr(float(y))}" for x, y in mesh.vertices)
    lines.extend(
        f"{len(loop)} " + " ".join(str(v) for v in loop) for loop in mesh.elements
    )
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> PolyMesh:
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    if lines[0].strip() != "POLYMESH 1":
        raise MeshError("not a POLYMESH 1 file")
    nv, ne = (int(t) for t in lines[1].split())
    verts = [tuple(float(t) for t in lines[2 + i].split()) for i in range(nv)]
    elements = []
    for i in range(ne):
        toks = lines[2 + nv + i].split()
        k = int(toks[0])
        if len(toks) != k + 1:
            raise MeshError(f"element line {i}: expected {k} indices")
        elements.append([int(t) for t in toks[1:]])
    return PolyMesh(np.asarray(verts), elements)
