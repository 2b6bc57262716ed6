import itertools
import math

import numpy as np
import pytest

from polyrefine.geometry import Polygon, area, edge_midpoints, regular_polygon
from polyrefine.refine import (
    RefinementError,
    Strategy,
    corner_label,
    fallback_bisect,
    refine_cnn_mp,
    refine_cnn_rp,
    refine_element,
    refine_mp,
    refinement_points,
    select_representative_vertices,
    template_regular,
    template_triangle,
    validate_partition,
)
from conftest import random_star_polygon

SQUARE = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
TRIANGLE = Polygon([(0, 0), (1, 0), (0, 1)])
SPLIT_SQUARE = Polygon([(0, 0), (0.5, 0), (1, 0), (1, 1), (0, 1)])
L_SHAPE = Polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])


def child_areas(result):
    return sorted(area(c) for c in result.children)


def test_refine_mp_square():
    res = refine_mp(SQUARE)
    assert len(res.children) == 4
    assert child_areas(res) == pytest.approx([0.25] * 4)
    assert res.strategy_used == Strategy.MP
    assert sorted(res.new_boundary_points) == sorted(edge_midpoints(SQUARE))


def test_refine_mp_triangle():
    res = refine_mp(TRIANGLE)
    assert len(res.children) == 3
    assert child_areas(res) == pytest.approx([1 / 6] * 3)


def test_refine_mp_pentagon():
    res = refine_mp(regular_polygon(5))
    assert len(res.children) == 5


def test_refine_mp_centroid_outside():
    # vertex average of this L-shape sits exactly on the reflex corner
    with pytest.raises(RefinementError, match="non-star"):
        refine_mp(L_SHAPE)


def test_select_representative_vertices_enumeration(rng):
    # square with an aligned vertex: corners maximize the pairwise-distance sum
    got = select_representative_vertices(SPLIT_SQUARE, 4)
    assert [(round(x, 9), round(y, 9)) for x, y in got] == [
        (0, 0), (1, 0), (1, 1), (0, 1),
    ]
    # equilateral triangle with all three midpoints inserted
    eq = Polygon(
        [(0, 0), (0.5, 0), (1, 0), (0.75, math.sqrt(3) / 4),
         (0.5, math.sqrt(3) / 2), (0.25, math.sqrt(3) / 4)]
    )
    got = select_representative_vertices(eq, 3)
    assert [(round(x, 6), round(y, 6)) for x, y in got] == [
        (0, 0), (1, 0), (0.5, round(math.sqrt(3) / 2, 6)),
    ]
    # independent exhaustive oracle on random polygons
    for _ in range(10):
        p = random_star_polygon(rng, n_min=5, n_max=7)
        L = 4
        coords = p.coords
        best, best_sum = None, -1.0
        for combo in itertools.combinations(range(p.n), L):
            s = sum(
                np.hypot(*(coords[a] - coords[b]))
                for a, b in itertools.combinations(combo, 2)
            )
            if s > best_sum + 1e-12:
                best, best_sum = combo, s
        got = select_representative_vertices(p, L)
        assert [tuple(coords[i]) for i in best] == [tuple(q) for q in got]


def test_select_representative_all_when_label_large():
    got = select_representative_vertices(SQUARE, 7)
    assert len(got) == 4


def test_refinement_points_split_square():
    pts = refinement_points(SPLIT_SQUARE, 4)
    expected = {(0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 0.5)}
    assert {(round(x, 9), round(y, 9)) for x, y in pts} == expected


def test_refinement_points_regular():
    # a polygon already regular with L vertices selects its own midpoints
    pent = regular_polygon(5)
    pts = refinement_points(pent, 5)
    mids = edge_midpoints(pent)
    assert sorted(map(tuple, pts)) == sorted(map(tuple, mids))


def test_refinement_points_distorted_quad():
    quad = Polygon([(0, 0), (1.1, -0.05), (1.05, 0.9), (0.2, 1.0), (0.1, 0.5)])
    pts = refinement_points(quad, 4)
    assert len(pts) == 4
    from polyrefine.geometry import distance_to_boundary

    d = distance_to_boundary(quad, np.asarray(pts))
    assert (d < 1e-9).all()


def test_refinement_points_modes_differ_api():
    assert refinement_points(SPLIT_SQUARE, 4, mode="sum")
    with pytest.raises(ValueError):
        refinement_points(SPLIT_SQUARE, 4, mode="bogus")


def test_cnn_mp_square_matches_mp():
    res = refine_cnn_mp(SQUARE, lambda p: 4)
    mp = refine_mp(SQUARE)
    got = sorted(sorted(map(tuple, c.coords)) for c in res.children)
    want = sorted(sorted(map(tuple, c.coords)) for c in mp.children)
    assert got == want


def test_cnn_mp_split_square_gives_four_children():
    res = refine_cnn_mp(SPLIT_SQUARE, lambda p: 4)
    assert res.strategy_used == Strategy.CNN_MP
    assert len(res.children) == 4  # plain MP would give 5
    assert len(refine_mp(SPLIT_SQUARE).children) == 5
    assert sum(child_areas(res)) == pytest.approx(area(SPLIT_SQUARE))


def test_cnn_mp_pentagon_classified_as_quad():
    pent = Polygon([(0, 0), (1, 0), (1, 1), (0.5, 1.08), (0, 1)])
    res = refine_cnn_mp(pent, lambda p: 4)
    assert len(res.children) == 4


def test_template_triangle():
    res = template_triangle(TRIANGLE, edge_midpoints(TRIANGLE))
    assert len(res.children) == 4
    assert child_areas(res) == pytest.approx([0.125] * 4)
    eq = regular_polygon(3)
    res = template_triangle(eq, edge_midpoints(eq))
    assert child_areas(res) == pytest.approx([area(eq) / 4] * 4)
    # the medial child is similar to the parent (half-scale edge lengths)
    from polyrefine.geometry import edge_lengths

    medial = res.children[-1]
    assert sorted(edge_lengths(medial)) == pytest.approx(
        [l / 2 for l in sorted(edge_lengths(eq))]
    )


def test_template_regular_counts():
    for n in (5, 6, 8):
        p = regular_polygon(n)
        res = template_regular(p, n, edge_midpoints(p))
        assert len(res.children) == n + 1
        assert sum(child_areas(res)) == pytest.approx(area(p))


def test_refine_cnn_rp_dispatch():
    res = refine_cnn_rp(regular_polygon(6), lambda p: 6)
    assert len(res.children) == 7
    res = refine_cnn_rp(regular_polygon(5), lambda p: 5)
    assert len(res.children) == 6
    res = refine_cnn_rp(TRIANGLE, lambda p: 3)
    assert len(res.children) == 4
    res = refine_cnn_rp(SQUARE, lambda p: 4)
    assert len(res.children) == 4


def test_refine_cnn_rp_label_clamped():
    # predicted label above the vertex count is clamped
    res = refine_cnn_rp(TRIANGLE, lambda p: 6)
    assert validate_partition(TRIANGLE, res.children)


def test_refine_cnn_rp_nonconvex_falls_back():
    res = refine_cnn_rp(L_SHAPE, lambda p: 4)
    assert res.strategy_used == Strategy.FALLBACK_BISECT
    assert len(res.children) == 2


def test_rp_square_three_levels_is_64():
    polys = [SQUARE]
    for _ in range(3):
        out = []
        for p in polys:
            res = refine_cnn_rp(p, lambda q: 4)
            assert res.strategy_used == Strategy.CNN_RP
            out.extend(res.children)
        polys = out
    assert len(polys) == 64
    assert sum(area(p) for p in polys) == pytest.approx(1.0)


def test_fallback_bisect_square():
    res = fallback_bisect(SQUARE)
    assert child_areas(res) == pytest.approx([0.5, 0.5])
    assert res.new_boundary_points == []


def test_fallback_bisect_l_shape_oracle():
    res = fallback_bisect(L_SHAPE)
    assert child_areas(res) == pytest.approx([1.5, 1.5])
    # enumeration oracle: the (0,0)-(1,1) diagonal is the unique maximizer
    coords = L_SHAPE.coords
    pairs = {tuple(sorted(map(tuple, (coords[0], coords[3]))))}
    got = set(map(tuple, res.children[0].coords)) & set(map(tuple, res.children[1].coords))
    assert got == {(0.0, 0.0), (1.0, 1.0)}
    assert pairs == {tuple(sorted(got))}


def test_fallback_bisect_triangle():
    res = fallback_bisect(TRIANGLE)
    assert len(res.children) == 2
    assert child_areas(res) == pytest.approx([0.25, 0.25])
    assert len(res.new_boundary_points) == 1


def test_validate_partition_rejects_bad_partitions():
    res = refine_mp(SQUARE)
    assert validate_partition(SQUARE, res.children)
    # drop one child: area mismatch
    assert not validate_partition(SQUARE, res.children[:3])
    # overlapping children
    a = Polygon([(0, 0), (1, 0), (1, 0.7), (0, 0.7)])
    b = Polygon([(0, 0.3), (1, 0.3), (1, 1), (0, 1)])
    assert not validate_partition(SQUARE, [a, b])
    # child sticking out of the parent
    c = Polygon([(0, 0), (1.4, 0), (1.4, 1), (0, 1)])
    assert not validate_partition(SQUARE, [c])


def test_corner_label():
    assert corner_label(SPLIT_SQUARE) == 4
    assert corner_label(L_SHAPE) == 6
    assert corner_label(regular_polygon(8)) == 6  # clamped to max label


@pytest.mark.parametrize("strategy", [Strategy.MP, Strategy.CNN_MP, Strategy.CNN_RP])
def test_strategy_equivariance(strategy, rng):
    """Children of a translated/scaled polygon are the translated/scaled
    children (labels held fixed, so the classifier's raster invariance is
    not in play)."""
    for _ in range(10):
        p = random_star_polygon(rng)
        label = corner_label(p, 6)
        cls = lambda q: label
        base = refine_element(p, strategy, cls)
        shift = rng.uniform(-50, 50, size=2)
        scale = rng.uniform(0.25, 4.0)
        moved = Polygon(p.coords * scale + shift)
        res = refine_element(moved, strategy, cls)
        assert len(res.children) == len(base.children)
        for a, b in zip(base.children, res.children):
            assert b.coords == pytest.approx(a.coords * scale + shift, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("strategy", [Strategy.MP, Strategy.CNN_MP, Strategy.CNN_RP])
def test_partition_validity_property(strategy, rng):
    """Acceptance: 1000 randomized polygons per strategy; every result is a
    valid partition (area conservation 1e-10 relative, no overlaps)."""
    labeler = lambda p: corner_label(p, 6)
    for i in range(1000):
        p = random_star_polygon(rng)
        if i % 5 == 0:
            # stress with an arbitrary (possibly wrong) label
            cls = lambda q, lab=int(rng.integers(3, 7)): lab
        else:
            cls = labeler
        res = refine_element(p, strategy, cls)
        assert validate_partition(p, res.children), (strategy, i)
        total = sum(area(c) for c in res.children)
        assert total == pytest.approx(area(p), rel=1e-10)
