import numpy as np
import pytest

from polyrefine.geometry import Polygon


def random_star_polygon(rng, n_min=3, n_max=9, reflex=True):
    """Random simple polygon, star-shaped about its construction center.

    Angular gaps are kept inside [0.15, 2.6] so no chord sweeps past the
    center (a gap above pi would allow self-intersection).
    """
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n))
        gaps = np.diff(angles, append=angles[0] + 2 * np.pi)
        if gaps.min() >= 0.15 and gaps.max() <= 2.6:
            break
    radii = rng.uniform(0.35 if reflex else 0.75, 1.0, size=n)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    pts += rng.uniform(-3.0, 3.0, size=2)
    return Polygon(pts)


def with_aligned_vertex(p: Polygon, edge: int = 0, t: float = 0.5) -> Polygon:
    """Copy of p with one extra vertex dropped onto the given edge."""
    pts = list(map(tuple, p.coords))
    a = np.asarray(pts[edge])
    b = np.asarray(pts[(edge + 1) % len(pts)])
    pts.insert(edge + 1, tuple(a + t * (b - a)))
    return Polygon(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
