import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from scipy.spatial import ConvexHull

from simplex_slice.core import Polytope, Subspace, normalize_direction, random_subspace
from simplex_slice.errors import DegenerateSection, DimensionMismatch
from simplex_slice.slicer import (NullPolytope, cross_polytope, cube, halfspace_clip,
                                  polytope_section, random_polytope, regular_simplex,
                                  section_volume_via_density, simplex_section,
                                  squared_volume, standard_simplex, volume)

from conftest import directions


def test_cube_volume_exact():
    assert volume(cube(3, "rational")) == Fraction(1)
    assert volume(cube(4)) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_standard_simplex_volume(n):
    expected = math.sqrt(n + 1) / math.factorial(n)
    assert volume(standard_simplex(n)) == pytest.approx(expected, rel=1e-13)
    assert squared_volume(standard_simplex(n, "rational")) == Fraction(n + 1, math.factorial(n) ** 2)


def test_regular_simplex_matches_standard():
    for n in (2, 3, 4):
        assert volume(regular_simplex(n)) == pytest.approx(volume(standard_simplex(n)), rel=1e-13)


def test_cross_polytope_and_random_hull():
    assert volume(cross_polytope(4)) == pytest.approx(2**4 / 24, rel=1e-13)
    P = random_polytope(4, 20, seed=5)
    assert volume(P) == pytest.approx(ConvexHull(P.vertices).volume, rel=1e-12)


def test_section_segment_of_triangle():
    # Delta_2 cap {x1 = x2}: segment from (0, 0, 1) to (1/2, 1/2, 0)
    S = simplex_section(normalize_direction([1, -1, 0]))
    assert volume(S) == pytest.approx(math.sqrt(1.5), rel=1e-14)
    exact = simplex_section([1, -1, 0])
    assert exact.is_rational
    assert squared_volume(exact) == Fraction(3, 2)


def test_section_with_repeated_weights():
    a = normalize_direction([1, 1, -1, -1])
    assert volume(simplex_section(a)) == pytest.approx(0.5, rel=1e-13)
    assert volume(simplex_section([1, 1, -1, -1])) == pytest.approx(0.5, rel=1e-15)


def test_section_n1_is_a_point():
    S = simplex_section(normalize_direction([1, -1]))
    assert S.subspace is None
    assert volume(S) == pytest.approx(section_volume_via_density(normalize_direction([1, -1])))


def test_degenerate_rational_direction():
    with pytest.raises(DegenerateSection):
        simplex_section([0, 0, 0])
    with pytest.raises(ValueError):
        simplex_section([1, 1, 0])


@given(directions(n_min=2, n_max=7))
def test_volume_formula(a):
    geometric = volume(simplex_section(a))
    assert geometric == pytest.approx(section_volume_via_density(a), rel=1e-9)


@given(directions(n_min=2, n_max=6))
def test_section_vertices_lie_on_both_hyperplanes(a):
    S = simplex_section(a)
    V = S.vertices
    assert np.allclose(V @ a.coeffs, 0, atol=1e-14)
    assert np.allclose(V.sum(axis=1), 1, atol=1e-14)
    assert np.all(V >= -1e-15)


def test_cube_hexagon():
    S = polytope_section(cube(3), Subspace(np.ones(3)).complement())
    assert len(S.vertices) == 6
    assert volume(S) == pytest.approx(3 * math.sqrt(3) / 4, rel=1e-13)


def test_coordinate_sections_of_cube(rng):
    for n in (2, 3, 4, 5):
        S = polytope_section(cube(n), Subspace(np.eye(n)[:, 0]).complement())
        assert volume(S) == pytest.approx(1.0, rel=1e-13)


def test_section_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        polytope_section(cube(3), random_subspace(4, 2, rng))


def test_halfspace_clip_rational_cube():
    half = halfspace_clip(cube(3, "rational"), [1, 0, 0], 0)
    assert volume(half) == Fraction(1, 2)
    corner = halfspace_clip(cube(3, "rational"), [1, 1, 1], Fraction(1, 2))
    # the corner tetrahedron x + y + z >= 1/2 of [-1/2, 1/2]^3 has legs 1
    assert volume(corner) == Fraction(1, 6)
    assert isinstance(halfspace_clip(cube(2), [1, 0], 2.0), NullPolytope)


def test_halfspace_clip_section_keeps_chart():
    S = polytope_section(cube(3), Subspace(np.ones(3)).complement())
    normal = S.chart[:, 0]
    half = halfspace_clip(S, normal, 0.0)
    assert np.array_equal(half.chart, S.chart)
    assert volume(half) == pytest.approx(volume(S) / 2, rel=1e-13)


def test_clip_triangle_through_centroid():
    T = Polytope(2, [[0, 0], [3, 0], [0, 3]], "rational")
    # the line through the centroid parallel to the hypotenuse leaves 4/9 on the vertex side
    top = halfspace_clip(T, [1, 1], 2)
    assert volume(top) / volume(T) == Fraction(5, 9)
    assert volume(halfspace_clip(T, [-1, -1], -2)) / volume(T) == Fraction(4, 9)
    assert volume(top) + volume(halfspace_clip(T, [-1, -1], -2)) == volume(T)


@given(directions(n_min=3, n_max=6))
def test_clip_splits_sections(a):
    S = simplex_section(a)
    normal = S.chart[:, 0]
    up = volume(halfspace_clip(S, normal, 0.0))
    down = volume(halfspace_clip(S, -normal, 0.0))
    assert up + down == pytest.approx(volume(S), rel=1e-10)


@pytest.mark.parametrize("d", [5, 6])
def test_central_cube_clip_high_dim(d, rng):
    # merged non-simplicial facets: any central cut of the cube is half of it
    for _ in range(3):
        theta = rng.standard_normal(d)
        assert float(volume(halfspace_clip(cube(d), theta))) == pytest.approx(0.5, abs=1e-13)
    assert volume(halfspace_clip(cube(d, "rational"), [3, 1, -2, 5, 1, 1][:d])) == Fraction(1, 2)


def test_cross_polytope_volume_exact():
    assert volume(cross_polytope(5)) == pytest.approx(2**5 / 120, rel=1e-13)
