import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simplex_slice.core import (INV_SQRT2, Direction, Polytope, Subspace, delta,
                                extremiser, normalize_direction, random_subspace,
                                subspace_distance)
from simplex_slice.errors import (DimensionMismatch, DimensionTooSmall, HullFailure,
                                  SimplexSliceError, ZeroAfterProjection)

from conftest import directions


def test_normalize_sorts_projects_and_scales():
    a = normalize_direction([1, -1, 0])
    assert np.allclose(a.coeffs, [INV_SQRT2, 0, -INV_SQRT2])
    b = normalize_direction([2, -1, -1])
    assert np.allclose(b.coeffs, np.array([2, -1, -1]) / math.sqrt(6))


def test_normalize_rejects_constant_and_short_vectors():
    with pytest.raises(ZeroAfterProjection):
        normalize_direction([1, 1, 1])
    with pytest.raises(DimensionTooSmall):
        normalize_direction([1.0])


@pytest.mark.parametrize("bad", [[0.6, -0.6], [1.0, 0.0, -1.0], [-INV_SQRT2, INV_SQRT2]])
def test_direction_validates(bad):
    with pytest.raises(SimplexSliceError):
        Direction(np.array(bad))


@given(directions())
def test_normalize_is_idempotent(a):
    b = normalize_direction(a.coeffs)
    assert np.allclose(a.coeffs, b.coeffs, atol=1e-15)
    assert abs(a.coeffs.sum()) < 1e-14
    assert abs(np.linalg.norm(a.coeffs) - 1) < 1e-14


@given(directions())
def test_flip_is_an_involution(a):
    assert np.array_equal(a.flipped().flipped().coeffs, a.coeffs)
    assert a.flipped().u == a.v


def test_delta_values():
    assert delta(extremiser(4)) == 0.0
    assert delta(normalize_direction([1, 0, -1])) < 1e-30
    # (1, 1, -2)/sqrt6 has u = 1/sqrt6 and v = 2/sqrt6
    a = normalize_direction([1, 1, -2])
    assert delta(a) == pytest.approx(2 - math.sqrt(2) * 3 / math.sqrt(6), rel=1e-14)


@given(directions(n_min=2))
def test_delta_matches_inner_product_form(a):
    assert delta(a) == pytest.approx(2 - math.sqrt(2) * (a.u + a.v), abs=1e-13)


def test_subspace_basics(rng):
    E = random_subspace(5, 2, rng)
    assert np.allclose(E.basis.T @ E.basis, np.eye(2))
    W = E.complement()
    assert W.dim == 3 and np.allclose(E.basis.T @ W.basis, 0)
    assert subspace_distance(E, E) == pytest.approx(0, abs=1e-14)
    F = random_subspace(5, 2, rng)
    P, Q = E.projector(), F.projector()
    assert subspace_distance(E, F) == pytest.approx(np.sqrt(np.trace((P - Q) @ (P - Q))))
    with pytest.raises(DimensionMismatch):
        subspace_distance(E, random_subspace(5, 3, rng))


def test_subspace_rejects_dependent_and_full():
    with pytest.raises(SimplexSliceError):
        Subspace(np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SimplexSliceError):
        Subspace(np.eye(3))
    S = Subspace.span(np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]))
    assert S.dim == 1


def test_orthogonal_lines_are_at_distance_sqrt2():
    E = Subspace(np.array([1.0, 0, 0]))
    F = Subspace(np.array([0, 1.0, 0]))
    assert subspace_distance(E, F) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_polytope_rational_roundtrip():
    P = Polytope(2, [["0", "0"], ["1/2", "0"], [0, Fraction(1, 3)]], "rational")
    Q = Polytope.from_json(P.to_json())
    assert Q.is_rational
    assert Q.vertices.tolist() == P.vertices.tolist()
    assert P.to_json()["vertices"][1] == ["1/2", "0"]


def test_polytope_dedupes_and_checks_rank():
    P = Polytope(2, [[0, 0], [1, 0], [0, 1], [0, 0]])
    assert len(P.vertices) == 3
    with pytest.raises(HullFailure):
        Polytope(2, [[0, 0], [1, 1], [2, 2]])
    flat = Polytope(3, [[1, 0, 0], [0, 1, 0], [0, 0, 1]], hull_dim=2)
    assert not flat.full_dimensional


@given(st.integers(1, 12))
def test_extremiser_is_valid(n):
    a = extremiser(n)
    assert a.u == a.v == INV_SQRT2
    assert delta(a) == 0
