"""Exact geometry of polytope sections.

Volumes come from a pulling triangulation built on the vertex/facet
incidences reported by Qhull, summing the simplex volumes ``|det| / d!``. Qhull only supplies combinatorics, so in
rational mode every determinant is evaluated with :class:`Fraction`.

Sections and half-space clips are computed on the V-representation: the
intersection of ``conv(V)`` with a hyperplane is the convex hull of the
vertices lying on it and of the crossing points of all segments ``[v, w]``
whose endpoints are on opposite sides. Flats of higher codimension are cut
one hyperplane at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _exact
from .core import (Direction, Polytope, Subspace, _gram_schmidt,
                   as_fraction_vector)
from .errors import DegenerateSection, DimensionMismatch, HullFailure
from .expdensity import density_at_zero

MAX_GEOMETRIC_DIM = 10
_PLANE_TOL = 1e-12
_FACET_TOL = 1e-9


# --------------------------------------------------------------------------- #
# bodies
# --------------------------------------------------------------------------- #

def standard_simplex(n: int, mode: str = "float") -> Polytope:
    """``conv{e_1, ..., e_{n+1}}`` in R^{n+1} (an n-dimensional body)."""
    verts = [[1 if i == j else 0 for i in range(n + 1)] for j in range(n + 1)]
    return Polytope(n + 1, verts, mode, hull_dim=n)


def simplex_chart(n: int) -> np.ndarray:
    """Orthonormal basis (columns) of ``1^perp`` in R^{n+1}, index-ordered."""
    resid = np.eye(n + 1) - 1.0 / (n + 1)
    return _gram_schmidt(resid)[:, :n]


def regular_simplex(n: int) -> Polytope:
    """The regular simplex with edge sqrt(2) as a full-dimensional body in R^n, centred."""
    chart = simplex_chart(n)
    verts = (np.eye(n + 1) - 1.0 / (n + 1)) @ chart
    return Polytope(n, verts)


def cube(n: int, mode: str = "float", centred: bool = True) -> Polytope:
    lo, hi = (Fraction(-1, 2), Fraction(1, 2)) if centred else (Fraction(0), Fraction(1))
    grid = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
    verts = [[hi if b else lo for b in row] for row in grid]
    if mode == "float":
        verts = [[float(x) for x in row] for row in verts]
    return Polytope(n, verts, mode)


def cross_polytope(n: int) -> Polytope:
    eye = np.eye(n)
    return Polytope(n, np.vstack([eye, -eye]))


def random_polytope(n: int, k: int, seed: int = 0, symmetric: bool = False) -> Polytope:
    """Hull of ``k`` uniform points on the unit sphere (``2k`` if ``symmetric``)."""
    if k < n + 1:
        raise ValueError("need at least n + 1 points")
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((k, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    if symmetric:
        pts = np.vstack([pts, -pts])
    return Polytope(n, pts)


# --------------------------------------------------------------------------- #
# triangulation and volume
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class SectionPolytope:
    """A polytope living in the flat ``offset + span(chart)``.

    ``vertices`` are ambient coordinates (floats, or Fractions for exact
    simplex sections); ``chart`` is an orthonormal column basis fixing the
    local coordinates. An empty section has no vertices.
    """

    parent: Optional[Polytope]
    subspace: Optional[Subspace]
    offset: np.ndarray
    chart: np.ndarray
    vertices: np.ndarray

    @property
    def dim(self) -> int:
        return self.chart.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.chart.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def is_rational(self) -> bool:
        return self.vertices.dtype == object

    @property
    def vertices_local(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, self.dim))
        return (self.vertices.astype(float) - self.offset) @ self.chart


@dataclass(frozen=True)
class NullPolytope:
    """Empty (or measure-zero) result of a clip; volume 0."""

    dim: int

    @property
    def is_empty(self) -> bool:
        return True


def _hull(coords: np.ndarray) -> ConvexHull:
    try:
        return ConvexHull(coords)
    except (QhullError, ValueError):
        pass
    try:
        # heavily degenerate inputs (many coplanar points) may need wide merges
        opts = "Qx Q12" if coords.shape[1] > 4 else "Q12"
        return ConvexHull(coords, qhull_options=opts)
    except (QhullError, ValueError) as exc:
        raise HullFailure(str(exc).splitlines()[0] if str(exc) else "qhull failed") from exc


def _triangulation(coords: np.ndarray) -> np.ndarray:
    """Index sets ``(T, d + 1)`` of simplices tiling ``conv(coords)``.

    Qhull supplies the vertices and the facet planes; its own triangulated
    output can overlap on merged (non-simplicial) facets, so it is not used.
    The tiling is a pulling triangulation: a face is coned from its smallest
    vertex over those of its facets that miss that vertex, recursively. The
    facets of a face are its intersections with the facet incidence sets
    that lose exactly one dimension.
    """
    d = coords.shape[1]
    if d == 1:
        return np.array([[int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))]])
    hull = _hull(coords)
    verts = np.sort(hull.vertices)
    scale = max(1.0, float(np.abs(coords - coords.mean(axis=0)).max()))
    tol = _FACET_TOL * scale
    dist = np.abs(coords[verts] @ hull.equations[:, :-1].T + hull.equations[:, -1])
    incid = {frozenset(verts[dist[:, j] <= tol].tolist()) for j in range(dist.shape[1])}
    incid = [f for f in incid if len(f) >= d]

    def affine_dim(S):
        pts = coords[sorted(S)]
        return int(np.linalg.matrix_rank(pts[1:] - pts[0], tol=tol)) if len(pts) > 1 else 0

    memo = {}

    def pull(S, k):
        if len(S) == k + 1:
            return [tuple(sorted(S))]
        if S in memo:
            return memo[S]
        apex = min(S)
        facets = set()
        for F in incid:
            T = S & F
            if len(T) >= k and T != S and apex not in T and T not in facets and affine_dim(T) == k - 1:
                facets.add(T)
        out = [(apex,) + t for T in facets for t in pull(T, k - 1)]
        memo[S] = out
        return out

    return np.array(pull(frozenset(verts.tolist()), d), dtype=int).reshape(-1, d + 1)


def _float_simplices(coords: np.ndarray):
    """Simplices of a triangulation of ``conv(coords)`` as an array ``(T, d + 1, d)``."""
    return coords[_triangulation(coords)]


def _float_volume(coords: np.ndarray) -> float:
    d = coords.shape[1]
    if d == 0:
        return 1.0 if len(coords) else 0.0
    if len(coords) < d + 1:
        raise HullFailure("fewer than d + 1 points")
    simp = _float_simplices(coords)
    dets = np.linalg.det(simp[:, 1:] - simp[:, :1])
    return float(np.abs(dets).sum() / math.factorial(d))


def _exact_simplices(coords_exact: np.ndarray):
    """Triangulation simplices over exact coordinates; combinatorics from float Qhull."""
    for idx in _triangulation(coords_exact.astype(float)):
        yield [list(coords_exact[i]) for i in idx]


def _exact_volume(coords_exact: np.ndarray) -> Fraction:
    d = coords_exact.shape[1]
    if d == 0:
        return Fraction(1)
    total = Fraction(0)
    for s in _exact_simplices(coords_exact):
        total += _exact.simplex_volume(s)
    return total


def _float_affine_chart(vertices: np.ndarray, k: int):
    origin = vertices.mean(axis=0)
    basis = _gram_schmidt((vertices - origin).T)
    if basis.shape[1] != k:
        raise HullFailure(f"affine hull has dimension {basis.shape[1]}, expected {k}")
    return origin, basis


def _rational_affine_chart(vertices: np.ndarray):
    """Rational (non-orthonormal) chart: ``(origin, basis rows, local coords, gram det)``."""
    origin = list(vertices[0])
    diffs = [[x - o for x, o in zip(v, origin)] for v in vertices]
    _, pivots = _exact.row_echelon(np.array(diffs[1:], dtype=object).T.tolist())
    basis = [diffs[1 + p] for p in pivots]
    k = len(basis)
    gram = [[sum(x * y for x, y in zip(bi, bj)) for bj in basis] for bi in basis]
    local = []
    for d in diffs:
        rhs = [sum(x * y for x, y in zip(bi, d)) for bi in basis]
        local.append(_exact.solve(gram, rhs) if k else [])
    arr = np.empty((len(local), k), dtype=object)
    for i, row in enumerate(local):
        arr[i, :] = row
    return origin, basis, arr, _exact.det(gram) if k else Fraction(1)


def squared_volume(P: Union[Polytope, SectionPolytope]) -> Fraction:
    """Exact squared ``d``-volume of a rational polytope of affine dimension ``d``."""
    verts = P.vertices
    if verts.dtype != object:
        raise ValueError("squared_volume needs rational vertices")
    k = P.hull_dim if isinstance(P, Polytope) else P.dim
    if len(verts) == 0:
        return Fraction(0)
    _, basis, local, gram = _rational_affine_chart(verts)
    if len(basis) < k:
        return Fraction(0)
    vol = _exact_volume(local)
    return vol * vol * gram


def volume(P) -> Union[float, Fraction]:
    """d-dimensional volume, d being the affine dimension of ``P``.

    Rational full-dimensional polytopes give an exact :class:`Fraction`;
    rational lower-dimensional ones give the float square root of the exact
    :func:`squared_volume`. Empty and degenerate sections have volume 0.
    """
    if isinstance(P, NullPolytope):
        return 0.0
    if isinstance(P, SectionPolytope):
        if P.is_empty:
            return 0.0
        if P.is_rational:
            return math.sqrt(squared_volume(P))
        try:
            return _float_volume(P.vertices_local)
        except HullFailure:
            return 0.0
    if P.is_rational:
        if P.full_dimensional:
            return _exact_volume(P.vertices)
        return math.sqrt(squared_volume(P))
    verts = P.vertices
    if P.full_dimensional:
        return _float_volume(verts)
    origin, basis = _float_affine_chart(verts, P.hull_dim)
    return _float_volume((verts - origin) @ basis)


# --------------------------------------------------------------------------- #
# simplex sections
# --------------------------------------------------------------------------- #

def _direction_vector(a):
    if isinstance(a, Direction):
        return a.coeffs, False
    vals = list(a)
    if any(isinstance(x, (Fraction, int, str)) for x in vals) and not any(
            isinstance(x, float) for x in vals):
        q = as_fraction_vector(vals)
        if sum(q) != 0:
            raise ValueError("rational direction must sum to zero")
        return np.array(q, dtype=object), True
    return np.asarray(vals, dtype=float), False


def section_chart(a_float: np.ndarray) -> np.ndarray:
    """Orthonormal chart of ``1^perp cap a^perp``, fixed by index order."""
    m = a_float.size
    M = np.column_stack([np.ones(m) / math.sqrt(m), a_float / np.linalg.norm(a_float)])
    q = _gram_schmidt(M)
    resid = np.eye(m) - q @ q.T
    return _gram_schmidt(resid)[:, : m - q.shape[1]]


def simplex_section(a) -> SectionPolytope:
    """``Delta_n cap a^perp`` (through the barycentre) for a direction ``a``.

    ``a`` is a :class:`Direction`, or a sum-zero vector of integers /
    Fractions for an exact rational section (scaling does not change the
    hyperplane, so no normalisation is needed).
    """
    c, exact = _direction_vector(a)
    m = c.size
    n = m - 1
    zero = Fraction(0) if exact else 0.0
    if not exact:
        c = np.where(np.abs(c) < 1e-14, 0.0, c)
    pos = [j for j in range(m) if c[j] > zero]
    neg = [k for k in range(m) if c[k] < zero]
    zer = [j for j in range(m) if c[j] == zero]
    if not pos or not neg:
        raise DegenerateSection("hyperplane misses the interior of the simplex")
    rows = []
    for j in pos:
        for k in neg:
            v = [zero] * m
            den = c[j] - c[k]
            v[k] = c[j] / den
            v[j] = -c[k] / den
            rows.append(v)
    for j in zer:
        v = [zero] * m
        v[j] = Fraction(1) if exact else 1.0
        rows.append(v)
    verts = np.array(rows, dtype=object if exact else float)
    cf = c.astype(float)
    chart = section_chart(cf)
    offset = np.full(m, 1.0 / m)
    sub = Subspace(chart) if chart.shape[1] >= 1 and chart.shape[1] < m else None
    return SectionPolytope(standard_simplex(n, "rational" if exact else "float"),
                           sub, offset, chart, verts)


def section_volume_via_density(a: Direction, mode: str = "auto") -> float:
    """``sqrt(n+1) / (n-1)! * p_a(0)``."""
    n = a.n
    return math.sqrt(n + 1) / math.factorial(n - 1) * density_at_zero(a, mode=mode)


# --------------------------------------------------------------------------- #
# general sections and clips
# --------------------------------------------------------------------------- #

def _cut(points: np.ndarray, normal, level):
    """Points of ``conv(points)`` on ``<x, normal> = level`` generating that set."""
    exact = points.dtype == object
    if len(points) == 0:
        return points
    h = points.dot(normal) - level
    if exact:
        on = np.array([x == 0 for x in h], dtype=bool)
        up = np.array([x > 0 for x in h], dtype=bool)
        dn = np.array([x < 0 for x in h], dtype=bool)
    else:
        tol = _PLANE_TOL * max(1.0, float(np.abs(points).max()))
        on = np.abs(h) <= tol
        up = h > tol
        dn = h < -tol
    out = [points[on]]
    iu, idn = np.flatnonzero(up), np.flatnonzero(dn)
    if iu.size and idn.size:
        hu = h[iu][:, None]
        hd = h[idn][None, :]
        t = hu / (hu - hd)
        P = points[iu][:, None, :]
        Q = points[idn][None, :, :]
        cross = P + t[:, :, None] * (Q - P)
        out.append(cross.reshape(-1, points.shape[1]))
    return np.concatenate(out, axis=0)


def _clip_points(points: np.ndarray, normal, level):
    """Generators of ``conv(points) cap {<x, normal> >= level}``."""
    exact = points.dtype == object
    h = points.dot(normal) - level
    if exact:
        keep = np.array([x >= 0 for x in h], dtype=bool)
    else:
        tol = _PLANE_TOL * max(1.0, float(np.abs(points).max()))
        keep = h >= -tol
    crossing = _cut(points, normal, level)
    return np.concatenate([points[keep], crossing], axis=0)


def _prune(points: np.ndarray, origin: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Drop non-extreme points (float); keeps everything if the set is flat."""
    if len(points) <= basis.shape[1] + 1:
        return points
    local = (points - origin) @ basis
    if basis.shape[1] == 1:
        return points[[int(np.argmin(local[:, 0])), int(np.argmax(local[:, 0]))]]
    try:
        hull = ConvexHull(local)
    except (QhullError, ValueError):
        return _unique_rows(points)
    return points[np.sort(hull.vertices)]


def _unique_rows(points: np.ndarray, decimals: int = 12) -> np.ndarray:
    if len(points) == 0:
        return points
    _, idx = np.unique(np.round(points, decimals), axis=0, return_index=True)
    return points[np.sort(idx)]


def polytope_section(P: Polytope, S: Subspace, offset=None) -> SectionPolytope:
    """``P cap (offset + S)`` with local coordinates in the orthonormal chart of S."""
    if S.ambient_dim != P.dim:
        raise DimensionMismatch("subspace and polytope live in different spaces")
    if not P.full_dimensional:
        raise HullFailure("polytope_section expects a full-dimensional polytope")
    D = P.dim
    o = np.zeros(D) if offset is None else np.asarray(offset, dtype=float)
    U = S.basis
    W = S.complement().basis
    pts = P.vertices.astype(float)
    for r in range(W.shape[1]):
        w = W[:, r]
        pts = _cut(pts, w, float(w @ o))
        if len(pts) == 0:
            break
        rest = np.column_stack([U, W[:, r + 1:]])
        pts = _prune(pts, o, rest)
    return SectionPolytope(P, S, o, U, pts)


def halfspace_clip(P, normal, level: float = 0.0):
    """``P cap {<x, normal> >= level}``.

    Polytopes in, polytopes out: a clip that is empty or has no interior
    comes back as :class:`NullPolytope`. Section polytopes are clipped in
    their own flat and keep their chart.
    """
    normal = np.asarray(normal)
    if isinstance(P, SectionPolytope):
        if P.is_empty:
            return P
        if P.is_rational:
            nq = as_fraction_vector(normal.tolist())
            pts = _clip_points(P.vertices, np.array(nq, dtype=object), _exact.as_fraction(level))
        else:
            pts = _clip_points(P.vertices, normal.astype(float), float(level))
            if len(pts):
                pts = _prune(pts, P.offset, P.chart)
        return SectionPolytope(P.parent, P.subspace, P.offset, P.chart, pts)
    if P.is_rational:
        nq = np.array(as_fraction_vector(normal.tolist()), dtype=object)
        pts = _clip_points(P.vertices, nq, _exact.as_fraction(level))
    else:
        pts = _clip_points(P.vertices, normal.astype(float), float(level))
        if len(pts) and P.full_dimensional:
            pts = _prune(pts, np.zeros(P.dim), np.eye(P.dim))
    if len(pts) == 0:
        return NullPolytope(P.hull_dim)
    hd = None if P.full_dimensional else P.hull_dim
    try:
        return Polytope(P.dim, pts, P.numeric_mode, hd)
    except HullFailure:
        return NullPolytope(P.hull_dim)
