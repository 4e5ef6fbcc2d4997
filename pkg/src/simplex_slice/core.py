"""Domain types shared by every module.

A :class:`Direction` is a unit, sum-zero coefficient vector ``a`` whose
orthogonal hyperplane cuts the regular simplex through its barycentre.
Directions are always stored sorted non-increasingly, so ``a[0]`` is the
largest coefficient and ``a[-1]`` the most negative one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _exact
from .errors import (DimensionMismatch, DimensionTooSmall, HullFailure,
                     SimplexSliceError, ZeroAfterProjection)

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2

UNIT_TOL = 1e-12
ZERO_COEFF = 1e-14


@dataclass(frozen=True, eq=False)
class Direction:
    """Sorted unit vector in R^{n+1} orthogonal to the all-ones vector."""

    coeffs: np.ndarray

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise DimensionTooSmall("a direction needs at least two coefficients")
        if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
            raise SimplexSliceError(f"direction is not unit: |a| = {np.linalg.norm(a)!r}")
        if abs(a.sum()) > UNIT_TOL:
            raise SimplexSliceError(f"direction is not sum-zero: sum = {a.sum()!r}")
        if np.any(np.diff(a) > 0):
            raise SimplexSliceError("direction coefficients must be sorted non-increasing")
        if not (a[0] > 0 > a[-1]):
            raise SimplexSliceError("direction needs a positive and a negative entry")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def n(self) -> int:
        return self.coeffs.size - 1

    @property
    def u(self) -> float:
        return float(self.coeffs[0])

    @property
    def v(self) -> float:
        return float(-self.coeffs[-1])

    def flipped(self) -> "Direction":
        """The direction ``-a``, re-sorted. ``p_a(0)`` is unchanged by this."""
        return Direction(-self.coeffs[::-1])

    def __len__(self):
        return self.coeffs.size

    def __iter__(self):
        return iter(self.coeffs.tolist())

    def __repr__(self):
        return f"Direction({np.array2string(self.coeffs, precision=6)})"


def normalize_direction(raw: Sequence[float]) -> Direction:
    """Project ``raw`` onto the sum-zero hyperplane, scale to unit length and sort."""
    x = np.asarray(raw, dtype=float).ravel()
    if x.size < 2:
        raise DimensionTooSmall("n must be at least 1 (two coefficients)")
    x = x - x.mean()
    norm = np.linalg.norm(x)
    if not np.isfinite(norm) or norm <= 1e-14 * max(1.0, np.abs(np.asarray(raw, float)).max()):
        raise ZeroAfterProjection("raw direction is parallel to the all-ones vector")
    x = x / norm
    # one extra pass removes the rounding residue of the mean subtraction
    x = x - x.mean()
    x = x / np.linalg.norm(x)
    return Direction(np.sort(x)[::-1].copy())


def extremiser(n: int) -> Direction:
    """The maximiser ``(e_1 - e_{n+1}) / sqrt(2)`` padded with zeros."""
    if n < 1:
        raise DimensionTooSmall("n must be at least 1")
    a = np.zeros(n + 1)
    a[0], a[-1] = INV_SQRT2, -INV_SQRT2
    return Direction(a)


def delta(a: Direction) -> float:
    """Squared distance from ``a`` to the extremiser ``(e_1 - e_{n+1})/sqrt(2)``."""
    c = a.coeffs
    # sum of squares of the three pieces; avoids the cancellation in 2 - sqrt2(u+v)
    return float((c[0] - INV_SQRT2) ** 2 + (c[-1] + INV_SQRT2) ** 2 + np.sum(c[1:-1] ** 2))


# --------------------------------------------------------------------------- #
# subspaces
# --------------------------------------------------------------------------- #

def _gram_schmidt(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt in column order, dropping dependent columns."""
    out = []
    for col in vectors.T:
        w = np.array(col, dtype=float)
        scale = np.linalg.norm(w)
        if scale == 0:
            continue
        for _ in range(2):
            for q in out:
                w -= (q @ w) * q
        nw = np.linalg.norm(w)
        if nw > tol * max(scale, 1.0):
            out.append(w / nw)
    if not out:
        return np.zeros((vectors.shape[0], 0))
    return np.column_stack(out)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^ambient_dim held by an orthonormal column basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        k = b.shape[1]
        q = _gram_schmidt(b)
        if q.shape[1] != k:
            raise SimplexSliceError("subspace basis vectors are linearly dependent")
        if not 1 <= k < b.shape[0]:
            raise SimplexSliceError(f"subspace dimension {k} outside [1, {b.shape[0] - 1}]")
        q.setflags(write=False)
        object.__setattr__(self, "basis", q)

    @classmethod
    def span(cls, vectors, ambient_dim: Optional[int] = None, tol: float = 1e-10) -> "Subspace":
        """Subspace spanned by the given columns; dependent columns are dropped."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if ambient_dim is not None and v.shape[0] != ambient_dim:
            raise DimensionMismatch("vectors do not live in the stated ambient space")
        return cls(_gram_schmidt(v, tol))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, x) -> np.ndarray:
        return self.basis @ (self.basis.T @ np.asarray(x, dtype=float))

    def complement(self) -> "Subspace":
        """Orthogonal complement; chart fixed by projecting e_1, e_2, ... in order."""
        resid = np.eye(self.ambient_dim) - self.projector()
        return Subspace(_gram_schmidt(resid)[:, : self.ambient_dim - self.dim])

    def contains(self, x, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.project(x)) <= tol * max(1.0, np.linalg.norm(x)))


def subspace_distance(E: Subspace, F: Subspace) -> float:
    """Hilbert-Schmidt norm of the difference of the two orthogonal projectors."""
    if E.ambient_dim != F.ambient_dim or E.dim != F.dim:
        raise DimensionMismatch(
            f"subspaces of shape ({E.ambient_dim},{E.dim}) and ({F.ambient_dim},{F.dim})")
    return float(np.linalg.norm(E.projector() - F.projector(), ord="fro"))


def random_subspace(ambient_dim: int, dim: int, rng: np.random.Generator) -> Subspace:
    """Rotation-invariant random subspace from an orthonormalised Gaussian frame."""
    return Subspace(rng.standard_normal((ambient_dim, dim)))


# --------------------------------------------------------------------------- #
# polytopes
# --------------------------------------------------------------------------- #

def _to_rational_array(vertices) -> np.ndarray:
    rows = [[_exact.as_fraction(x) for x in row] for row in vertices]
    arr = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
    for i, r in enumerate(rows):
        arr[i, :] = r
    return arr


def _dedupe_float(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if len(v) < 2:
        return v
    keep = []
    scale = max(1.0, float(np.abs(v).max()))
    for i in range(len(v)):
        if not keep or np.min(np.abs(v[keep] - v[i]).max(axis=1)) > tol * scale:
            keep.append(i)
    return v[keep]


def _dedupe_exact(v: np.ndarray) -> np.ndarray:
    seen = {}
    for row in v:
        seen.setdefault(tuple(row), row)
    out = np.empty((len(seen), v.shape[1]), dtype=object)
    for i, row in enumerate(seen.values()):
        out[i, :] = row
    return out


def affine_rank(vertices: np.ndarray, exact: bool = False, tol: float = 1e-10) -> int:
    if len(vertices) == 0:
        return -1
    diffs = vertices[1:] - vertices[0]
    if len(diffs) == 0:
        return 0
    if exact:
        return _exact.rank(diffs.tolist())
    s = np.linalg.svd(diffs.astype(float), compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope in V-representation.

    ``numeric_mode`` is ``"float"`` (float64 coordinates) or ``"rational"``
    (:class:`fractions.Fraction` coordinates, exact end to end). Bodies are
    full-dimensional unless ``hull_dim`` is given, in which case the vertex
    set must span an affine hull of exactly that dimension.
    """

    dim: int
    vertices: np.ndarray
    numeric_mode: str = "float"
    hull_dim: Optional[int] = None

    def __post_init__(self):
        if self.numeric_mode not in ("float", "rational"):
            raise SimplexSliceError(f"unknown numeric mode {self.numeric_mode!r}")
        if self.numeric_mode == "rational":
            v = _dedupe_exact(_to_rational_array(self.vertices))
        else:
            v = _dedupe_float(np.array(self.vertices, dtype=float).reshape(-1, self.dim))
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise DimensionMismatch(f"vertices must have {self.dim} coordinates")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        r = affine_rank(v, exact=self.is_rational)
        want = self.dim if self.hull_dim is None else self.hull_dim
        if r != want:
            raise HullFailure(f"vertex set has affine dimension {r}, expected {want}")
        object.__setattr__(self, "hull_dim", want)

    @property
    def is_rational(self) -> bool:
        return self.numeric_mode == "rational"

    @property
    def full_dimensional(self) -> bool:
        return self.hull_dim == self.dim

    def as_float(self) -> "Polytope":
        if not self.is_rational:
            return self
        return Polytope(self.dim, self.vertices.astype(float), "float", self.hull_dim)

    def transformed(self, matrix, shift=None) -> "Polytope":
        """Image under ``x -> matrix @ x + shift`` (float mode)."""
        m = np.asarray(matrix, dtype=float)
        v = self.vertices.astype(float) @ m.T
        if shift is not None:
            v = v + np.asarray(shift, dtype=float)
        hd = None if self.full_dimensional else self.hull_dim
        return Polytope(m.shape[0], v, "float", hd)

    def to_json(self) -> dict:
        if self.is_rational:
            verts = [[str(x) for x in row] for row in self.vertices]
        else:
            verts = self.vertices.tolist()
        return {"dim": self.dim, "vertices": verts,
                "mode": "rational" if self.is_rational else "float"}

    @classmethod
    def from_json(cls, data: dict) -> "Polytope":
        mode = data.get("mode", "float")
        return cls(int(data["dim"]), data["vertices"], mode)


# --------------------------------------------------------------------------- #
# reports
# --------------------------------------------------------------------------- #

@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    verdict: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class CaseTrace:
    delta: float
    u: float
    v: float
    sigma: float
    s: float
    t: float
    m: float
    eta: float
    regime: str
    case_label: str
    p0: float
    checks: list = field(default_factory=list)

    @property
    def all_true(self) -> bool:
        return all(c.verdict for c in self.checks)

    def failed(self) -> list:
        return [c for c in self.checks if not c.verdict]


@dataclass
class BoundReport:
    direction: Direction
    p0_exact: float
    p0_quadrature: float
    p0_montecarlo: float
    p0_montecarlo_stderr: float
    webb: float
    fourier: float
    logconcavity: float
    stability_bound: float
    global_linear: float
    deficit: float
    verdicts: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.verdicts.values())


def as_fraction_vector(raw) -> list:
    return [x if isinstance(x, Fraction) else _exact.as_fraction(x) for x in raw]
