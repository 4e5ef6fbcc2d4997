"""Isotropic position and the Lipschitz estimate for central sections.

Moments are computed exactly from a cone triangulation. For a simplex with
vertices ``w_0..w_d`` and volume ``V``::

    int x     = V * mean(w)
    int x x^T = V / ((d+1)(d+2)) * (sum_k w_k w_k^T + s s^T),   s = sum_k w_k

One-sided integrals of the section profile ``f(x) = vol(K cap (x + Ebar^perp))``
along a ray are volumes of clipped sections (Fubini), so Grünbaum ratios and
the Busemann functional never go through 1-D quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from . import _exact
from .core import Polytope, Subspace, random_subspace, subspace_distance
from .errors import (DimensionMismatch, DomainError, EmptySection,
                     SingularCovariance, UnboundedIntegral)
from .slicer import (_exact_simplices, _float_simplices,
                     _rational_affine_chart, halfspace_clip, polytope_section,
                     volume)

DEFAULT_C_ELL = 1.0
DISTANCE_FLOOR = 1e-8
_SV_TOL = 1e-10


# --------------------------------------------------------------------------- #
# moments
# --------------------------------------------------------------------------- #

def _float_moments(coords: np.ndarray):
    d = coords.shape[1]
    simp = _float_simplices(coords)
    vols = np.abs(np.linalg.det(simp[:, 1:] - simp[:, :1])) / math.factorial(d)
    s = simp.sum(axis=1)
    first = (vols[:, None] * s).sum(axis=0) / (d + 1)
    outer = np.einsum("fki,fkj->fij", simp, simp) + np.einsum("fi,fj->fij", s, s)
    second = np.einsum("f,fij->ij", vols, outer) / ((d + 1) * (d + 2))
    return float(vols.sum()), first, second


def _exact_moments(coords: np.ndarray):
    d = coords.shape[1]
    total = Fraction(0)
    first = [Fraction(0)] * d
    second = [[Fraction(0)] * d for _ in range(d)]
    norm = (d + 1) * (d + 2)
    for simp in _exact_simplices(coords):
        vol = _exact.simplex_volume(simp)
        if vol == 0:
            continue
        s = [sum(w[i] for w in simp) for i in range(d)]
        total += vol
        for i in range(d):
            first[i] += vol * s[i] / (d + 1)
            for j in range(i, d):
                acc = sum(w[i] * w[j] for w in simp) + s[i] * s[j]
                second[i][j] += vol * acc / norm
    for i in range(d):
        for j in range(i):
            second[i][j] = second[j][i]
    return total, np.array(first, dtype=object), np.array(second, dtype=object)


def _centre(total, first, second):
    bar = first / total
    cov = second / total - np.outer(bar, bar)
    return bar, cov


def polytope_moments(P: Polytope):
    """``(volume, barycentre, covariance)`` of the uniform measure on ``P``.

    Rational polytopes give :class:`Fraction` entries throughout. A rational
    polytope of lower affine dimension is handled in a rational chart of its
    hull: barycentre and covariance stay exact, the volume is a float.
    """
    if not P.is_rational:
        if not P.full_dimensional:
            raise SingularCovariance("float moments need a full-dimensional polytope")
        total, first, second = _float_moments(P.vertices.astype(float))
        bar, cov = _centre(total, first, second)
        return total, bar, cov
    if P.full_dimensional:
        total, first, second = _exact_moments(P.vertices)
        bar, cov = _centre(total, first, second)
        return total, bar, cov
    origin, basis, local, gram = _rational_affine_chart(P.vertices)
    total, first, second = _exact_moments(local)
    lbar, lcov = _centre(total, first, second)
    B = np.array(basis, dtype=object)
    bar = np.array(origin, dtype=object) + lbar.dot(B)
    cov = B.T.dot(lcov).dot(B)
    return math.sqrt(gram) * float(total), bar, cov


# --------------------------------------------------------------------------- #
# isotropic position
# --------------------------------------------------------------------------- #

@dataclass
class IsotropicForm:
    """A body in isotropic position together with the map that put it there.

    ``body = matrix @ original + shift``; volume 1, barycentre 0 and
    covariance ``L_K^2 I``.
    """

    body: Polytope
    matrix: np.ndarray
    shift: np.ndarray
    L_K: float
    C_ell: dict = field(default_factory=lambda: {1: 1.0})

    def c_ell(self, ell: int) -> float:
        return float(self.C_ell.get(ell, DEFAULT_C_ELL))


def to_isotropic(P: Polytope, C_ell: Optional[dict] = None) -> IsotropicForm:
    if not P.full_dimensional:
        raise SingularCovariance("isotropic position needs a full-dimensional body")
    vol, bar, cov = polytope_moments(P.as_float())
    cov = np.asarray(cov, dtype=float)
    w, Q = np.linalg.eigh(cov)
    if w[0] <= 1e-14 * max(w[-1], 1e-300):
        raise SingularCovariance("covariance is singular")
    whiten = Q @ np.diag(w ** -0.5) @ Q.T
    n = P.dim
    # whitened volume is vol / sqrt(det cov); rescale it to 1
    scale = (vol / math.sqrt(float(np.prod(w)))) ** (-1.0 / n)
    matrix = scale * whiten
    shift = -matrix @ np.asarray(bar, dtype=float)
    body = P.as_float().transformed(matrix, shift)
    _, _, cov2 = polytope_moments(body)
    L = math.sqrt(float(np.trace(np.asarray(cov2, dtype=float))) / n)
    consts = {1: 1.0}
    consts.update(C_ell or {})
    return IsotropicForm(body, matrix, shift, L, consts)


def hensley_interval(ell: int, L_K: float, C_ell: float = 1.0) -> Tuple[float, float]:
    """Range for ``vol_{n-ell}(K cap E)`` over codimension-``ell`` subspaces ``E``."""
    if ell < 1 or L_K <= 0 or C_ell < 1:
        raise DomainError("need ell >= 1, L_K > 0 and C_ell >= 1")
    lo = (2 * math.pi * math.e**3) ** (-ell / 2) / L_K**ell
    hi = C_ell**ell / L_K**ell
    return lo, hi


# --------------------------------------------------------------------------- #
# one-sided section masses
# --------------------------------------------------------------------------- #

def _unit(x) -> Tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    return (x / r if r > 0 else x), r


def _ray_flat(P: Polytope, Ebar: Subspace, theta: np.ndarray):
    """``P cap (Ebar^perp + span theta)``, or ``P`` itself when that flat is everything."""
    if Ebar.dim == 1:
        return P.as_float()
    flat = Subspace(np.column_stack([Ebar.complement().basis, theta]))
    return polytope_section(P.as_float(), flat)


def _in_subspace(Ebar: Subspace, x: np.ndarray):
    if Ebar.ambient_dim != x.size:
        raise DimensionMismatch("vector and subspace live in different spaces")
    if not Ebar.contains(x, tol=1e-8):
        raise DomainError("vector is not in the subspace")


def one_sided_mass(P: Polytope, Ebar: Subspace, theta) -> Tuple[float, float]:
    """``(int_0^inf f(t theta) dt, int_R f(t theta) dt)`` for a unit ``theta`` in ``Ebar``."""
    theta, r = _unit(theta)
    if r == 0:
        raise DomainError("theta must be nonzero")
    _in_subspace(Ebar, theta)
    flat = _ray_flat(P, Ebar, theta)
    whole = float(volume(flat))
    half = float(volume(halfspace_clip(flat, theta, 0.0)))
    return half, whole


def grunbaum_ratio(P: Polytope, Ebar: Subspace, theta) -> float:
    half, whole = one_sided_mass(P, Ebar, theta)
    if whole <= 0:
        raise EmptySection("the section through the ray has no volume")
    return half / whole


def busemann_N(P: Polytope, Ebar: Subspace, x, side: str = "plus") -> float:
    """``1 / int_0^inf f(t x) dt`` (``side="minus"`` integrates over ``t <= 0``)."""
    if side not in ("plus", "minus"):
        raise ValueError("side is 'plus' or 'minus'")
    theta, r = _unit(x)
    if r == 0:
        return 0.0
    if side == "minus":
        theta = -theta
    half, _ = one_sided_mass(P, Ebar, theta)
    if half <= 0:
        raise UnboundedIntegral("no mass along the ray")
    return r / half


# --------------------------------------------------------------------------- #
# subspace chains
# --------------------------------------------------------------------------- #

@dataclass
class ChainPlan:
    """Paired orthonormal bases ``u`` of ``E`` and ``v`` of ``F``.

    ``cosines[j] = <u_j, v_j>`` and ``<u_i, v_j> = 0`` for ``i != j``. In the
    degenerate case (``F^perp cap E != 0``) the trailing ``u_j`` span that
    intersection and are orthogonal to all of ``F``; ``k`` counts the
    non-degenerate pairs.
    """

    u: np.ndarray
    v: np.ndarray
    cosines: np.ndarray
    k: int

    @property
    def degenerate(self) -> bool:
        return self.k < self.u.shape[1]

    def kernel(self) -> Optional[Subspace]:
        """``E' = F^perp cap E`` (None in the non-degenerate case)."""
        if not self.degenerate:
            return None
        return Subspace(self.u[:, self.k:])


def principal_bases(E: Subspace, F: Subspace, tol: float = _SV_TOL) -> ChainPlan:
    """Principal-angle bases from the SVD of the cross-Gram matrix ``E^T F``."""
    if E.ambient_dim != F.ambient_dim or E.dim != F.dim:
        raise DimensionMismatch("subspaces must share ambient space and dimension")
    U, s, Vt = np.linalg.svd(E.basis.T @ F.basis)
    u = E.basis @ U
    v = F.basis @ Vt.T
    k = int(np.sum(s > tol))
    s = np.where(s > tol, s, 0.0)
    return ChainPlan(u, v, s, k)


def subspace_chain(E: Subspace, F: Subspace) -> List[Subspace]:
    """``E_0 = E, ..., E_ell = F`` with ``E_j = span(v_1..v_j, u_{j+1}..u_ell)``."""
    plan = principal_bases(E, F)
    ell = E.dim
    return [Subspace(np.column_stack([plan.v[:, :j], plan.u[:, j:]])) for j in range(ell + 1)]


@dataclass
class ChainStep:
    index: int
    E_prev: Subspace
    E_next: Subspace
    a: np.ndarray
    b: np.ndarray
    lam: float
    u_j: np.ndarray
    v_j: np.ndarray
    step_volume_gap: Optional[float] = None

    def identity_residual(self) -> float:
        """``| |a - b| / lambda - |u_j - v_j| |``; zero up to rounding."""
        if self.lam == 0:
            return 0.0
        return abs(np.linalg.norm(self.a - self.b) / self.lam
                   - np.linalg.norm(self.u_j - self.v_j))


def chain_steps(E: Subspace, F: Subspace, body: Optional[Polytope] = None) -> List[ChainStep]:
    """One :class:`ChainStep` per swap; with ``body`` the section volume gaps are filled in."""
    plan = principal_bases(E, F)
    chain = subspace_chain(E, F)
    perps = [S.complement() for S in chain]
    vols = None
    if body is not None:
        vols = [float(volume(polytope_section(body.as_float(), W))) for W in perps]
    steps = []
    for j in range(1, E.dim + 1):
        u_j, v_j = plan.u[:, j - 1], plan.v[:, j - 1]
        a = perps[j - 1].project(v_j)
        b = -perps[j].project(u_j)
        gap = None if vols is None else abs(vols[j] - vols[j - 1])
        steps.append(ChainStep(j, perps[j - 1], perps[j], a, b,
                               float(np.linalg.norm(a)), u_j, v_j, gap))
    return steps


def basis_displacement(plan: ChainPlan) -> float:
    """``sqrt(sum_j |u_j - v_j|^2)``."""
    return float(np.linalg.norm(plan.u - plan.v))


# --------------------------------------------------------------------------- #
# Lipschitz experiment
# --------------------------------------------------------------------------- #

def lipschitz_constant(ell: int, L_K: float, C_ell: float = 1.0) -> float:
    """``e^{5 ell} C_ell^{2 ell} / L_K^ell``."""
    return math.exp(5 * ell) * C_ell ** (2 * ell) / L_K**ell


def lipschitz_experiment(P: Polytope, ell: int, trials: int, seed: int = 0,
                         C_ell: Optional[float] = None, max_dim: int = 5,
                         max_ell: int = 2) -> dict:
    """Ratios ``|vol(K cap E^perp) - vol(K cap F^perp)| / d(E, F)`` on random pairs.

    ``P`` is put in isotropic position first. Pairs closer than ``1e-8`` are
    skipped. Violations of the ratio bound and of the Hensley interval are
    listed; for ``ell >= 2`` the constant ``C_ell`` is a placeholder, so those
    are reported with ``"asserted": False``.
    """
    n = P.dim
    if not 1 <= ell < n:
        raise DomainError(f"need 1 <= ell < {n}")
    if n > max_dim or ell > max_ell:
        raise DomainError(f"experiment capped at n <= {max_dim}, ell <= {max_ell}")
    iso = to_isotropic(P)
    c = iso.c_ell(ell) if C_ell is None else float(C_ell)
    rhs = lipschitz_constant(ell, iso.L_K, c)
    lo, hi = hensley_interval(ell, iso.L_K, c)
    rng = np.random.default_rng(seed)
    asserted = ell == 1
    ratios, volumes, violations = [], [], []
    skipped = 0
    for trial in range(trials):
        E = random_subspace(n, ell, rng)
        F = random_subspace(n, ell, rng)
        d = subspace_distance(E, F)
        if d <= DISTANCE_FLOOR:
            skipped += 1
            continue
        vE = float(volume(polytope_section(iso.body, E.complement())))
        vF = float(volume(polytope_section(iso.body, F.complement())))
        ratio = abs(vE - vF) / d
        ratios.append(ratio)
        volumes.extend((vE, vF))
        if ratio > rhs:
            violations.append({"trial": trial, "kind": "ratio", "value": ratio,
                               "bound": rhs, "asserted": asserted})
        for v in (vE, vF):
            if not lo <= v <= hi:
                violations.append({"trial": trial, "kind": "hensley", "value": v,
                                   "bound": [lo, hi], "asserted": asserted})
    max_ratio = max(ratios) if ratios else 0.0
    return {
        "ell": ell,
        "n": n,
        "L_K": iso.L_K,
        "C_ell": c,
        "rhs_constant": rhs,
        "max_ratio": max_ratio,
        "margin": rhs - max_ratio,
        "hensley_interval": [lo, hi],
        "min_volume": min(volumes) if volumes else None,
        "max_volume": max(volumes) if volumes else None,
        "trials": trials,
        "skipped": skipped,
        "seed": seed,
        "violations": violations,
    }
