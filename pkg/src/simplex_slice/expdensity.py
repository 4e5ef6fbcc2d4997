"""Density at zero of a signed sum of i.i.d. standard exponentials.

``p_a`` denotes the density of ``sum_j a_j X_j`` with ``X_j ~ Exp(1)``.
Three independent evaluators of ``p_a(0)`` live here:

* :func:`density_at_zero` -- closed form from the partial fraction expansion
  of the Laplace transform ``prod_j (1 + a_j s)^{-1}``, with exact handling
  of repeated coefficients;
* :func:`density_at_zero_quadrature` -- Fourier inversion by adaptive
  quadrature;
* :func:`density_at_zero_montecarlo` -- a seeded kernel estimate.

The module also carries the small one- and two-exponential density lemmas
used by the stability proof checks in :mod:`simplex_slice.bounds`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import mpmath
import numpy as np
from scipy import integrate

from .core import ZERO_COEFF, Direction
from .errors import (NonpositiveScale, NonpositiveVariance,
                     NumericallyIllConditioned, QuadratureNonConvergent)

COLLISION_GAP = 1e-9
DEFAULT_QUAD_TOL = 1e-10
ORACLE_TOL = 1e-8
MC_BATCHES = 32
_EPS = np.finfo(float).eps
# target relative accuracy of the float fast path before escalating
_FLOAT_TARGET = 1e-14


@dataclass(frozen=True)
class HypoexpTerm:
    """One summand ``poly(|x|) * exp(-rate * |x|)`` supported on one half-line."""

    rate: float
    side: str  # "positive" or "negative"
    poly_coeffs: Tuple[float, ...]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = x if self.side == "positive" else -x
        mask = y >= 0
        poly = np.polynomial.polynomial.polyval(np.abs(y), self.poly_coeffs)
        return np.where(mask, poly * np.exp(-self.rate * np.abs(y)), 0.0)

    def mass(self) -> float:
        return float(sum(c * math.factorial(i) / self.rate ** (i + 1)
                         for i, c in enumerate(self.poly_coeffs)))


# --------------------------------------------------------------------------- #
# two-exponential lemmas
# --------------------------------------------------------------------------- #

def _check_scales(*scales):
    for s in scales:
        if not s > 0:
            raise NonpositiveScale(f"scale parameters must be positive, got {s!r}")


def g_ab(x, a: float, b: float):
    """Density of ``a X - b Y`` for i.i.d. standard exponentials X, Y."""
    _check_scales(a, b)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, np.exp(-np.maximum(x, 0.0) / a), np.exp(np.minimum(x, 0.0) / b))
    out = out / (a + b)
    return float(out) if out.ndim == 0 else out


def positive_pair_density(x, a: float, b: float):
    """Density of ``a X + b Y`` (both weights positive) in closed form."""
    _check_scales(a, b)
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    if math.isclose(a, b, rel_tol=1e-12):
        out = xp * np.exp(-xp / a) / a**2
    else:
        out = (np.exp(-xp / a) - np.exp(-xp / b)) / (a - b)
    out = np.where(x > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def minmax_density_bound(a: float, b: float) -> float:
    """Uniform bound ``1 / (e min(a, b))`` on the density of ``a X + b Y``."""
    _check_scales(a, b)
    return 1.0 / (math.e * min(a, b))


def capped_overlap_bound(a: float, b: float, C: float) -> float:
    """Sharp maximum of ``int f g_{a,b}`` over densities ``f`` with ``sup f <= C``."""
    _check_scales(a, b, C)
    return -C * math.expm1(-1.0 / (C * (a + b)))


def capped_overlap_extremiser(a: float, b: float, C: float) -> Tuple[float, float]:
    """Support ``[-beta, alpha]`` of the uniform density that attains the bound."""
    _check_scales(a, b, C)
    return a / (C * (a + b)), b / (C * (a + b))


def variance_linf_bound(variance: float) -> float:
    """Sup-norm bound ``variance^{-1/2}`` for a log-concave density on the line."""
    if not variance > 0:
        raise NonpositiveVariance(f"variance must be positive, got {variance!r}")
    return variance ** -0.5


# --------------------------------------------------------------------------- #
# partial fractions
# --------------------------------------------------------------------------- #

def _clean(coeffs) -> np.ndarray:
    c = np.array(coeffs, dtype=float)
    c[np.abs(c) < ZERO_COEFF] = 0.0
    return c


def _groups(values) -> List[Tuple[float, int]]:
    """Distinct nonzero values with multiplicities, exact equality only."""
    out = {}
    for x in values:
        if x != 0:
            out[x] = out.get(x, 0) + 1
    return sorted(out.items(), key=lambda kv: -kv[0])


def _binom(m: int, i: int):
    return math.comb(m + i - 1, i)


def _pf_coefficients(groups, k, num):
    """Coefficients ``A_{k,r}``, r = 1..m_k, of ``(1 + c_k s)^{-r}``.

    With ``y = 1 + c_k s`` each other factor becomes ``alpha + beta y``; the
    truncated power series of ``prod (alpha + beta y)^{-m_j}`` in ``y`` holds
    the coefficients in reverse order. ``num`` converts floats to the working
    number type (float, mpf, Fraction).
    """
    ck, mk = groups[k]
    ck = num(ck)
    series = [num(1)] + [num(0)] * (mk - 1)
    for j, (cj, mj) in enumerate(groups):
        if j == k:
            continue
        cj = num(cj)
        alpha = (ck - cj) / ck
        beta = cj / ck
        ratio = -beta / alpha
        lead = alpha ** (-mj)
        factor = [lead * _binom(mj, i) * ratio**i for i in range(mk)]
        series = [sum(series[p] * factor[d - p] for p in range(d + 1)) for d in range(mk)]
    # A_{k,r} = series[mk - r]
    return [series[mk - r] for r in range(1, mk + 1)]


def hypoexp_terms(a, prec: int = 160) -> List[HypoexpTerm]:
    """Signed mixture representation of ``p_a`` (exact up to ``prec`` bits)."""
    coeffs = a.coeffs if isinstance(a, Direction) else _clean(a)
    groups = _groups(_clean(coeffs))
    terms = []
    with mpmath.workprec(prec):
        for k, (c, m) in enumerate(groups):
            A = _pf_coefficients(groups, k, mpmath.mpf)
            scale = abs(mpmath.mpf(c))
            poly = [mpmath.mpf(0)] * m
            for r in range(1, m + 1):
                poly[r - 1] = A[r - 1] / (scale**r * mpmath.factorial(r - 1))
            terms.append(HypoexpTerm(rate=float(1 / scale),
                                     side="positive" if c > 0 else "negative",
                                     poly_coeffs=tuple(float(p) for p in poly)))
    return terms


def hypoexp_density(a, x):
    """Evaluate ``p_a`` at arbitrary points from :func:`hypoexp_terms`.

    Only ``p_a(0)`` carries an accuracy contract; this is a diagnostic.
    """
    x = np.asarray(x, dtype=float)
    return sum(t(x) for t in hypoexp_terms(a))


def _side_values(c: np.ndarray):
    pos = c[c > 0]
    neg = -c[c < 0]
    return pos, neg


def _distinct_side_sum(side: np.ndarray, other: np.ndarray):
    """``sum_j (1/c_j) prod_{k != j} c_j / (c_j + o)`` over one side, in logs.

    ``side`` are the magnitudes of the coefficients of one sign (pairwise
    distinct), ``other`` the magnitudes of the opposite sign. Returns the sum
    and the sum of absolute values of its terms.
    """
    diff = side[:, None] - side[None, :]
    np.fill_diagonal(diff, 1.0)
    # factors c_j / (c_j - c_k) for same sign, c_j / (c_j + o_k) for the other sign
    log_same = np.log(side)[:, None] - np.log(np.abs(diff))
    np.fill_diagonal(log_same, 0.0)
    sign = np.prod(np.where(diff < 0, -1.0, 1.0), axis=1)
    log_other = (np.log(side)[:, None] - np.log(side[:, None] + other[None, :])).sum(axis=1)
    logs = log_same.sum(axis=1) + log_other - np.log(side)
    terms = sign * np.exp(logs)
    return float(terms.sum()), float(np.abs(terms).sum())


def _min_gap(values: np.ndarray) -> float:
    if values.size < 2:
        return math.inf
    d = np.diff(np.sort(values))
    d = d[d > 0]
    return float(d.min()) if d.size else math.inf


def _mp_density(c: np.ndarray) -> float:
    """High-precision evaluation, doubling precision until two passes agree."""
    groups = _groups(c)
    pos = [k for k, (val, _) in enumerate(groups) if val > 0]
    neg = [k for k, (val, _) in enumerate(groups) if val < 0]
    use = pos if sum(groups[k][1] for k in pos) <= sum(groups[k][1] for k in neg) else neg

    def at(prec):
        with mpmath.workprec(prec):
            total = mpmath.mpf(0)
            for k in use:
                A1 = _pf_coefficients(groups, k, mpmath.mpf)[0]
                total += A1 / abs(mpmath.mpf(groups[k][0]))
            return total

    prec = 96 + 8 * len(c)
    prev = at(prec)
    while prec < 1 << 14:
        prec *= 2
        cur = at(prec)
        if abs(cur - prev) <= abs(cur) * mpmath.mpf(2) ** -70:
            return float(cur)
        prev = cur
    raise NumericallyIllConditioned("high-precision evaluation did not stabilise")


def _race_density(c: np.ndarray) -> float:
    """``p_a(0)`` as ``int_0^inf f_P f_N`` for the positive and negative parts.

    Both parts are sums of exponential phases, so the integral is the corner
    entry of the solution of a Sylvester equation with bidiagonal generators.
    Its back-substitution only adds positive numbers: no cancellation, and
    equal rates need no special treatment.
    """
    lam = 1.0 / c[c > 0]
    mu = 1.0 / -c[c < 0]
    P, Q = lam.size, mu.size
    X = np.zeros((P + 1, Q + 1))
    for i in range(P - 1, -1, -1):
        li = lam[i]
        for j in range(Q - 1, -1, -1):
            mj = mu[j]
            corner = li * mj if (i == P - 1 and j == Q - 1) else 0.0
            X[i, j] = (li * X[i + 1, j] + mj * X[i, j + 1] + corner) / (li + mj)
    return float(X[0, 0])


def density_at_zero(a: Direction, mode: str = "float") -> float:
    """Exact ``p_a(0)`` from the partial fraction expansion.

    ``mode="float"`` evaluates the simple-pole formula
    ``sum_{a_j > 0} (1/a_j) prod_{k != j} a_j / (a_j - a_k)`` in log space,
    using whichever sign has pairwise-distinct coefficients (and, if both do,
    the one that cancels less). When the expansion would lose accuracy, or a
    coefficient repeats on both sides, it switches to :func:`_race_density`,
    an all-positive recursion for the same quantity. Distinct coefficients
    closer than ``1e-9`` raise :class:`NumericallyIllConditioned`.
    ``mode="mp"`` evaluates the confluent partial fraction expansion in
    extended precision and never raises for close coefficients.
    ``mode="auto"`` is float with a silent fallback to mp.
    """
    if mode not in ("float", "mp", "auto"):
        raise ValueError(f"unknown mode {mode!r}")
    c = _clean(a.coeffs if isinstance(a, Direction) else a)
    if mode == "mp":
        return _mp_density(c)
    pos, neg = _side_values(c)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("coefficients need both signs")
    candidates = []
    for side, other in ((pos, neg), (neg, pos)):
        gap = _min_gap(side)
        if np.unique(side).size == side.size:
            candidates.append((gap, side, other))
    near = min(_min_gap(pos), _min_gap(neg))
    if near < COLLISION_GAP:
        if mode == "auto":
            return _mp_density(c)
        raise NumericallyIllConditioned(
            f"distinct coefficients differ by {near:.3g} < {COLLISION_GAP:g}; "
            "use the quadrature evaluator or mode='mp'")
    if not candidates:
        return _race_density(c)
    best = None
    for _, side, other in candidates:
        value, mass = _distinct_side_sum(side, other)
        cond = mass / abs(value) if value != 0 else math.inf
        if best is None or cond < best[1]:
            best = (value, cond)
    value, cond = best
    if cond * (c.size + 2) * _EPS > _FLOAT_TARGET:
        return _race_density(c)
    return value


def density_at_zero_batch(coeffs: np.ndarray) -> np.ndarray:
    """Vectorised float ``p_a(0)`` for rows of sorted directions.

    Rows whose positive coefficients are pairwise distinct and well separated
    go through a batched log-space formula; all other rows (and rows whose
    cancellation estimate is poor) use the positive recursion, or extended
    precision when two distinct coefficients nearly collide.
    """
    A = np.array(coeffs, dtype=float)
    A[np.abs(A) < ZERO_COEFF] = 0.0
    B, d = A.shape
    out = np.full(B, np.nan)
    pos = A > 0
    # pairwise gaps among positive entries (sorted rows: adjacent is enough)
    adj = A[:, :-1] - A[:, 1:]
    both_pos = pos[:, :-1] & pos[:, 1:]
    gap_ok = np.all(np.where(both_pos, adj >= COLLISION_GAP, True), axis=1)
    safe_a = np.where(pos, A, 1.0)
    diff = safe_a[:, :, None] - A[:, None, :]
    eye = np.eye(d, dtype=bool)[None]
    valid = pos[:, :, None] & ~eye
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.where(valid, np.log(safe_a)[:, :, None] - np.log(np.abs(diff)), 0.0)
        sign = np.prod(np.where(valid & (diff < 0), -1.0, 1.0), axis=2)
        logs = logf.sum(axis=2) - np.log(safe_a)
        terms = np.where(pos, sign * np.exp(logs), 0.0)
    value = terms.sum(axis=1)
    mass = np.abs(terms).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = mass / np.abs(value)
    good = gap_ok & np.isfinite(cond) & (cond * (d + 2) * _EPS <= _FLOAT_TARGET)
    out[good] = value[good]
    for i in np.flatnonzero(~good):
        row = A[i]
        near = min(_min_gap(row[row > 0]), _min_gap(-row[row < 0]))
        out[i] = _mp_density(row) if near < COLLISION_GAP else _race_density(row)
    return out


# --------------------------------------------------------------------------- #
# Fourier inversion
# --------------------------------------------------------------------------- #

def _char_real(t, c: np.ndarray):
    """``Re prod_j (1 - i c_j t)^{-1}`` for real ``t`` (array)."""
    t = np.asarray(t, dtype=float)
    z = 1.0 - 1j * np.multiply.outer(t, c)
    return np.real(np.exp(-np.log(z).sum(axis=-1)))


def density_at_zero_quadrature(a: Direction, tol: float = DEFAULT_QUAD_TOL,
                               limit: int = 400) -> float:
    """``(1/pi) int_0^inf Re phi(t) dt`` for the characteristic function ``phi``.

    ``[0, 1]`` is integrated directly and ``[1, T]`` after ``t = e^u``, which
    spreads the turning points ``t = 1/|c_j|`` of the factors evenly; those
    points are passed as breakpoints so small weights are not stepped over.
    ``T`` is chosen so that ``|phi(t)| <= 1/(|c_1 c_2| t^2)`` (two largest
    weights) leaves a tail below ``tol / 10``; the leading term of that tail,
    ``Re prod_j (-i c_j t)^{-1}``, is added back in closed form.
    """
    c = _clean(a.coeffs if isinstance(a, Direction) else a)
    c = c[c != 0]
    if c.size < 2:
        raise ValueError("need at least two nonzero coefficients")
    big = np.sort(np.abs(c))[-2:]
    T = max(10.0 / (math.pi * big[0] * big[1] * tol), math.e)
    U = math.log(T)

    def head(t):
        return float(_char_real(t, c))

    def tail(u):
        t = math.exp(u)
        return float(_char_real(t, c)) * t

    knots = np.unique(np.log(1.0 / np.abs(c)))
    knots = knots[(knots > 0) & (knots < U)]
    # QUADPACK needs more subintervals than breakpoints
    limit = max(limit, knots.size + 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        v1, e1 = integrate.quad(head, 0.0, 1.0, epsabs=tol * math.pi / 8, epsrel=0.0,
                                limit=limit)
        v2, e2 = integrate.quad(tail, 0.0, U, epsabs=tol * math.pi / 8, epsrel=0.0,
                                limit=limit, points=knots if knots.size else None)
    k = c.size
    # prod_j (-i c_j t)^{-1} = i^k / (prod c_j t^k); real only for even k
    rest = 0.0
    if k % 2 == 0:
        log_t = (1 - k) * U - math.log(k - 1) - float(np.sum(np.log(np.abs(c))))
        rest = (-1) ** (k // 2) * float(np.prod(np.sign(c))) * math.exp(log_t)
    err = e1 + e2
    if not err <= tol * math.pi:
        raise QuadratureNonConvergent(f"error estimate {err / math.pi:.3g} exceeds tol {tol:g}")
    return (v1 + v2 + rest) / math.pi


# --------------------------------------------------------------------------- #
# Monte Carlo
# --------------------------------------------------------------------------- #

def _boundary_kernel(y):
    """Local-linear boundary kernel for the triangular kernel on ``[0, 1]``."""
    return np.where(y < 1.0, 6.0 * (1.0 - y) * (1.0 - 2.0 * y), 0.0)


def density_at_zero_montecarlo(a: Direction, samples: int = 10**6,
                               seed: int = 0) -> Tuple[float, float]:
    """Seeded kernel estimate of ``p_a(0)`` with a batch-means standard error.

    Bandwidth ``h = samples^{-1/5} * sd``. Because ``p_a`` may have a kink at
    the origin (two nonzero weights), the two one-sided limits are estimated
    separately with the boundary-corrected triangular kernel and averaged.
    """
    if samples < 10**4:
        raise ValueError("samples must be at least 1e4")
    c = _clean(a.coeffs if isinstance(a, Direction) else a)
    c = c[c != 0]
    rng = np.random.default_rng(seed)
    per = samples // MC_BATCHES
    sums = np.empty((MC_BATCHES, per))
    for b in range(MC_BATCHES):
        sums[b] = rng.standard_exponential((per, c.size)) @ c
    h = (per * MC_BATCHES) ** -0.2 * float(sums.std())
    est = np.empty(MC_BATCHES)
    for b in range(MC_BATCHES):
        s = sums[b] / h
        right = _boundary_kernel(s[(s >= 0) & (s < 1)]).sum()
        left = _boundary_kernel(-s[(s < 0) & (s > -1)]).sum()
        est[b] = 0.5 * (right + left) / (per * h)
    return float(est.mean()), float(est.std(ddof=1) / math.sqrt(MC_BATCHES))
