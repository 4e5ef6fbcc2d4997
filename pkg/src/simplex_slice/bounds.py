"""Upper bounds on ``p_a(0)`` and a numerical replay of the stability proof.

Everything here is checked against the exact evaluator
:func:`simplex_slice.expdensity.density_at_zero`:

* Webb's bound ``p_a(0) <= 1/sqrt(2)``;
* the Fourier product bound built from :func:`psi`;
* the log-concavity bound ``1 / (2 max(a_1, -a_{n+1}))``;
* the stability deficit (``sqrt(delta)/10`` near the extremiser, a fixed
  constant away from it) and the global linear consequence;
* :func:`classify_case`, which walks the case tree of the stability proof
  and records every intermediate inequality it relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln

from .core import (INV_SQRT2, SQRT2, BoundReport, CaseTrace, Check, Direction,
                   delta, extremiser, normalize_direction)
from .errors import DomainError, NotApplicable
from .expdensity import (DEFAULT_QUAD_TOL, capped_overlap_bound,
                         density_at_zero, density_at_zero_batch,
                         density_at_zero_montecarlo,
                         density_at_zero_quadrature, minmax_density_bound,
                         variance_linf_bound)

ETA = 5e-5
NEAR_THRESHOLD = 1.0 / 2000
NEAR_SLOPE = 0.1
FAR_DEFICIT = 2.0 * SQRT2 * 1e-5
GLOBAL_SLOPE = 2e-5
FAR_GOAL = (1.0 - 4e-5) * INV_SQRT2
# magnitude cap for every weight except a_1 in the far regime
FAR_CAP = (1.0 - 1.0 / 4000) * INV_SQRT2
CHECK_SLACK = 1e-12
_TIE_TOL = 1e-24

# asymptotic series of sqrt(pi) * psi(x) at x -> 0
_PSI_SERIES = (1.0, 3.0 / 4, 25.0 / 32, 105.0 / 128, 1659.0 / 2048)
_PSI_SERIES_CUTOFF = 1e-4


def psi(x):
    """``Gamma(1/(2x) - 1/2) / (Gamma(1/(2x)) sqrt(2 pi x))`` on ``0 < x < 1``."""
    xa = np.asarray(x, dtype=float)
    if np.any(~((xa > 0) & (xa < 1))):
        raise DomainError("psi is defined on the open interval (0, 1)")
    z = 0.5 / xa
    with np.errstate(all="ignore"):
        direct = np.exp(gammaln(z - 0.5) - gammaln(z)) / np.sqrt(2.0 * math.pi * xa)
    series = np.polynomial.polynomial.polyval(xa, _PSI_SERIES) / math.sqrt(math.pi)
    out = np.where(xa < _PSI_SERIES_CUTOFF, series, direct)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PsiTable:
    grid: Tuple[Tuple[float, float], ...]

    @classmethod
    def build(cls, xs) -> "PsiTable":
        xs = np.unique(np.asarray(xs, dtype=float))
        return cls(tuple(zip(xs.tolist(), np.atleast_1d(psi(xs)).tolist())))

    def strictly_increasing(self) -> bool:
        vals = np.array([v for _, v in self.grid])
        return bool(np.all(np.diff(vals) > 0))


def psi_product_constant(eta: float = ETA) -> float:
    """``psi(1/2+eta)^{1/2+eta} psi(1/2-1/8000)^{1/2-eta}``; the proof needs it below ``1 - 5e-5``."""
    return psi(0.5 + eta) ** (0.5 + eta) * psi(0.5 - 1.0 / 8000) ** (0.5 - eta)


def _coeffs(a):
    return a.coeffs if isinstance(a, Direction) else np.asarray(a, dtype=float)


def webb_bound(a=None) -> float:
    return INV_SQRT2


def webb_check(a: Direction, p0: Optional[float] = None, slack: float = CHECK_SLACK) -> bool:
    p = density_at_zero(a, mode="auto") if p0 is None else p0
    return p <= INV_SQRT2 + slack


def fourier_bound(a) -> float:
    """``(1/sqrt 2) prod_j psi(a_j^2)^{a_j^2}``; zero weights contribute 1."""
    sq = _coeffs(a) ** 2
    sq = sq[sq > 0]
    if np.any(sq >= 1):
        raise DomainError("a coefficient has magnitude >= 1")
    return INV_SQRT2 * math.exp(float(np.sum(sq * np.log(psi(sq)))))


def fourier_bound_batch(A: np.ndarray) -> np.ndarray:
    sq = np.asarray(A, dtype=float) ** 2
    safe = np.where(sq > 0, sq, 0.5)
    logs = np.where(sq > 0, sq * np.log(psi(safe)), 0.0)
    return INV_SQRT2 * np.exp(logs.sum(axis=1))


def logconcavity_bound(a) -> float:
    c = _coeffs(a)
    return 1.0 / (2.0 * max(float(c[0]), float(-c[-1])))


def stability_deficit_bound(a) -> float:
    d = delta(a) if isinstance(a, Direction) else float(a)
    if d <= NEAR_THRESHOLD:
        return NEAR_SLOPE * math.sqrt(max(d, 0.0))
    return FAR_DEFICIT


def global_linear_bound(a) -> float:
    d = delta(a) if isinstance(a, Direction) else float(a)
    return INV_SQRT2 - GLOBAL_SLOPE * math.sqrt(max(d, 0.0))


# --------------------------------------------------------------------------- #
# proof replay
# --------------------------------------------------------------------------- #

def _one_minus_exp_over(x: float, w: float) -> float:
    """``(1 - exp(-x/w)) / x`` with its limit ``1/w`` at ``x = 0``."""
    if x == 0:
        return 1.0 / w
    return -math.expm1(-x / w) / x


def classify_case(a: Direction, p0: Optional[float] = None,
                  slack: float = CHECK_SLACK) -> CaseTrace:
    """Follow the decision tree of the stability proof for ``a``.

    ``a`` is replaced by ``-a`` when ``v > u``. Every inequality used on the
    chosen branch is evaluated and stored as a :class:`Check` with verdict
    ``lhs <= rhs + slack``.
    """
    if a.n < 2:
        raise NotApplicable("n = 1: delta vanishes identically")
    if a.v > a.u:
        a = a.flipped()
    p = density_at_zero(a, mode="auto") if p0 is None else float(p0)
    c = a.coeffs
    u, v = a.u, a.v
    d = max(delta(a), 0.0)
    sigma = math.sqrt(max(0.0, float(np.sum(c[1:-1] ** 2))))
    s = (u + v) / SQRT2
    t = (u - v) / SQRT2
    m = float(np.max(np.abs(c[1:])))
    checks = []

    def check(name, lhs, rhs):
        checks.append(Check(name, float(lhs), float(rhs), bool(lhs <= rhs + slack)))

    if d <= NEAR_THRESHOLD:
        regime = "near"
        goal = INV_SQRT2 - NEAR_SLOPE * math.sqrt(d)
        w = u + v
        root = math.sqrt(d / 2)
        # sigma >= sqrt(delta/2)  <=>  sigma^2 >= (u - 1/sqrt2)^2 + (v - 1/sqrt2)^2,
        # compared in this form so the extremiser itself lands on the tie
        if sigma**2 >= (u - INV_SQRT2) ** 2 + (v - INV_SQRT2) ** 2 - _TIE_TOL:
            label = "near-1"
            capped = _one_minus_exp_over(sigma, w)
            check("p <= (1/sigma)(1 - exp(-sigma/(u+v)))", p, capped)
            at_root = _one_minus_exp_over(root, w)
            check("decreasing in sigma: value at sigma <= value at sqrt(delta/2)", capped, at_root)
            y = root / w
            check("y = sqrt(delta/2)/(u+v) < 1", y, 1.0)
            taylor3 = y - y * y / 2 + y**3 / 6
            check("1 - exp(-y) <= y - y^2/2 + y^3/6", -math.expm1(-y), taylor3)
            check("y - y^2/2 + y^3/6 <= y - y^2/3", taylor3, y - y * y / 3)
            quad = 1.0 / w - root / (3.0 * w * w)
            check("(1/sqrt(delta/2))(1 - exp(-y)) <= 1/(u+v) - sqrt(delta/2)/(3(u+v)^2)",
                  at_root, quad)
            check("1/(u+v) <= 1/sqrt2 + delta/sqrt2", 1.0 / w, INV_SQRT2 + d * INV_SQRT2)
            check("(u+v)^2 <= 2", w * w, 2.0)
            linear = INV_SQRT2 + d * INV_SQRT2 - math.sqrt(d) / (6 * SQRT2)
            check("1/(u+v) - sqrt(delta/2)/(3(u+v)^2) <= 1/sqrt2 + delta/sqrt2 - sqrt(delta)/(6 sqrt2)",
                  quad, linear)
            check("1/sqrt2 + delta/sqrt2 - sqrt(delta)/(6 sqrt2) <= 1/sqrt2 - sqrt(delta)/10",
                  linear, goal)
        else:
            label = "near-2"
            half_u = 1.0 / (2 * u)
            check("p <= 1/(2u)", p, half_u)
            lower_t = math.sqrt(max(s * (1 - s), 0.0))
            check("t > sqrt(s(1-s))", lower_t, t)
            check("1/(2u) <= 1/(sqrt2 (s + sqrt(s(1-s))))", half_u,
                  1.0 / (SQRT2 * (s + lower_t)))
            check("s + sqrt(s(1-s)) > 1 + sqrt(delta)/2", 1 + math.sqrt(d) / 2, s + lower_t)
            end = 1.0 / (SQRT2 * (1 + math.sqrt(d) / 2))
            check("1/(sqrt2 (1 + sqrt(delta)/2)) <= 1/sqrt2 - sqrt(delta)/10", end, goal)
        check("p <= 1/sqrt2 - sqrt(delta)/10", p, goal)
    else:
        regime = "far"
        check("v < (1 - 1/4000)/sqrt2", v, FAR_CAP)
        check("a_j >= -(1 - 1/4000)/sqrt2 for all j", -float(c.min()), FAR_CAP)
        if u <= math.sqrt(0.5 + ETA):
            a2 = float(c[1])
            if a2 <= FAR_CAP:
                label = "far-1.1"
                check("m = max_{j>1}|a_j| <= (1 - 1/4000)/sqrt2", m, FAR_CAP)
                sq = c ** 2
                nz = sq[sq > 0]
                prod = float(np.exp(np.sum(nz * np.log(psi(nz)))))
                check("sqrt2 p <= prod psi(a_j^2)^{a_j^2}", SQRT2 * p, prod)
                u2 = u * u
                split = psi(u2) ** u2 * psi(m * m) ** (1 - u2)
                check("prod <= psi(u^2)^{u^2} psi(m^2)^{1-u^2}", prod, split)
                raised = psi(0.5 + ETA) ** u2 * psi(m * m) ** (1 - u2)
                check("psi(u^2)^{u^2} <= psi(1/2+eta)^{u^2}", split, raised)
                top = psi(0.5 + ETA) ** (0.5 + ETA) * psi(m * m) ** (0.5 - ETA)
                check("increasing in u^2: replace u^2 by 1/2+eta", raised, top)
                const = psi_product_constant(ETA)
                check("psi(m^2) <= psi(1/2 - 1/8000)", top, const)
                # no slack on the numerical constant itself
                checks.append(Check("psi(1/2+eta)^{1/2+eta} psi(1/2-1/8000)^{1/2-eta} < 1 - 5e-5",
                                    const, 1 - 5e-5, const < 1 - 5e-5))
                check("1 - 5e-5 <= 1 - 4e-5", 1 - 5e-5, 1 - 4e-5)
            else:
                label = "far-1.2"
                bound = minmax_density_bound(float(c[0]), a2)
                check("p <= 1/(e a_2)", p, bound)
                check("1/(e a_2) <= (1 - 4e-5)/sqrt2", bound, FAR_GOAL)
        else:
            label = "far-2"
            half_u = 1.0 / (2 * u)
            check("p <= 1/(2u)", p, half_u)
            check("1/(2u) < 1/sqrt(2 + 4 eta)", half_u, 1.0 / math.sqrt(2 + 4 * ETA))
            check("1/sqrt(2 + 4 eta) < (1 - 4e-5)/sqrt2", 1.0 / math.sqrt(2 + 4 * ETA), FAR_GOAL)
        check("p <= (1 - 4e-5)/sqrt2", p, FAR_GOAL)
        check("(1 - 4e-5)/sqrt2 = 1/sqrt2 - 2 sqrt2 1e-5", FAR_GOAL, INV_SQRT2 - FAR_DEFICIT)

    return CaseTrace(delta=d, u=u, v=v, sigma=sigma, s=s, t=t, m=m, eta=ETA,
                     regime=regime, case_label=label, p0=p, checks=checks)


def near_one_bound(a: Direction) -> float:
    """Right-hand side ``(1/sigma)(1 - exp(-sigma/(u+v)))`` of the capped-overlap step."""
    u, v = a.u, a.v
    sigma = math.sqrt(float(np.sum(a.coeffs[1:-1] ** 2)))
    if sigma == 0:
        return 1.0 / (u + v)
    return capped_overlap_bound(u, v, variance_linf_bound(sigma**2))


# --------------------------------------------------------------------------- #
# aggregated report
# --------------------------------------------------------------------------- #

def verify_direction(a: Direction, quad_tol: float = DEFAULT_QUAD_TOL,
                     montecarlo_samples: int = 10**5, seed: int = 0,
                     slack: float = CHECK_SLACK) -> BoundReport:
    """All evaluators and bounds for one direction, with dominance verdicts.

    ``montecarlo_samples=0`` skips the Monte Carlo evaluator and
    ``quad_tol=None`` the quadrature one (their fields are then NaN).
    """
    if a.v > a.u:
        a = a.flipped()
    p = density_at_zero(a, mode="auto")
    pq = density_at_zero_quadrature(a, quad_tol) if quad_tol else math.nan
    if montecarlo_samples:
        pm, pse = density_at_zero_montecarlo(a, montecarlo_samples, seed)
    else:
        pm, pse = math.nan, math.nan
    bounds = {
        "webb": webb_bound(a),
        "fourier": fourier_bound(a),
        "logconcavity": logconcavity_bound(a),
        "stability": INV_SQRT2 - stability_deficit_bound(a),
        "global_linear": global_linear_bound(a),
    }
    verdicts, violations = {}, {}
    for name, value in bounds.items():
        tol = 1e-10 if name in ("fourier", "logconcavity") else slack
        verdicts[name] = bool(p <= value + tol)
        if not verdicts[name]:
            violations[name] = p - value
    if quad_tol:
        verdicts["quadrature"] = bool(abs(p - pq) <= 2 * quad_tol)
        if not verdicts["quadrature"]:
            violations["quadrature"] = abs(p - pq)
    if montecarlo_samples:
        verdicts["montecarlo"] = bool(abs(p - pm) <= 4 * pse)
        if not verdicts["montecarlo"]:
            violations["montecarlo"] = abs(p - pm) / pse
    return BoundReport(direction=a, p0_exact=p, p0_quadrature=pq, p0_montecarlo=pm,
                       p0_montecarlo_stderr=pse, webb=bounds["webb"],
                       fourier=bounds["fourier"], logconcavity=bounds["logconcavity"],
                       stability_bound=stability_deficit_bound(a),
                       global_linear=bounds["global_linear"], deficit=INV_SQRT2 - p,
                       verdicts=verdicts, violations=violations)


def bound_table(A: np.ndarray) -> dict:
    """Vectorised exact ``p_a(0)`` and every bound for rows of sorted directions."""
    A = np.asarray(A, dtype=float)
    p = density_at_zero_batch(A)
    d = (A[:, 0] - INV_SQRT2) ** 2 + (A[:, -1] + INV_SQRT2) ** 2 + np.sum(A[:, 1:-1] ** 2, axis=1)
    stab = np.where(d <= NEAR_THRESHOLD, NEAR_SLOPE * np.sqrt(np.maximum(d, 0)), FAR_DEFICIT)
    return {
        "p0": p,
        "delta": d,
        "deficit": INV_SQRT2 - p,
        "webb": np.full(len(A), INV_SQRT2),
        "fourier": fourier_bound_batch(A),
        "logconcavity": 1.0 / (2 * np.maximum(A[:, 0], -A[:, -1])),
        "stability_bound": stab,
        "global_linear": INV_SQRT2 - GLOBAL_SLOPE * np.sqrt(np.maximum(d, 0)),
    }


# --------------------------------------------------------------------------- #
# extremiser search
# --------------------------------------------------------------------------- #

def _objective(z: np.ndarray, Q: np.ndarray) -> float:
    x = Q @ z
    x = x / np.linalg.norm(x)
    return density_at_zero(np.sort(x)[::-1], mode="auto")


def _ascent(z: np.ndarray, Q: np.ndarray, h: float, maxiter: int):
    z = z / np.linalg.norm(z)
    f = _objective(z, Q)
    step = 0.1
    k = z.size
    for _ in range(maxiter):
        grad = np.empty(k)
        for i in range(k):
            e = np.zeros(k)
            e[i] = h
            grad[i] = (_objective(z + e, Q) - _objective(z - e, Q)) / (2 * h)
        grad -= (grad @ z) * z
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-12:
            break
        direction = grad / gnorm
        step = min(4 * step, 0.5)
        while step > 1e-14:
            cand = z + step * direction
            cand /= np.linalg.norm(cand)
            fc = _objective(cand, Q)
            if fc > f:
                z, f = cand, fc
                break
            step /= 2
        else:
            break
    return z, f


def search_extremiser(n: int, restarts: int = 10, seed: int = 0,
                      maxiter: int = 500, h: float = 1e-6) -> Tuple[Direction, float]:
    """Maximise ``p_a(0)`` over unit sum-zero directions by projected ascent.

    Directions are parametrised as ``a = Q z`` with ``Q`` an orthonormal basis
    of the sum-zero hyperplane and ``z`` on the unit sphere; central-difference
    gradients are projected onto the tangent space and steps are halved until
    the objective improves. Restarts draw ``z`` from seeded Gaussians.
    """
    if n < 1 or restarts < 1:
        raise ValueError("need n >= 1 and restarts >= 1")
    if n == 1:
        a = extremiser(1)
        return a, density_at_zero(a)
    from .slicer import simplex_chart

    Q = simplex_chart(n)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        z, f = _ascent(rng.standard_normal(n), Q, h, maxiter)
        if best is None or f > best[1]:
            best = (z, f)
    a = normalize_direction(Q @ best[0])
    return a, density_at_zero(a, mode="auto")


def matches_extremiser_pattern(a: Direction, tol: float = 1e-3) -> bool:
    c = a.coeffs
    return bool(abs(c[0] - INV_SQRT2) <= tol and abs(c[-1] + INV_SQRT2) <= tol
                and np.all(np.abs(c[1:-1]) <= tol))


# --------------------------------------------------------------------------- #
# direction families
# --------------------------------------------------------------------------- #

def random_directions(count: int, n_max: int, rng: np.random.Generator,
                      n_min: int = 2) -> list:
    """Gaussian directions with ``n`` drawn uniformly from ``[n_min, n_max]``."""
    out = []
    for n in rng.integers(n_min, n_max + 1, size=count):
        out.append(normalize_direction(rng.standard_normal(n + 1)))
    return out


def near_direction(n: int, target_delta: float, rng: np.random.Generator,
                   spread: Optional[float] = None) -> Direction:
    """A direction at distance ``sqrt(target_delta)`` from ``(e_1 - e_{n+1})/sqrt2``.

    The perturbation mixes a vector that loads the two extreme coordinates
    with a random one; ``spread`` in [0, 1] sets the mix (random when None),
    so both near-regime branches get exercised.
    """
    if n < 2:
        raise ValueError("n >= 2 required")
    base = np.zeros(n + 1)
    base[0], base[-1] = INV_SQRT2, -INV_SQRT2
    ends = np.full(n + 1, -2.0 / (n - 1))
    ends[0] = ends[-1] = 1.0
    noise = rng.standard_normal(n + 1)
    mix = rng.uniform() if spread is None else spread
    w = mix * ends / np.linalg.norm(ends) + (1 - mix) * noise
    for v in (np.ones(n + 1), base):
        w -= (w @ v) / (v @ v) * v
    w /= np.linalg.norm(w)
    cos = 1.0 - target_delta / 2
    a = cos * base + math.sqrt(max(0.0, 1 - cos * cos)) * w
    d = normalize_direction(a)
    return d.flipped() if d.v > d.u else d


def near_family(deltas, n_values, rng: np.random.Generator, per_point: int = 1) -> list:
    return [near_direction(int(n), float(dl), rng)
            for dl in deltas for n in n_values for _ in range(per_point)]


def sharpness_direction(eps: float) -> Direction:
    """``sqrt(1-eps)(e_1-e_2)/sqrt2 + sqrt(eps)(e_1+e_2-2e_3)/sqrt6`` in R^3."""
    a = (math.sqrt(1 - eps) * np.array([1.0, -1.0, 0.0]) / SQRT2
         + math.sqrt(eps) * np.array([1.0, 1.0, -2.0]) / math.sqrt(6))
    return normalize_direction(a)


def sharpness_slope(eps_values) -> float:
    """Least-squares slope of log(deficit) against log(sqrt(delta)) along the ``a(eps)`` family."""
    xs, ys = [], []
    for eps in eps_values:
        a = sharpness_direction(float(eps))
        xs.append(0.5 * math.log(delta(a)))
        ys.append(math.log(INV_SQRT2 - density_at_zero(a, mode="mp")))
    return float(np.polyfit(xs, ys, 1)[0])


def two_peak_direction(count: int, alpha: Optional[float] = None) -> Direction:
    """``(alpha, alpha, -beta, ..., -beta)`` with ``count`` negative entries.

    For ``count`` above roughly 4080 and ``alpha`` just over the far-regime cap
    this is the only kind of direction that reaches the ``a_2``-large branch.
    """
    if alpha is None:
        # largest admissible alpha leaves room for count equal negative entries
        alpha = 1.0 / math.sqrt(2 + 4.0 / count)
    beta = 2 * alpha / count
    a = np.concatenate([[alpha, alpha], np.full(count, -beta)])
    return normalize_direction(a)
