"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line."""
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from simplex_slice.bounds import (PsiTable, bound_table, classify_case, matches_extremiser_pattern,
                                  near_family, psi, psi_product_constant, search_extremiser,
                                  sharpness_slope, two_peak_direction)
from simplex_slice.core import Direction, Polytope, random_subspace
from simplex_slice.expdensity import (capped_overlap_bound, capped_overlap_extremiser,
                                      density_at_zero, g_ab, minmax_density_bound,
                                      positive_pair_density)
from simplex_slice.isotropy import (busemann_N, grunbaum_ratio, hensley_interval,
                                    lipschitz_experiment, polytope_moments, to_isotropic)
from simplex_slice.slicer import (cross_polytope, cube, random_polytope, regular_simplex,
                                  simplex_section, standard_simplex, volume)

INV_SQRT2 = 1 / math.sqrt(2)
BATCH = 10**5
N_MAX = 20
SEED = 20240611


def _batch_rows(count, n_max, rng):
    """Sorted Gaussian directions with n uniform on [2, n_max], zero-padded to n_max + 1."""
    ns = rng.integers(2, n_max + 1, size=count)
    rows = np.zeros((count, n_max + 1))
    for n in np.unique(ns):
        idx = np.flatnonzero(ns == n)
        g = rng.standard_normal((idx.size, n + 1))
        g -= g.mean(axis=1, keepdims=True)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rows[idx, : n + 1] = g
    # zero entries change neither p_a(0) nor delta; re-sort after padding
    return -np.sort(-rows, axis=1), ns


@pytest.fixture(scope="module")
def batch():
    rows, ns = _batch_rows(BATCH, N_MAX, np.random.default_rng(SEED))
    table = bound_table(rows)
    return rows, ns, table


@pytest.fixture(scope="module")
def near_grid():
    deltas = [10.0**k for k in range(-8, -3)] + [1 / 2000]
    dirs = near_family(deltas, range(2, N_MAX + 1), np.random.default_rng(SEED + 1), per_point=5)
    p0 = np.array([density_at_zero(a, mode="auto") for a in dirs])
    return dirs, p0


def _direction(row, n):
    c = row[row != 0]
    assert c.size == n + 1
    return Direction(c)


# --------------------------------------------------------------------------- #

def test_criterion_1_volume_formula(acceptance_log):
    rng = np.random.default_rng(SEED + 2)
    start = time.perf_counter()
    worst = 0.0
    for n in range(2, 9):
        for _ in range(200):
            g = rng.standard_normal(n + 1)
            g -= g.mean()
            a = Direction(-np.sort(-g / np.linalg.norm(g)))
            geo = float(volume(simplex_section(a)))
            dens = math.sqrt(n + 1) / math.factorial(n - 1) * density_at_zero(a, mode="auto")
            worst = max(worst, abs(geo - dens) / dens)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed <= 120
    acceptance_log(1, ok, f"max relative error {worst:.2e} over 1400 directions, {elapsed:.1f}s")
    assert ok


def test_criterion_2_webb(batch, acceptance_log):
    rows, ns, table = batch
    pmax = float(table["p0"].max())
    gaps, patterns = [], []
    for n in range(1, 11):
        a, p = search_extremiser(n, restarts=10, seed=n)
        gaps.append(INV_SQRT2 - p)
        patterns.append(matches_extremiser_pattern(a, tol=1e-3))
    ok = pmax <= INV_SQRT2 + 1e-12 and max(gaps) <= 1e-6 and all(patterns)
    acceptance_log(2, ok, f"batch max p0 - 1/sqrt2 = {pmax - INV_SQRT2:.2e}; "
                          f"search worst gap {max(gaps):.2e}, patterns {sum(patterns)}/10")
    assert ok


def test_criterion_3_stability(batch, near_grid, acceptance_log):
    _, _, t = batch
    stab_viol = int(np.sum(t["deficit"] < t["stability_bound"] - 1e-12))
    glob_viol = int(np.sum(t["p0"] > t["global_linear"] + 1e-12))
    dirs, p0 = near_grid
    # zero padding needs a re-sort so the extreme entries stay first and last
    near = bound_table(-np.sort(-np.array([np.pad(a.coeffs, (0, N_MAX - a.n)) for a in dirs]), axis=1))
    assert np.allclose(near["p0"], p0, rtol=1e-12, atol=0)
    stab_viol += int(np.sum(near["deficit"] < near["stability_bound"] - 1e-12))
    glob_viol += int(np.sum(near["p0"] > near["global_linear"] + 1e-12))
    min_ratio = float(np.min(near["deficit"] / np.sqrt(near["delta"])))
    ok = stab_viol == 0 and glob_viol == 0
    acceptance_log(3, ok, f"{stab_viol} stability and {glob_viol} global violations on "
                          f"{BATCH} + {len(dirs)} directions; min near deficit/sqrt(delta) {min_ratio:.3f}")
    assert ok


def test_criterion_4_proof_replay(batch, near_grid, acceptance_log):
    rows, ns, table = batch
    bad, labels = 0, {}
    traces = []
    for row, n, p in zip(rows, ns, table["p0"]):
        traces.append(classify_case(_direction(row, n), p0=p))
    dirs, p0 = near_grid
    traces += [classify_case(a, p0=p) for a, p in zip(dirs, p0)]
    traces += [classify_case(two_peak_direction(m)) for m in (4100, 6000)]
    for tr in traces:
        labels[tr.case_label] = labels.get(tr.case_label, 0) + 1
        bad += not tr.all_true
    const = psi_product_constant(5e-5)
    ok = bad == 0 and const < 1 - 5e-5 - 1e-12
    acceptance_log(4, ok, f"{bad} failing traces of {len(traces)}; cases {dict(sorted(labels.items()))}; "
                          f"psi product {const:.13f}")
    assert ok


def test_criterion_5_sharpness(acceptance_log):
    slope = sharpness_slope(np.logspace(-6, -3, 20))
    ok = 0.9 <= slope <= 1.1
    acceptance_log(5, ok, f"slope {slope:.4f}")
    assert ok


def test_criterion_6_fourier_logconcavity(batch, acceptance_log):
    _, _, t = batch
    fs = float(np.min(t["fourier"] - t["p0"]))
    ls = float(np.min(t["logconcavity"] - t["p0"]))
    half = psi(0.5)
    table = PsiTable.build(np.linspace(1e-3, 1 - 1e-3, 1000))
    ok = fs >= -1e-10 and ls >= -1e-10 and abs(half - 1) <= 1e-12 and table.strictly_increasing()
    acceptance_log(6, ok, f"min Fourier slack {fs:.2e}, min log-concavity slack {ls:.2e}, "
                          f"|psi(1/2) - 1| = {abs(half - 1):.1e}, increasing {table.strictly_increasing()}")
    assert ok


def _g_cdf(x, a, b):
    """Closed-form distribution function of aX - bY."""
    if x < 0:
        return b / (a + b) * math.exp(x / b)
    return 1 - a / (a + b) * math.exp(-x / a)


def test_criterion_7_lemmas(acceptance_log):
    rng = np.random.default_rng(SEED + 3)
    norm_err = 0.0
    for a, b in rng.uniform(0.05, 3, size=(20, 2)):
        left, _ = integrate.quad(g_ab, -np.inf, 0, args=(a, b), epsabs=1e-13)
        right, _ = integrate.quad(g_ab, 0, np.inf, args=(a, b), epsabs=1e-13)
        norm_err = max(norm_err, abs(left + right - 1))
    minmax_slack = np.inf
    for a, b in rng.uniform(0.05, 3, size=(100, 2)):
        x = np.linspace(0, 40 * max(a, b), 200_001)
        minmax_slack = min(minmax_slack, minmax_density_bound(a, b) - positive_pair_density(x, a, b).max())
    attain_err, dom_slack = 0.0, np.inf
    for _ in range(100):
        a, b = rng.uniform(0.05, 3, size=2)
        C = rng.uniform(0.05, 5)
        alpha, beta = capped_overlap_extremiser(a, b, C)
        bound = capped_overlap_bound(a, b, C)
        attain_err = max(attain_err, abs(C * (_g_cdf(alpha, a, b) - _g_cdf(-beta, a, b)) - bound))
        # random step density with sup <= C: bins of width w, heights h / (w sum h)
        k = rng.integers(1, 12)
        h = rng.uniform(0, 1, k)
        h[rng.integers(k)] = 1.0
        w = h.max() / (C * h.sum()) * (1 + rng.exponential(1.0))
        left = rng.uniform(-3, 3) - k * w / 2
        edges = left + w * np.arange(k + 1)
        f = h / (w * h.sum())
        assert f.max() <= C * (1 + 1e-12)
        overlap = sum(fi * (_g_cdf(hi, a, b) - _g_cdf(lo, a, b))
                      for fi, lo, hi in zip(f, edges[:-1], edges[1:]))
        dom_slack = min(dom_slack, bound - overlap)
    ok = norm_err <= 1e-8 and minmax_slack >= 0 and attain_err <= 1e-9 and dom_slack >= -1e-12
    acceptance_log(7, ok, f"normalisation error {norm_err:.1e}; min minmax slack {minmax_slack:.2e}; "
                          f"capped attainment error {attain_err:.1e}, min dominance slack {dom_slack:.2e}")
    assert ok


def test_criterion_8_lipschitz(acceptance_log):
    start = time.perf_counter()
    parts, ok = [], True
    for name, make in (("cube", cube), ("simplex", regular_simplex)):
        for n in (3, 4, 5):
            rep = lipschitz_experiment(make(n), 1, 1000, seed=n)
            lo, hi = hensley_interval(1, rep["L_K"], 1.0)
            inside = lo <= rep["min_volume"] and rep["max_volume"] <= hi
            good = not rep["violations"] and rep["max_ratio"] <= rep["rhs_constant"] and inside
            ok &= good
            parts.append(f"{name}{n} {rep['max_ratio']:.3g}/{rep['rhs_constant']:.3g}")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 300
    acceptance_log(8, ok, f"max ratio / bound: {', '.join(parts)}; Hensley ok; {elapsed:.1f}s")
    assert ok


def _centred(P):
    _, bar, _ = polytope_moments(P)
    return Polytope(P.dim, P.vertices - np.asarray(bar, float))


def test_criterion_9_grunbaum(acceptance_log):
    rng = np.random.default_rng(SEED + 4)
    worst = {1: np.inf, 2: np.inf}
    for i in range(500):
        n = int(rng.integers(2, 6))
        if i % 2:
            body = _centred(regular_simplex(n))
        else:
            body = _centred(random_polytope(n, n + 1 + int(rng.integers(1, 10)), seed=i))
        ell = 1 if n == 2 else int(rng.integers(1, 3))
        E = random_subspace(n, ell, rng)
        theta = E.basis @ rng.standard_normal(ell)
        r = grunbaum_ratio(body, E, theta)
        worst[ell] = min(worst[ell], r * math.exp(ell))
    sym_err = 0.0
    for body in (cube(3), cube(5), cross_polytope(4), random_polytope(4, 9, seed=3, symmetric=True)):
        for ell in (1, 2):
            for _ in range(10):
                E = random_subspace(body.dim, ell, rng)
                sym_err = max(sym_err, abs(grunbaum_ratio(body, E, E.basis @ rng.standard_normal(ell)) - 0.5))
    ok = all(w * math.exp(-ell) >= math.exp(-ell) - 1e-9 for ell, w in worst.items()) and sym_err <= 1e-10
    acceptance_log(9, ok, f"min ratio * e^ell: ell=1 {worst[1]:.4f}, ell=2 {worst[2]:.4f}; "
                          f"symmetric error {sym_err:.1e}")
    assert ok


def test_criterion_10_busemann(acceptance_log):
    rng = np.random.default_rng(SEED + 5)
    bodies = {"simplex": _centred(regular_simplex(3)), "cube": cube(3),
              "random": _centred(random_polytope(3, 12, seed=5))}
    sub_worst, hom_worst = -np.inf, 0.0
    for body in bodies.values():
        for _ in range(1000):
            E = random_subspace(3, 2, rng)
            x, y = (E.basis @ rng.standard_normal((2, 2))).T
            lam = float(rng.uniform(0.1, 10))
            nx, ny = busemann_N(body, E, x), busemann_N(body, E, y)
            sub_worst = max(sub_worst, busemann_N(body, E, x + y) - nx - ny)
            hom_worst = max(hom_worst, abs(busemann_N(body, E, lam * x) - lam * nx) / max(1.0, lam * nx))
    ok = sub_worst <= 1e-9 and hom_worst <= 1e-9
    acceptance_log(10, ok, f"max N(x+y) - N(x) - N(y) = {sub_worst:.3e}; "
                           f"max homogeneity error {hom_worst:.1e} (3000 triples)")
    assert ok


def test_criterion_11_moments(acceptance_log):
    _, _, cov = polytope_moments(cube(4, "rational"))
    cube_ok = all(cov[i, j] == (Fraction(1, 12) if i == j else 0) for i in range(4) for j in range(4))
    bar_ok = all(all(x == Fraction(1, n + 1) for x in polytope_moments(standard_simplex(n, "rational"))[1])
                 for n in range(1, 7))
    drift = 0.0
    for P in (cube(3), regular_simplex(4), random_polytope(3, 11, seed=8), random_polytope(5, 16, seed=9)):
        once = to_isotropic(P).body
        twice = to_isotropic(once).body
        drift = max(drift, float(np.abs(once.vertices - twice.vertices).max()))
    ok = cube_ok and bar_ok and drift <= 1e-8
    acceptance_log(11, ok, f"cube covariance exact {cube_ok}; simplex barycentre exact {bar_ok}; "
                           f"idempotence drift {drift:.1e}")
    assert ok
