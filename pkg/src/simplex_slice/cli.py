"""``simplex-slice`` command line.

Exit codes: 0 when every checked property holds, 2 for bad input, 3 when a
verified property fails. Options can also come from ``--config file.json``
(keys are the long option names with dashes replaced by underscores);
explicit flags win over the file, the file wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (INV_SQRT2, NEAR_SLOPE, NEAR_THRESHOLD, GLOBAL_SLOPE,
                     PsiTable, classify_case, matches_extremiser_pattern,
                     near_direction, psi, random_directions, search_extremiser,
                     two_peak_direction, verify_direction)
from .core import delta, normalize_direction, random_subspace
from .errors import SimplexSliceError
from .expdensity import DEFAULT_QUAD_TOL
from .isotropy import busemann_N, grunbaum_ratio, lipschitz_experiment, to_isotropic
from .slicer import (MAX_GEOMETRIC_DIM, cube, random_polytope, regular_simplex,
                     section_volume_via_density, simplex_section, volume)

SCHEMA = 1
HEADER = f"# simplex-slice v{__version__} schema={SCHEMA}"
EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 2, 3

DEFAULTS = {
    "slice": {"n": None, "a": None, "a_file": None, "tol": 1e-8, "out": None},
    "verify": {"n_min": 2, "n_max": 10, "samples": 10_000, "seed": 0, "family": "random",
               "delta_grid": "1e-8:5e-4", "per_delta": 20, "two_peak": "4100,5000,8000",
               "quad_tol": DEFAULT_QUAD_TOL, "montecarlo_samples": 0, "out": None},
    "search": {"n": 3, "restarts": 10, "seed": 0, "out": None},
    "lipschitz": {"body": "simplex", "n": 3, "ell": 1, "trials": 1000, "seed": 0,
                  "vertices": 12, "c_ell": None, "suite_trials": 100, "out": None},
    "psi": {"grid": "0.001:0.999:999", "points": None, "out": None},
}


class InputError(Exception):
    pass


# --------------------------------------------------------------------------- #
# helpers
# --------------------------------------------------------------------------- #

def _workers() -> int:
    cap = os.environ.get("SIMPLEX_SLICE_THREADS")
    count = os.cpu_count() or 1
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError as exc:
            raise InputError("SIMPLEX_SLICE_THREADS must be an integer") from exc
    return count


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _parse_floats(text: str):
    try:
        return [float(t) for t in str(text).replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise InputError(f"cannot parse numbers from {text!r}") from exc


def _emit(payload: dict, out, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    print(text)
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _coeff_hash(c: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(c, dtype="<f8").tobytes()).hexdigest()[:16]


def _positive(cfg: dict, *keys) -> None:
    for k in keys:
        if cfg[k] is not None and not cfg[k] > 0:
            raise InputError(f"{k} must be positive")


# --------------------------------------------------------------------------- #
# slice
# --------------------------------------------------------------------------- #

def cmd_slice(cfg: dict) -> int:
    raw = cfg["a"]
    if raw is None and cfg["a_file"]:
        raw = Path(cfg["a_file"]).read_text()
    if raw is None:
        raise InputError("give a direction with --a or --a-file")
    _positive(cfg, "tol")
    coeffs = raw if isinstance(raw, list) else _parse_floats(raw)
    if cfg["n"] is not None and len(coeffs) != cfg["n"] + 1:
        raise InputError(f"--n {cfg['n']} needs {cfg['n'] + 1} coefficients")
    a = normalize_direction(coeffs)
    report = verify_direction(a, montecarlo_samples=0)
    density_vol = section_volume_via_density(a)
    geometric = None
    if a.n <= MAX_GEOMETRIC_DIM:
        geometric = float(volume(simplex_section(a)))
    rel = None if geometric is None else abs(geometric - density_vol) / density_vol
    agree = rel is None or rel <= cfg["tol"]
    agree = agree and report.verdicts.get("quadrature", True)
    payload = {
        "direction": a.coeffs.tolist(),
        "n": a.n,
        "p0": report.p0_exact,
        "p0_quadrature": report.p0_quadrature,
        "delta": delta(a),
        "volume_geometric": geometric,
        "volume_density": density_vol,
        "relative_difference": rel,
        "bounds": {"webb": report.webb, "fourier": report.fourier,
                   "logconcavity": report.logconcavity,
                   "stability_deficit": report.stability_bound,
                   "global_linear": report.global_linear},
        "deficit": report.deficit,
        "verdicts": report.verdicts,
        "agree": agree,
    }
    _emit(payload, cfg["out"], "slice.json")
    return EXIT_OK if agree and report.ok else EXIT_VIOLATION


# --------------------------------------------------------------------------- #
# verify
# --------------------------------------------------------------------------- #

_CSV_COLUMNS = ["hash", "family", "n", "delta", "p0", "p0_quadrature", "webb", "fourier",
                "logconcavity", "stability_bound", "global_linear", "deficit", "case",
                "bounds_ok", "proof_ok", "failed"]


def _verify_row(job):
    family, coeffs, quad_tol, mc, seed = job
    a = normalize_direction(coeffs)
    rep = verify_direction(a, quad_tol=quad_tol, montecarlo_samples=mc, seed=seed)
    trace = classify_case(a, p0=rep.p0_exact)
    failed = sorted(rep.violations) + [c.name for c in trace.failed()]
    return {
        "hash": _coeff_hash(a.coeffs), "family": family, "n": a.n, "delta": trace.delta,
        "p0": rep.p0_exact, "p0_quadrature": rep.p0_quadrature, "webb": rep.webb,
        "fourier": rep.fourier, "logconcavity": rep.logconcavity,
        "stability_bound": rep.stability_bound, "global_linear": rep.global_linear,
        "deficit": rep.deficit, "case": trace.case_label, "bounds_ok": rep.ok,
        "proof_ok": trace.all_true, "failed": ";".join(failed),
    }


def _delta_grid(text: str):
    parts = str(text).split(":")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[2]) if len(parts) > 2 else None
    except (ValueError, IndexError) as exc:
        raise InputError(f"delta grid {text!r} is not lo:hi[:count]") from exc
    if not 0 < lo <= hi:
        raise InputError("delta grid needs 0 < lo <= hi")
    # keep the family inside the near regime
    hi = min(hi, NEAR_THRESHOLD)
    lo = min(lo, hi)
    if count is None:
        count = max(2, int(round(math.log10(hi / lo))) + 1)
    grid = np.logspace(math.log10(lo), math.log10(hi), count)
    grid[0], grid[-1] = lo, hi
    return sorted(set(grid.tolist()))


def _build_family(cfg: dict, rng: np.random.Generator):
    fam = cfg["family"]
    jobs = []
    if fam in ("random", "all"):
        for a in random_directions(cfg["samples"], cfg["n_max"], rng, n_min=cfg["n_min"]):
            jobs.append(("random", a.coeffs))
    if fam in ("near", "all"):
        n_values = range(max(2, cfg["n_min"]), cfg["n_max"] + 1)
        for dl in _delta_grid(cfg["delta_grid"]):
            for i in range(cfg["per_delta"]):
                n = n_values[i % len(n_values)]
                jobs.append(("near", near_direction(n, dl, rng).coeffs))
    if fam in ("two-peak", "all"):
        for count in _parse_floats(cfg["two_peak"]):
            jobs.append(("two-peak", two_peak_direction(int(count)).coeffs))
    if fam not in ("random", "near", "two-peak", "all"):
        raise InputError(f"unknown family {fam!r}")
    return jobs


def _svg_scatter(rows, width=640, height=480) -> str:
    pts = [(math.sqrt(r["delta"]), r["deficit"]) for r in rows
           if r["delta"] > 0 and r["deficit"] > 0]
    pad = 50
    if pts:
        xs = [math.log10(x) for x, _ in pts]
        ys = [math.log10(y) for _, y in pts]
        x0, x1 = math.floor(min(xs)), math.ceil(max(xs))
        y0 = math.floor(min(min(ys), x0 + math.log10(GLOBAL_SLOPE)))
        y1 = math.ceil(max(max(ys), x1 + math.log10(NEAR_SLOPE)))
    else:
        x0, x1, y0, y1 = -4, 0, -6, 0
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)

    def px(lx):
        return pad + (lx - x0) / (x1 - x0) * (width - 2 * pad)

    def py(ly):
        return height - pad - (ly - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<path d="M{pad} {height - pad}H{width - pad}M{pad} {height - pad}V{pad}" '
           'stroke="black" fill="none"/>']
    for k in range(x0, x1 + 1):
        out.append(f'<text x="{px(k):.2f}" y="{height - pad + 18}" font-size="11" '
                   f'text-anchor="middle">1e{k}</text>')
    for k in range(y0, y1 + 1):
        out.append(f'<text x="{pad - 6}" y="{py(k) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">1e{k}</text>')
    for slope, colour in ((NEAR_SLOPE, "#c0392b"), (GLOBAL_SLOPE, "#2471a3")):
        c = math.log10(slope)
        out.append(f'<path d="M{px(x0):.2f} {py(x0 + c):.2f}L{px(x1):.2f} {py(x1 + c):.2f}" '
                   f'stroke="{colour}" stroke-dasharray="4 3" fill="none"/>')
    for x, y in pts:
        out.append(f'<circle cx="{px(math.log10(x)):.2f}" cy="{py(math.log10(y)):.2f}" '
                   'r="1.5" fill="#333" fill-opacity="0.5"/>')
    out.append(f'<text x="{width / 2}" y="{height - 12}" font-size="12" '
               'text-anchor="middle">sqrt(delta)</text>')
    out.append(f'<text x="14" y="{height / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {height / 2})">1/sqrt(2) - p_a(0)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_verify(cfg: dict) -> int:
    for k in ("samples", "per_delta", "n_min", "n_max"):
        if int(cfg[k]) < 1:
            raise InputError(f"{k} must be >= 1")
    if cfg["n_min"] < 2 or cfg["n_max"] < cfg["n_min"]:
        raise InputError("need 2 <= n_min <= n_max")
    _positive(cfg, "quad_tol")
    rng = np.random.default_rng(cfg["seed"])
    fam_jobs = _build_family(cfg, rng)
    jobs = [(fam, c, cfg["quad_tol"], cfg["montecarlo_samples"], cfg["seed"] + i)
            for i, (fam, c) in enumerate(fam_jobs)]
    workers = _workers()
    if workers > 1 and len(jobs) >= 2000:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_verify_row, jobs, chunksize=256))
    else:
        rows = [_verify_row(j) for j in jobs]
    violations = [{"hash": r["hash"], "family": r["family"], "failed": r["failed"]}
                  for r in rows if r["failed"]]
    cases = {}
    for r in rows:
        cases[r["case"]] = cases.get(r["case"], 0) + 1
    summary = {
        "version": __version__,
        "schema": SCHEMA,
        "seed": cfg["seed"],
        "family": cfg["family"],
        "directions": len(rows),
        "case_counts": dict(sorted(cases.items())),
        "max_p0": max(r["p0"] for r in rows),
        "webb_gap": INV_SQRT2 - max(r["p0"] for r in rows),
        "min_stability_slack": min(r["deficit"] - r["stability_bound"] for r in rows),
        "violations": violations,
    }
    if cfg["out"]:
        path = Path(cfg["out"])
        path.mkdir(parents=True, exist_ok=True)
        lines = [HEADER, ",".join(_CSV_COLUMNS)]
        lines += [",".join(_fmt(r[c]) for c in _CSV_COLUMNS) for r in rows]
        (path / "verify.csv").write_text("\n".join(lines) + "\n")
        (path / "deficit.svg").write_text(_svg_scatter(rows))
    _emit(summary, cfg["out"], "verify_summary.json")
    return EXIT_VIOLATION if violations else EXIT_OK


# --------------------------------------------------------------------------- #
# search
# --------------------------------------------------------------------------- #

def cmd_search(cfg: dict) -> int:
    if cfg["n"] < 1 or cfg["restarts"] < 1:
        raise InputError("need n >= 1 and restarts >= 1")
    a, p = search_extremiser(cfg["n"], cfg["restarts"], cfg["seed"])
    ok = p >= INV_SQRT2 - 1e-6
    payload = {"n": cfg["n"], "restarts": cfg["restarts"], "seed": cfg["seed"],
               "direction": a.coeffs.tolist(), "p_star": p, "gap": INV_SQRT2 - p,
               "extremiser_pattern": matches_extremiser_pattern(a), "ok": ok}
    _emit(payload, cfg["out"], "search.json")
    return EXIT_OK if ok else EXIT_VIOLATION


# --------------------------------------------------------------------------- #
# lipschitz
# --------------------------------------------------------------------------- #

def _body(cfg: dict):
    n = cfg["n"]
    if cfg["body"] == "cube":
        return cube(n)
    if cfg["body"] == "simplex":
        return regular_simplex(n)
    if cfg["body"] == "random":
        return random_polytope(n, cfg["vertices"], seed=cfg["seed"])
    raise InputError(f"unknown body {cfg['body']!r}")


def _property_suites(K, ell: int, trials: int, seed: int) -> dict:
    """Grünbaum ratios and Busemann triangle/homogeneity on the isotropic body."""
    rng = np.random.default_rng(seed)
    n = K.dim
    bar_dim = min(max(ell, 2), n - 1)
    min_ratio, worst_triangle, worst_homog = math.inf, -math.inf, 0.0
    failures = []
    for t in range(trials):
        Eb = random_subspace(n, ell, rng)
        theta = Eb.basis @ rng.standard_normal(ell)
        theta /= np.linalg.norm(theta)
        r = grunbaum_ratio(K, Eb, theta)
        min_ratio = min(min_ratio, r)
        if r < math.exp(-ell) - 1e-9:
            failures.append({"trial": t, "kind": "grunbaum", "value": r})
        Eb2 = random_subspace(n, bar_dim, rng)
        x = Eb2.basis @ rng.standard_normal(bar_dim)
        y = Eb2.basis @ rng.standard_normal(bar_dim)
        lam = float(rng.uniform(0.1, 10))
        for side in ("plus", "minus"):
            nx, ny = busemann_N(K, Eb2, x, side), busemann_N(K, Eb2, y, side)
            excess = busemann_N(K, Eb2, x + y, side) - nx - ny
            worst_triangle = max(worst_triangle, excess)
            homog = abs(busemann_N(K, Eb2, lam * x, side) - lam * nx)
            worst_homog = max(worst_homog, homog)
            if excess > 1e-9 or homog > 1e-9 * max(1.0, lam * nx):
                failures.append({"trial": t, "kind": "busemann", "side": side,
                                 "excess": excess, "homogeneity": homog})
    return {"grunbaum_min_ratio": min_ratio, "grunbaum_bound": math.exp(-ell),
            "busemann_dim": bar_dim, "busemann_max_excess": worst_triangle,
            "busemann_max_homogeneity_error": worst_homog, "failures": failures}


def cmd_lipschitz(cfg: dict) -> int:
    if cfg["trials"] < 1 or cfg["suite_trials"] < 0:
        raise InputError("trials must be >= 1")
    P = _body(cfg)
    report = lipschitz_experiment(P, cfg["ell"], cfg["trials"], cfg["seed"],
                                  C_ell=cfg["c_ell"])
    report["body"] = cfg["body"]
    K = to_isotropic(P).body
    report["suites"] = _property_suites(K, cfg["ell"], cfg["suite_trials"], cfg["seed"])
    failed = [v for v in report["violations"] if v["asserted"]] + report["suites"]["failures"]
    report["ok"] = not failed
    _emit(report, cfg["out"], "lipschitz.json")
    return EXIT_OK if not failed else EXIT_VIOLATION


# --------------------------------------------------------------------------- #
# psi
# --------------------------------------------------------------------------- #

def cmd_psi(cfg: dict) -> int:
    if cfg["points"]:
        xs = _parse_floats(cfg["points"])
    else:
        parts = str(cfg["grid"]).split(":")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError) as exc:
            raise InputError("grid is lo:hi:count") from exc
        if count < 2:
            raise InputError("grid needs at least two points")
        # rounding snaps grid points such as 1/2 onto their exact values
        xs = np.round(np.linspace(lo, hi, count), 12).tolist()
    if any(not 0 < x < 1 for x in xs):
        raise InputError("psi grid points must lie in (0, 1)")
    table = PsiTable.build(xs)
    half = psi(0.5)
    checks = {"strictly_increasing": table.strictly_increasing(),
              "psi_half": abs(half - 1.0) <= 1e-12}
    lines = [HEADER, "x,psi"] + [f"{x!r},{v!r}" for x, v in table.grid]
    csv = "\n".join(lines) + "\n"
    if cfg["out"]:
        path = Path(cfg["out"])
        path.mkdir(parents=True, exist_ok=True)
        (path / "psi.csv").write_text(csv)
    else:
        sys.stdout.write(csv)
    summary = {"points": len(table.grid), "psi_half": half, "checks": checks}
    if cfg["out"]:
        _emit(summary, cfg["out"], "psi_summary.json")
    else:
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK if all(checks.values()) else EXIT_VIOLATION


# --------------------------------------------------------------------------- #
# entry point
# --------------------------------------------------------------------------- #

COMMANDS = {"slice": cmd_slice, "verify": cmd_verify, "search": cmd_search,
            "lipschitz": cmd_lipschitz, "psi": cmd_psi}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simplex-slice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=S)
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--out", help="directory for output files")
        return p

    p = add("slice", "section volume, p_a(0) and every bound for one direction")
    p.add_argument("--n", type=int)
    p.add_argument("--a", help="comma-separated coefficients (use --a=-1,... for a leading minus)")
    p.add_argument("--a-file")
    p.add_argument("--tol", type=float)

    p = add("verify", "batch check of all bounds and of the proof case analysis")
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--family", choices=["random", "near", "two-peak", "all"])
    p.add_argument("--delta-grid", help="lo:hi[:count], log-spaced, capped at 1/2000")
    p.add_argument("--per-delta", type=int)
    p.add_argument("--two-peak", help="comma-separated sizes of the negative block")
    p.add_argument("--quad-tol", type=float)
    p.add_argument("--montecarlo-samples", type=int)

    p = add("search", "numerical maximisation of p_a(0)")
    p.add_argument("--n", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)

    p = add("lipschitz", "section-volume Lipschitz experiment on an isotropic body")
    p.add_argument("--body", choices=["cube", "simplex", "random"])
    p.add_argument("--n", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--vertices", type=int)
    p.add_argument("--c-ell", type=float)
    p.add_argument("--suite-trials", type=int)

    p = add("psi", "tabulate the Fourier factor psi")
    p.add_argument("--grid", help="lo:hi:count")
    p.add_argument("--points", help="comma-separated x values")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    given = vars(args)
    if "config" in given:
        try:
            data = json.loads(Path(given["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - set(cfg)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    cfg.update({k: v for k, v in given.items() if k in cfg})
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except (InputError, SimplexSliceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
