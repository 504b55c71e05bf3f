"""Command-line interface: JSON on stdout, human-readable notes on stderr."""

from __future__ import annotations

import json
import math
import random
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import norms, oracle
from .cell import ParameterSpace
from .geometry import CurveError, PolygonalCurve, load_curve
from .norms import ApproxConfig, NormHandle
from .propagate import NumericGuardError, border_checks, cdtw_approx

EXIT_PARSE = 1
EXIT_NUMERIC = 2
EXIT_VIOLATION = 3

PHI = (1 + math.sqrt(5)) / 2


def _emit(obj) -> None:
    click.echo(json.dumps(obj))


def _fail(msg: str, code: int):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(path: str) -> PolygonalCurve:
    try:
        return load_curve(path)
    except (OSError, CurveError) as exc:
        _fail(f"{path}: {exc}", EXIT_PARSE)


def _norm_arg(spec: str) -> NormHandle:
    try:
        p = Path(spec)
        if not spec.strip().startswith("{") and p.suffix == ".json" and p.exists():
            spec = p.read_text()
        return norms.parse_norm(spec)
    except (ValueError, KeyError, norms.GaugeError) as exc:
        _fail(f"bad norm spec {spec!r}: {exc}", EXIT_PARSE)


def resolve_norm(norm: NormHandle, epsilon: float | None) -> tuple[NormHandle, float]:
    """A polygonal norm to run on and the resulting approximation factor bound."""
    if norm.is_polygonal:
        if norm.label and norm.label.startswith("approx"):
            eps = float(norm.label.split(",")[1].rstrip(")"))
            return norm, 5.0 * (1.0 + eps) ** 2
        return norm, 5.0
    eps = 0.01 if epsilon is None else epsilon
    # (1 + eps0)^2 <= 1 + eps/5 keeps the overall factor at 5 + eps
    eps0 = min(eps / 15.0, 1.0)
    K = norms.approximate_norm(norm, ApproxConfig(eps0))
    return NormHandle.gauge(K, label=f"approx({norm.kind},{eps0:g})"), 5.0 + eps


@click.group()
def main():
    """Approximate continuous dynamic time warping of planar polygonal curves."""


@main.command()
@click.option("--p", "p_path", required=True, help="Curve P (CSV or JSON).")
@click.option("--q", "q_path", required=True, help="Curve Q (CSV or JSON).")
@click.option("--norm", "norm_spec", default="l1", show_default=True, help="l1, l2, linf or JSON spec.")
@click.option("--epsilon", type=float, default=None, help="Accuracy for non-polygonal norms.")
@click.option("--diagnostics", is_flag=True, help="Include the per-border report.")
def compute(p_path, q_path, norm_spec, epsilon, diagnostics):
    """Compute the factor-5 (or 5+eps) approximation."""
    P, Q = _load(p_path), _load(q_path)
    if epsilon is not None and not epsilon > 0:
        _fail("--epsilon must be positive", EXIT_PARSE)
    norm, bound = resolve_norm(_norm_arg(norm_spec), epsilon)
    try:
        value, run = cdtw_approx(P, Q, norm)
        report = run.report()
    except NumericGuardError as exc:
        _fail(str(exc), EXIT_NUMERIC)
    diag = {"total_pieces": report["total_pieces"], "max_rank": report["max_rank"]}
    if diagnostics:
        diag = report
    _emit({"value": value, "factor_bound": bound, "norm": norm.to_json(), "diagnostics": diag})


@main.command("oracle")
@click.option("--p", "p_path", required=True)
@click.option("--q", "q_path", required=True)
@click.option("--norm", "norm_spec", default="l1", show_default=True)
@click.option("--grid", "g", type=int, default=64, show_default=True, help="Subdivisions per cell side.")
def oracle_cmd(p_path, q_path, norm_spec, g):
    """Grid dynamic program next to the approximation."""
    P, Q = _load(p_path), _load(q_path)
    norm = _norm_arg(norm_spec)
    try:
        lower, value = oracle.grid_cdtw(P, Q, norm, oracle.GridConfig(g))
    except oracle.OracleMemoryError as exc:
        _fail(str(exc), EXIT_NUMERIC)
    out = {"grid": g, "lower_hint": float(lower), "value": float(value)}
    if norm.is_polygonal:
        out["approx"] = cdtw_approx(P, Q, norm)[0]
    _emit(out)


def random_curve(rng: random.Random, n: int, box: float = 10.0) -> PolygonalCurve:
    pts = [(rng.uniform(0, box), rng.uniform(0, box))]
    while len(pts) < n + 1:
        p = (rng.uniform(0, box), rng.uniform(0, box))
        if abs(p[0] - pts[-1][0]) + abs(p[1] - pts[-1][1]) > 1e-3 * box:
            pts.append(p)
    return PolygonalCurve(pts)


def bend_ratio_sweep(trials: int, seed: int, norm_list: list[NormHandle], integ=None) -> dict:
    """Random single cells and point pairs; returns the ratio range and the worst case."""
    rng = random.Random(seed)
    integ = integ or oracle.NumericIntegrator(256)
    lo, hi, worst = math.inf, -math.inf, None
    for k in range(trials):
        norm = norm_list[k % len(norm_list)]
        P, Q = random_curve(rng, 1), random_curve(rng, 1)
        lp, lq = norms.norm_eval(norm, np.subtract(*P.vertices[::-1])), norms.norm_eval(norm, np.subtract(*Q.vertices[::-1]))
        x = (rng.uniform(0, lp), rng.uniform(0, lq))
        y = (rng.uniform(x[0], lp), rng.uniform(x[1], lq))
        try:
            r = oracle.lemma1_ratio(P, Q, (1, 1), x, y, integ, norm=norm)
        except oracle.UndefinedRatioError:
            continue
        if r < lo:
            lo = r
        if r > hi:
            hi = r
        if worst is None or max(r, 1 / r) > worst[0]:
            worst = (max(r, 1 / r), {"P": P.vertices, "Q": Q.vertices, "x": x, "y": y, "norm": norm.to_json(), "ratio": r})
    return {"min_ratio": lo, "max_ratio": hi, "worst": worst[1] if worst else None}


def golden_ratio_fixture() -> tuple[PolygonalCurve, PolygonalCurve, tuple, tuple]:
    """1D golden-ratio configuration, ordered so that the x-then-y bend is the cheap one."""
    P = PolygonalCurve([(PHI, 0.0), (2 * PHI + 1, 0.0)])
    Q = PolygonalCurve([(0.0, 0.0), (PHI + 1, 0.0)])
    return P, Q, (0.0, 0.0), (PHI + 1, PHI + 1)


def sandwich_trial(P, Q, norm, g: int, rng: random.Random) -> dict:
    """Every per-run property in one record; `ok` is the conjunction."""
    value, run = cdtw_approx(P, Q, norm)
    back, run2 = cdtw_approx(Q, P, norm)
    lower, grid = oracle.grid_cdtw(P, Q, norm, oracle.GridConfig(g))
    path = run.witness()
    wcost = oracle.path_cost_numeric(P, Q, path, norm, oracle.NumericIntegrator(4096))
    checks = border_checks(run, 100, rng)
    checks2 = border_checks(run2, 100, rng)
    rec = {
        "value": value,
        "swapped_value": back,
        "grid_value": float(grid),
        "lower_hint": float(lower),
        "witness_cost": wcost,
        "max_jump": max(checks["max_jump"], checks2["max_jump"]),
        "max_travel_violation": max(checks["max_travel_violation"], checks2["max_travel_violation"]),
        "max_rank": max(run.max_rank, run2.max_rank),
        "rank_bound": max(P.n, Q.n),
    }
    scale = max(abs(value), 1e-12)
    rec["sandwich_ok"] = lower - 1e-3 <= value <= 5 * (grid + 1e-3)
    rec["symmetry_ok"] = abs(value - back) <= 1e-7 * scale
    rec["witness_ok"] = abs(wcost - value) <= 1e-5 * scale or abs(wcost - value) <= 1e-9
    rec["continuity_ok"] = rec["max_jump"] < 1e-7
    rec["travel_ok"] = rec["max_travel_violation"] <= 1e-6 * max(1.0, scale)
    rec["rank_ok"] = rec["max_rank"] <= rec["rank_bound"]
    rec["ok"] = all(rec[k] for k in ("sandwich_ok", "symmetry_ok", "witness_ok", "continuity_ok", "travel_ok", "rank_ok"))
    return rec


@main.command()
@click.option("--trials", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lemma1", is_flag=True, help="Run the bend-ratio sweep instead of curve pairs.")
@click.option("--n", type=int, default=None, help="Segments of P (random up to 6 if omitted).")
@click.option("--m", type=int, default=None, help="Segments of Q (random up to 6 if omitted).")
@click.option("--norm", "norm_spec", default="l1", show_default=True)
@click.option("--grid", "g", type=int, default=64, show_default=True)
def check(trials, seed, lemma1, n, m, norm_spec, g):
    """Randomised property checks; exit 3 with a counterexample on failure."""
    norm = _norm_arg(norm_spec)
    if lemma1:
        nl = [norm] if norm.is_polygonal else [NormHandle.l1()]
        res = bend_ratio_sweep(trials, seed, nl)
        P, Q, x, y = golden_ratio_fixture()
        fixture = oracle.lemma1_ratio(P, Q, (1, 1), x, y, oracle.NumericIntegrator(4096), norm=NormHandle.l1())
        res["max_ratio"] = max(res["max_ratio"], fixture)
        res["fixture_ratio"] = fixture
        ok = 0.2 - 1e-6 <= res["min_ratio"] and res["max_ratio"] <= 5 + 1e-6
        res["ok"] = ok
        _emit(res)
        sys.exit(0 if ok else EXIT_VIOLATION)
    norm, _ = resolve_norm(norm, None)
    rng = random.Random(seed)
    summary = {"trials": trials, "seed": seed, "passed": 0}
    for k in range(trials):
        P = random_curve(rng, n or rng.randint(1, 6))
        Q = random_curve(rng, m or rng.randint(1, 6))
        try:
            rec = sandwich_trial(P, Q, norm, g, rng)
        except NumericGuardError as exc:
            _emit({"trial": k, "error": str(exc), "P": P.vertices, "Q": Q.vertices})
            sys.exit(EXIT_NUMERIC)
        if not rec["ok"]:
            rec.update({"trial": k, "P": P.vertices, "Q": Q.vertices})
            _emit({"counterexample": rec})
            sys.exit(EXIT_VIOLATION)
        summary["passed"] += 1
        click.echo(f"trial {k}: value {rec['value']:.6g} grid {rec['grid_value']:.6g}", err=True)
    _emit(summary)


def render_svg(P: PolygonalCurve, Q: PolygonalCurve, norm: NormHandle, heat: int = 24) -> str:
    _, run = cdtw_approx(P, Q, norm)
    sp = ParameterSpace(P, Q, norm)
    w, h = sp.extent
    size = 600.0
    k = size / max(w, h)
    W, H = w * k, h * k
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W + 20:.2f}" height="{H + 20:.2f}" '
        f'viewBox="-10 -10 {W + 20:.2f} {H + 20:.2f}">',
        f'<g transform="translate(0,{H:.4f}) scale({k:.6g},{-k:.6g})">',
    ]
    # sampled distance field
    dmax = 0.0
    samples = []
    for a in range(heat):
        for b in range(heat):
            s, t = (a + 0.5) * w / heat, (b + 0.5) * h / heat
            d = sp.dist(s, t)
            samples.append((a, b, d))
            dmax = max(dmax, d)
    for a, b, d in samples:
        g = int(255 - 200 * (d / dmax if dmax else 0))
        out.append(
            f'<rect class="heat" x="{a * w / heat:.6g}" y="{b * h / heat:.6g}" width="{w / heat:.6g}" '
            f'height="{h / heat:.6g}" fill="rgb({g},{g},255)" stroke="none"/>'
        )
    for i in range(1, sp.n + 1):
        for j in range(1, sp.m + 1):
            c = sp.cell(i, j)
            (s0, s1), (t0, t1) = c.s_range, c.t_range
            out.append(
                f'<rect class="cell" x="{s0:.6g}" y="{t0:.6g}" width="{s1 - s0:.6g}" height="{t1 - t0:.6g}" '
                f'fill="none" stroke="black" stroke-width="{1 / k:.4g}"/>'
            )
            seg = _clip_valley(c)
            if seg:
                (a0, b0), (a1, b1) = seg
                out.append(
                    f'<line class="valley" x1="{a0:.6g}" y1="{b0:.6g}" x2="{a1:.6g}" y2="{b1:.6g}" '
                    f'stroke="green" stroke-width="{1.5 / k:.4g}"/>'
                )
    path = run.witness()
    pts = " ".join(f"{s:.6g},{t:.6g}" for s, t in path.waypoints)
    out.append(f'<polyline class="witness" points="{pts}" fill="none" stroke="red" stroke-width="{2 / k:.4g}"/>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"


def _clip_valley(c):
    v = c.valley
    (s0, s1), (t0, t1) = c.s_range, c.t_range
    ds, dt = v.direction
    lo, hi = -math.inf, math.inf
    for p, d, a, b in ((v.point[0], ds, s0, s1), (v.point[1], dt, t0, t1)):
        if d == 0.0:
            if not a <= p <= b:
                return None
        else:
            lo, hi = max(lo, (a - p) / d), min(hi, (b - p) / d)
    if lo > hi:
        return None
    return (v.point[0] + lo * ds, v.point[1] + lo * dt), (v.point[0] + hi * ds, v.point[1] + hi * dt)


@main.command()
@click.option("--p", "p_path", required=True)
@click.option("--q", "q_path", required=True)
@click.option("--norm", "norm_spec", default="l1", show_default=True)
@click.option("--out", "out_path", required=True, help="Output SVG path.")
def plot(p_path, q_path, norm_spec, out_path):
    """Parameter-space picture: cells, valleys, distance field, witness path."""
    P, Q = _load(p_path), _load(q_path)
    norm, _ = resolve_norm(_norm_arg(norm_spec), None)
    svg = render_svg(P, Q, norm)
    try:
        Path(out_path).write_text(svg)
    except OSError as exc:
        _fail(f"cannot write {out_path}: {exc}", EXIT_PARSE)
    _emit({"out": out_path})


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def bench_ladder(norm: NormHandle, sizes, seed: int = 0) -> list[dict]:
    rng = random.Random(seed)
    rows = []
    for n in sizes:
        P, Q = random_curve(rng, n), random_curve(rng, n)
        t = time.perf_counter()
        value, run = cdtw_approx(P, Q, norm)
        rows.append({"n": n, "m": n, "seconds": time.perf_counter() - t, "pieces": run.total_pieces, "value": value})
    return rows


def k_ladder(ks, n: int = 8, seed: int = 0, repeats: int = 1) -> list[dict]:
    rng = random.Random(seed)
    P, Q = random_curve(rng, n), random_curve(rng, n)
    rows = []
    for k in ks:
        norm = NormHandle.gauge(norms.regular_polygon(k, math.pi / k))
        best = math.inf
        for _ in range(repeats):
            t = time.perf_counter()
            _, run = cdtw_approx(P, Q, norm)
            best = min(best, time.perf_counter() - t)
        rows.append({"k": k, "seconds": best, "pieces": run.total_pieces})
    return rows


@main.command()
@click.option("--norm", "norm_spec", default="l1", show_default=True)
@click.option("--sizes", default="5,10,20,40", show_default=True)
@click.option("--ks", default="4,8,16,32", show_default=True, help="Gauge vertex counts for the k ladder.")
@click.option("--k-n", "k_n", type=int, default=8, show_default=True, help="Curve size for the k ladder.")
@click.option("--seed", type=int, default=0, show_default=True)
def bench(norm_spec, sizes, ks, k_n, seed):
    """Timing and piece-count ladders with fitted log-log slopes."""
    norm, _ = resolve_norm(_norm_arg(norm_spec), None)
    sizes = [int(x) for x in sizes.split(",") if x]
    rows = bench_ladder(norm, sizes, seed)
    for r in rows:
        click.echo(f"n={r['n']}: {r['seconds']:.3f}s, {r['pieces']} pieces", err=True)
    out = {"norm": norm.to_json(), "sizes": rows}
    if len(rows) > 1:
        out["time_slope"] = loglog_slope([r["n"] for r in rows], [r["seconds"] for r in rows])
        out["piece_slope"] = loglog_slope([r["n"] for r in rows], [r["pieces"] for r in rows])
    kl = [int(x) for x in ks.split(",") if x]
    if kl:
        krows = k_ladder(kl, k_n, seed)
        out["k_ladder"] = krows
        if len(krows) > 1:
            out["k_time_slope"] = loglog_slope([r["k"] for r in krows], [r["seconds"] for r in krows])
    _emit(out)


if __name__ == "__main__":
    main()
