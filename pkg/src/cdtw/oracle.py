"""Reference computations that share no code with the propagation core.

The grid dynamic program discretises the parameter space and searches
monotone lattice paths; the numeric integrator evaluates path costs by the
composite trapezoid rule.  Norms are evaluated here from their own formulas
(for gauges, as the maximum over facet functionals).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import PolygonalCurve
from .norms import NormHandle

MOVES = ((1, 0), (0, 1), (1, 1), (1, 2), (2, 1))


class OracleMemoryError(MemoryError):
    pass


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class GridConfig:
    g: int = 64

    def __post_init__(self):
        if int(self.g) < 2:
            raise ValueError("grid needs at least 2 subdivisions per cell side")


@dataclass(frozen=True)
class NumericIntegrator:
    steps: int = 4096

    def __post_init__(self):
        if int(self.steps) < 16:
            raise ValueError("integrator needs at least 16 steps")


def _facets(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    # functional f with f.v = f.w = 1 on every edge
    A = np.stack([v, w], axis=1)
    return np.linalg.solve(A, np.ones((len(v), 2, 1)))[..., 0]


def norm_array(norm: NormHandle, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    if norm.kind == "l1":
        return np.abs(dx) + np.abs(dy)
    if norm.kind == "l2":
        return np.hypot(dx, dy)
    if norm.kind == "linf":
        return np.maximum(np.abs(dx), np.abs(dy))
    F = _facets(norm.polygon.vertices)
    out = F[0, 0] * dx + F[0, 1] * dy
    for f in F[1:]:
        out = np.maximum(out, f[0] * dx + f[1] * dy)
    return out


def _prefix(curve: PolygonalCurve, norm: NormHandle) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(curve.vertices, dtype=float)
    d = np.diff(v, axis=0)
    seg = norm_array(norm, d[:, 0], d[:, 1])
    return v, np.concatenate([[0.0], np.cumsum(seg)])


def _positions(v: np.ndarray, pre: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.interp(s, pre, v[:, 0]), np.interp(s, pre, v[:, 1])


def _mem_limit_bytes() -> float:
    return float(os.environ.get("CDTW_MEM_LIMIT_MB", "1024")) * 1024 * 1024


def grid_cdtw(P: PolygonalCurve, Q: PolygonalCurve, norm: NormHandle, cfg: GridConfig) -> tuple[float, float]:
    """(lower_hint, value) from a refined lattice dynamic program.

    value is the cost of the best lattice path with trapezoid edge costs and
    converges to the continuous optimum from above; edges are split where
    they may cross a curve vertex, so every edge cost bounds its exact
    integral from above.  lower_hint subtracts the
    a-priori mesh error 2 * h * (|P| + |Q|); it is a heuristic bound only.
    """
    g = int(cfg.g)
    vp, pre_p = _prefix(P, norm)
    vq, pre_q = _prefix(Q, norm)
    n, m = len(vp) - 1, len(vq) - 1
    rows, cols = n * g + 1, m * g + 1
    need = rows * cols * 8 * 3
    if need > _mem_limit_bytes():
        raise OracleMemoryError(f"grid of {rows}x{cols} needs {need / 2**20:.0f} MiB; raise CDTW_MEM_LIMIT_MB")
    frac = np.arange(g) / g
    s = np.concatenate([pre_p[:-1, None] + np.diff(pre_p)[:, None] * frac, [[pre_p[-1]]]], axis=None)
    t = np.concatenate([pre_q[:-1, None] + np.diff(pre_q)[:, None] * frac, [[pre_q[-1]]]], axis=None)
    px, py = _positions(vp, pre_p, s)
    qx, qy = _positions(vq, pre_q, t)
    dist = norm_array(norm, px[:, None] - qx[None, :], py[:, None] - qy[None, :])
    dt = np.diff(t)
    C = np.full((rows, cols), np.inf)
    # row 0 only moves up
    C[0, 0] = 0.0
    C[0, 1:] = np.cumsum(0.5 * (dist[0, :-1] + dist[0, 1:]) * dt)
    for a in range(1, rows):
        d = dist[a]
        cand = np.full(cols, np.inf)
        for da, db in MOVES:
            if da == 0 or a - da < 0:
                continue
            src = C[a - da]
            dprev = dist[a - da]
            ds = s[a] - s[a - da]
            if db == 0:
                cost = src + 0.5 * (dprev + d) * ds
                np.minimum(cand, cost, out=cand)
            elif da == 1 and db == 1:
                w = ds + dt
                cost = src[:-1] + 0.5 * (dprev[:-1] + d[1:]) * w
                np.minimum(cand[1:], cost, out=cand[1:])
            else:
                # two-step moves may straddle a curve vertex, so split them at the middle
                # lattice line; each half is affine in difference space, where trapezoid
                # overestimates the convex integrand and keeps the value an upper bound
                if db == 2:
                    u = (t[1:-1] - t[:-2]) / (t[2:] - t[:-2])
                    mx = px[a - 1] + u * (px[a] - px[a - 1]) - qx[1:-1]
                    my = py[a - 1] + u * (py[a] - py[a - 1]) - qy[1:-1]
                    w = ds + (t[2:] - t[:-2])
                    d0, d1 = dprev[:-2], d[2:]
                else:
                    u = (s[a - 1] - s[a - 2]) / (s[a] - s[a - 2])
                    mx = px[a - 1] - (qx[:-1] + u * (qx[1:] - qx[:-1]))
                    my = py[a - 1] - (qy[:-1] + u * (qy[1:] - qy[:-1]))
                    w = ds + dt
                    d0, d1 = dprev[:-1], d[1:]
                dm = norm_array(norm, mx, my)
                cost = src[: len(w)] + 0.5 * (d0 + dm) * u * w + 0.5 * (dm + d1) * (1 - u) * w
                np.minimum(cand[db:], cost, out=cand[db:])
        # vertical moves within the row as a min-plus prefix scan
        Wc = np.concatenate([[0.0], np.cumsum(0.5 * (d[:-1] + d[1:]) * dt)])
        C[a] = Wc + np.minimum.accumulate(cand - Wc)
    value = float(C[-1, -1])
    mesh = max(np.max(np.diff(s)), np.max(dt))
    lower = value - 2.0 * mesh * (pre_p[-1] + pre_q[-1])
    return float(lower), value


def _segment_integral(vp, pre_p, vq, pre_q, norm, a, b, steps):
    u = np.linspace(0.0, 1.0, steps + 1)
    s = a[0] + u * (b[0] - a[0])
    t = a[1] + u * (b[1] - a[1])
    px, py = _positions(vp, pre_p, s)
    qx, qy = _positions(vq, pre_q, t)
    f = norm_array(norm, px - qx, py - qy)
    w = abs(b[0] - a[0]) + abs(b[1] - a[1])
    return w * float(np.sum(0.5 * (f[1:] + f[:-1])) / steps)


def _split_at(a, b, cuts_s, cuts_t):
    """Split a segment where it crosses a curve vertex parameter."""
    us = {0.0, 1.0}
    for k, cuts in ((0, cuts_s), (1, cuts_t)):
        lo, hi = sorted((a[k], b[k]))
        if hi > lo:
            for c in cuts[(cuts > lo) & (cuts < hi)]:
                us.add((c - a[k]) / (b[k] - a[k]))
    us = sorted(us)
    pts = [(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])) for u in us]
    return list(zip(pts, pts[1:]))


def path_cost_numeric_with_error(
    P: PolygonalCurve, Q: PolygonalCurve, path, norm: NormHandle, integ: NumericIntegrator = NumericIntegrator()
) -> tuple[float, float]:
    """Trapezoid cost of a monotone parameter-space polyline and a Richardson error estimate."""
    pts = [tuple(map(float, p)) for p in getattr(path, "waypoints", path)]
    for p, q in zip(pts, pts[1:]):
        if q[0] < p[0] - 1e-9 * max(1.0, abs(p[0])) or q[1] < p[1] - 1e-9 * max(1.0, abs(p[1])):
            raise ValueError(f"path is not monotone at {p} -> {q}")
    vp, pre_p = _prefix(P, norm)
    vq, pre_q = _prefix(Q, norm)
    fine = coarse = 0.0
    steps = int(integ.steps)
    for a, b in zip(pts, pts[1:]):
        for u, v in _split_at(a, b, pre_p, pre_q):
            fine += _segment_integral(vp, pre_p, vq, pre_q, norm, u, v, steps)
            coarse += _segment_integral(vp, pre_p, vq, pre_q, norm, u, v, steps // 2)
    return fine, abs(fine - coarse) / 3.0


def path_cost_numeric(P, Q, path, norm: NormHandle, integ: NumericIntegrator = NumericIntegrator()) -> float:
    return path_cost_numeric_with_error(P, Q, path, norm, integ)[0]


def lemma1_ratio(
    P: PolygonalCurve,
    Q: PolygonalCurve,
    cell: tuple[int, int],
    x: Sequence[float],
    y: Sequence[float],
    integ: NumericIntegrator = NumericIntegrator(),
    norm: NormHandle | None = None,
) -> float:
    """cost(x -> (y1, x2) -> y) / cost(x -> (x1, y2) -> y) inside one cell."""
    norm = norm or NormHandle.l1()
    _, pre_p = _prefix(P, norm)
    _, pre_q = _prefix(Q, norm)
    i, j = cell
    s_lo, s_hi, t_lo, t_hi = pre_p[i - 1], pre_p[i], pre_q[j - 1], pre_q[j]
    tol = 1e-9 * max(1.0, s_hi + t_hi)
    for p in (x, y):
        if not (s_lo - tol <= p[0] <= s_hi + tol and t_lo - tol <= p[1] <= t_hi + tol):
            raise ValueError(f"{p} lies outside cell {cell}")
    if x[0] > y[0] + tol or x[1] > y[1] + tol:
        raise ValueError("x must precede y")
    c_xy = path_cost_numeric(P, Q, [x, (x[0], y[1]), y], norm, integ)
    c_yx = path_cost_numeric(P, Q, [x, (y[0], x[1]), y], norm, integ)
    if c_xy == 0.0:
        if c_yx == 0.0:
            raise UndefinedRatioError("both bend paths have zero cost")
        return math.inf
    return c_yx / c_xy
