"""Parameter-space cells.

A cell pairs segment i of P with segment j of Q.  Coordinates are global arc
lengths: s runs along P, t along Q.  Inside a cell the difference
P(s) - Q(t) is affine in (s, t) and the distance is piecewise linear, with
kinks where the difference crosses a ray through a vertex of the unit ball.
Every cost here is an exact integral of such a function.

Optimal paths between two points of a cell route through the valley line:
the line of positive slope on which the distance is minimal along every
anti-diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from scipy.optimize import linprog

from . import norms, pwq
from .geometry import ArcTable, PolygonalCurve, build_arc_table

N, E, S, W = "N", "E", "S", "W"
_OPP = {N: S, E: W}
_ADJ = {N: W, E: S}
VALLEY_TIE = 1e-12


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class BorderRef:
    i: int
    j: int
    side: str
    lo: float
    hi: float

    @property
    def horizontal(self) -> bool:
        return self.side in (N, S)


@dataclass(frozen=True)
class Valley:
    kind: str  # "line" or "degenerate"
    point: tuple[float, float]
    direction: tuple[float, float]  # nonnegative, components sum to 1

    @property
    def slope(self) -> float:
        ds, dt = self.direction
        return math.inf if ds == 0.0 else dt / ds

    def side(self, s: float, t: float) -> float:
        """Positive above-left of the line, negative below-right."""
        ds, dt = self.direction
        return ds * (t - self.point[1]) - dt * (s - self.point[0])

    def implicit(self) -> tuple[float, float, float]:
        ds, dt = self.direction
        s0, t0 = self.point
        return (-dt, ds, dt * s0 - ds * t0)


@dataclass(frozen=True)
class MonotonePath:
    waypoints: tuple[tuple[float, float], ...]

    def __init__(self, waypoints: Sequence[Sequence[float]], tol: float = 1e-9):
        pts: list[tuple[float, float]] = []
        for p in waypoints:
            p = (float(p[0]), float(p[1]))
            if pts and p == pts[-1]:
                continue
            if pts:
                q = pts[-1]
                scale = tol * max(1.0, abs(p[0]), abs(p[1]))
                if p[0] < q[0] - scale or p[1] < q[1] - scale:
                    raise ContractError(f"path is not monotone at {q} -> {p}")
            pts.append(p)
        if not pts:
            raise ContractError("empty path")
        object.__setattr__(self, "waypoints", tuple(pts))

    def __add__(self, other: "MonotonePath") -> "MonotonePath":
        return MonotonePath(self.waypoints + other.waypoints)

    @property
    def start(self):
        return self.waypoints[0]

    @property
    def end(self):
        return self.waypoints[-1]


@dataclass(frozen=True)
class RhoSplit:
    rho_in: pwq.PiecewiseQuadratic
    rho_out: pwq.PiecewiseQuadratic


def _intersect(l1, l2):
    a1, b1, c1 = l1
    a2, b2, c2 = l2
    det = a1 * b2 - a2 * b1
    if abs(det) <= 1e-14 * (abs(a1 * b2) + abs(a2 * b1)) or det == 0.0:
        return None
    return ((b1 * c2 - b2 * c1) / det, (a2 * c1 - a1 * c2) / det)


class ParameterSpace:
    """Curves, norm and arc tables; hands out cells."""

    def __init__(self, P: PolygonalCurve, Q: PolygonalCurve, norm: norms.NormHandle):
        self.P, self.Q, self.norm = P, Q, norm
        self.K = norms.as_gauge(norm)
        self.tabP: ArcTable = build_arc_table(P, norm)
        self.tabQ: ArcTable = build_arc_table(Q, norm)
        self._cells: dict[tuple[int, int], Cell] = {}

    @property
    def n(self) -> int:
        return self.P.n

    @property
    def m(self) -> int:
        return self.Q.n

    @property
    def extent(self) -> tuple[float, float]:
        return self.tabP.total, self.tabQ.total

    def cell(self, i: int, j: int) -> "Cell":
        c = self._cells.get((i, j))
        if c is None:
            c = self._cells[(i, j)] = Cell(self, i, j)
        return c

    def cell_at(self, s: float, t: float) -> "Cell":
        return self.cell(self.tabP.segment_of(s), self.tabQ.segment_of(t))

    def dist(self, s: float, t: float) -> float:
        return self.cell_at(s, t).dist(s, t)


class Cell:
    def __init__(self, space: ParameterSpace, i: int, j: int):
        self.space = space
        self.i, self.j = i, j
        self.K = space.K
        tp, tq = space.tabP.prefix_lengths, space.tabQ.prefix_lengths
        self.s_range = (tp[i - 1], tp[i])
        self.t_range = (tq[j - 1], tq[j])
        p0, p1 = space.P.vertices[i - 1], space.P.vertices[i]
        q0, q1 = space.Q.vertices[j - 1], space.Q.vertices[j]
        lp = self.s_range[1] - self.s_range[0]
        lq = self.t_range[1] - self.t_range[0]
        self.dp = ((p1.x - p0.x) / lp, (p1.y - p0.y) / lp)
        self.dq = ((q1.x - q0.x) / lq, (q1.y - q0.y) / lq)
        S0, T0 = self.s_range[0], self.t_range[0]
        # D(s, t) = Dc + s*dp - t*dq
        self.Dc = (
            p0.x - q0.x - S0 * self.dp[0] + T0 * self.dq[0],
            p0.y - q0.y - S0 * self.dp[1] + T0 * self.dq[1],
        )
        self.scale = max(lp + lq, 1e-300)
        self.valley = compute_valley(self)

    def __repr__(self):
        return f"Cell({self.i}, {self.j})"

    # geometry of the cell
    def D(self, s: float, t: float) -> tuple[float, float]:
        return (
            self.Dc[0] + s * self.dp[0] - t * self.dq[0],
            self.Dc[1] + s * self.dp[1] - t * self.dq[1],
        )

    def dist(self, s: float, t: float) -> float:
        x, y = self.D(s, t)
        return self.K(x, y)

    def border(self, side: str) -> BorderRef:
        if side in (N, S):
            return BorderRef(self.i, self.j, side, *self.s_range)
        return BorderRef(self.i, self.j, side, *self.t_range)

    def point(self, b: BorderRef | str, u: float) -> tuple[float, float]:
        side = b if isinstance(b, str) else b.side
        if side == N:
            return (u, self.t_range[1])
        if side == S:
            return (u, self.t_range[0])
        if side == E:
            return (self.s_range[1], u)
        return (self.s_range[0], u)

    @property
    def ne(self) -> tuple[float, float]:
        return (self.s_range[1], self.t_range[1])

    @cached_property
    def ray_lines(self) -> list[tuple[float, float, float]]:
        """Lines in parameter space where the difference vector crosses a vertex ray."""
        dp, dq, Dc = self.dp, self.dq, self.Dc
        out = []
        for vx, vy in self.K.vertices[: self.K.k // 2]:
            out.append((vx * dp[1] - vy * dp[0], -(vx * dq[1] - vy * dq[0]), vx * Dc[1] - vy * Dc[0]))
        return out

    # integrals
    def _line_mean(self, Da, Db) -> float:
        """Exact mean of the gauge over the straight segment Da -> Db in difference space."""
        vx, vy = Db[0] - Da[0], Db[1] - Da[1]
        K = self.K
        us = []
        for wx, wy in K.vertices[: K.k // 2]:
            den = wx * vy - wy * vx
            if den != 0.0:
                u = -(wx * Da[1] - wy * Da[0]) / den
                if 0.0 < u < 1.0:
                    us.append(u)
        ga, gb = K(*Da), K(*Db)
        if not us:
            return 0.5 * (ga + gb)
        us.sort()
        total, pu, pg = 0.0, 0.0, ga
        for u in us:
            g = K(Da[0] + u * vx, Da[1] + u * vy)
            total += 0.5 * (pg + g) * (u - pu)
            pu, pg = u, g
        return total + 0.5 * (pg + gb) * (1.0 - pu)

    def _seg(self, a, b) -> float:
        w = abs(b[0] - a[0]) + abs(b[1] - a[1])
        if w == 0.0:
            return 0.0
        return w * self._line_mean(self.D(*a), self.D(*b))

    def segment_cost(self, a: Sequence[float], b: Sequence[float]) -> float:
        """Cost of the straight path a -> b: horizontal, vertical or along the valley."""
        a, b = tuple(a), tuple(b)
        tol = 1e-9 * self.scale
        if a[0] > b[0] + tol or a[1] > b[1] + tol:
            raise ContractError(f"segment {a} -> {b} is not monotone")
        axis = abs(a[0] - b[0]) <= tol or abs(a[1] - b[1]) <= tol
        if not axis:
            v = self.valley
            if abs(v.side(*a)) > tol or abs(v.side(*b)) > tol:
                raise ContractError(f"segment {a} -> {b} is neither axis-parallel nor on the valley")
        return self._seg(a, b)

    # optimal paths
    def _route(self, x, y) -> list[tuple[float, float]]:
        x1, x2 = x
        y1, y2 = y
        v = self.valley
        ds, dt = v.direction
        s0, t0 = v.point
        lo, hi = -math.inf, math.inf
        ok = True
        for p0, d, a, b in ((s0, ds, x1, y1), (t0, dt, x2, y2)):
            if d == 0.0:
                if not (a <= p0 <= b):
                    ok = False
            else:
                lo = max(lo, (a - p0) / d)
                hi = min(hi, (b - p0) / d)
        if ok and lo <= hi:
            # entry and exit of the valley inside the bounding box
            e = (min(max(s0 + lo * ds, x1), y1), min(max(t0 + lo * dt, x2), y2))
            f = (min(max(s0 + hi * ds, x1), y1), min(max(t0 + hi * dt, x2), y2))
            if e[0] != x1 and e[1] != x2:
                e = (e[0], x2) if abs(e[1] - x2) <= abs(e[0] - x1) else (x1, e[1])
            if f[0] != y1 and f[1] != y2:
                f = (f[0], y2) if abs(f[1] - y2) <= abs(f[0] - y1) else (y1, f[1])
            return [x, e, f, y]
        if v.side(0.5 * (x1 + y1), 0.5 * (x2 + y2)) > 0:
            return [x, (y1, x2), y]
        return [x, (x1, y2), y]

    def opt_cost(self, x, y) -> float:
        pts = self._route(x, y)
        return sum(self._seg(pts[k], pts[k + 1]) for k in range(len(pts) - 1))

    def opt_path(self, x, y) -> tuple[float, MonotonePath]:
        tol = 1e-9 * self.scale
        if x[0] > y[0] + tol or x[1] > y[1] + tol:
            raise ContractError(f"{x} does not precede {y}")
        y = (max(y[0], x[0]), max(y[1], x[1]))
        pts = self._route(tuple(x), y)
        cost = sum(self._seg(pts[k], pts[k + 1]) for k in range(len(pts) - 1))
        return cost, MonotonePath(pts)

    # cost functions along borders
    def _events(self, fixed, horizontal: bool) -> list[float]:
        """Coordinates along the moving border where the optimal-cost function may kink."""
        S0, S1 = self.s_range
        T0, T1 = self.t_range
        struct = [
            (1.0, 0.0, -S0), (1.0, 0.0, -S1), (0.0, 1.0, -T0), (0.0, 1.0, -T1),
            (1.0, 0.0, -fixed[0]), (0.0, 1.0, -fixed[1]), self.valley.implicit(),
        ]  # fmt: skip
        rays = self.ray_lines
        pts = []
        for r in rays:
            for l in struct:
                p = _intersect(r, l)
                if p is not None:
                    pts.append(p)
        for a in range(len(struct)):
            for b in range(a + 1, len(struct)):
                p = _intersect(struct[a], struct[b])
                if p is not None:
                    pts.append(p)
        if len(rays) >= 2:
            p = _intersect(rays[0], rays[1])
            if p is not None:
                pts.append(p)
        return [p[0] if horizontal else p[1] for p in pts]

    def fn_to_border(self, start, B: BorderRef, tag=None, lo=None) -> pwq.PiecewiseQuadratic:
        """u -> opt(start, B(u)) on dom(B) (or [lo, B.hi])."""
        u0 = B.lo if lo is None else lo
        return pwq.fit(
            lambda u: self.opt_cost(start, self.point(B, u)),
            u0,
            B.hi,
            self._events(start, B.horizontal),
            tag,
        )

    def fn_from_border(self, A: BorderRef, end, tag=None) -> pwq.PiecewiseQuadratic:
        """u -> opt(A(u), end) on dom(A)."""
        return pwq.fit(
            lambda u: self.opt_cost(self.point(A, u), end),
            A.lo,
            A.hi,
            self._events(end, A.horizontal),
            tag,
        )


def compute_valley(cell: Cell) -> Valley:
    """Line of positive slope along which the distance is minimal on each anti-diagonal.

    Moving along an anti-diagonal changes the difference vector by w = dp + dq.
    The minimum of a polygonal gauge along direction w is attained on the ray
    through the vertex that is extreme perpendicular to w, or on the whole
    cone of an edge parallel to w; then the midpoints of the minimising
    segments are used.
    """
    dp, dq, K = cell.dp, cell.dq, cell.K
    S0, S1 = cell.s_range
    T0, T1 = cell.t_range
    wx, wy = dp[0] + dq[0], dp[1] + dq[1]
    if abs(wx) + abs(wy) <= 1e-12 * (abs(dp[0]) + abs(dp[1]) + abs(dq[0]) + abs(dq[1])):
        # distance is constant on anti-diagonals; every monotone path costs the same
        return Valley("line", (0.5 * (S0 + S1), 0.5 * (T0 + T1)), (0.5, 0.5))
    nx, ny = -wy, wx
    proj = [nx * vx + ny * vy for vx, vy in K.vertices]
    top = max(proj)
    scale = math.hypot(nx, ny) * max(math.hypot(*v) for v in K.vertices)
    extreme = [K.vertices[i] for i, p in enumerate(proj) if p >= top - VALLEY_TIE * scale]
    Dc = cell.Dc

    def hit(v, c):
        # point on anti-diagonal s + t = c where the difference is parallel to v
        cw = v[0] * wy - v[1] * wx
        cq = v[0] * dq[1] - v[1] * dq[0]
        cD = v[0] * Dc[1] - v[1] * Dc[0]
        s = (c * cq - cD) / cw
        return s

    ends = []
    for c in (S0 + T0, S1 + T1):
        ss = [hit(v, c) for v in extreme]
        s = 0.5 * (min(ss) + max(ss))
        ends.append((s, c - s))
    (sa, ta), (sb, tb) = ends
    ds, dt = sb - sa, tb - ta
    if len(extreme) > 1 and not (ds > 0 and dt > 0):
        # the midline of the flat band falls; search the band for a rising line
        found = _rising_line_in_band(cell, [lambda c, v=v: hit(v, c) for v in extreme])
        if found is not None:
            (sa, ta), (ds, dt) = found
    kind = "line"
    tol = 1e-9 * (abs(ds) + abs(dt))
    if ds <= tol or dt <= tol:
        kind = "degenerate"
        ds, dt = max(ds, 0.0), max(dt, 0.0)
        if ds <= tol:
            ds = 0.0
        if dt <= tol:
            dt = 0.0
    tot = ds + dt
    return Valley(kind, (sa, ta), (ds / tot, dt / tot))


def _rising_line_in_band(cell: Cell, bounds) -> tuple[tuple[float, float], tuple[float, float]] | None:
    """Line s = s0 + alpha (c - c0), 0 < alpha < 1, along which every clipped anti-diagonal is minimised.

    bounds are the linear functions c -> s of the vertex lines enclosing the
    flat band.  Where the band leaves the cell the clipped distance is
    monotone, so only the band edges that lie inside the clip constrain the
    line.  All constraints are half-planes in (s0, alpha).  The LP keeps alpha
    away from 0 and 1 first and centres the line in the band second; the
    band may pinch to a point, so its margin is allowed to be zero.
    """
    S0, S1 = cell.s_range
    T0, T1 = cell.t_range
    c_lo, c_hi = S0 + T0, S1 + T1
    L = c_hi - c_lo
    c0 = 0.5 * (c_lo + c_hi)

    def clip(c):
        return max(S0, c - T1), min(S1, c - T0)

    # constraint kinks: clip corners, band edges meeting the clip, crossing band edges
    cs = {c_lo, c_hi, S0 + T1, S1 + T0}
    lines = [(f(1.0) - f(0.0), f(0.0)) for f in bounds]
    clip_lines = [(0.0, S0), (0.0, S1), (1.0, -T1), (1.0, -T0)]
    for a1, b1 in lines:
        for a2, b2 in lines + clip_lines:
            if a1 != a2:
                c = (b2 - b1) / (a1 - a2)
                if c_lo < c < c_hi:
                    cs.add(c)
    cs = sorted(cs)
    cs += [0.5 * (u + v) for u, v in zip(cs, cs[1:])]
    A, b = [], []
    for c in cs:
        l, r = clip(c)
        vals = [a * c + k for a, k in lines]
        b1, b2 = min(vals), max(vals)
        x = c - c0
        if b1 >= l:
            lo = min(b1, r)
            A.append([-1.0, -x, 0.0, 1.0])  # s0 + alpha x - mb >= lo
            b.append(-lo)
        if b2 <= r:
            hi = max(b2, l)
            A.append([1.0, x, 0.0, 1.0])  # s0 + alpha x + mb <= hi
            b.append(hi)
    A += [[0.0, -L, 1.0, 0.0], [0.0, L, 1.0, 0.0]]
    b += [0.0, L]
    res = linprog(
        [0.0, 0.0, -1.0, -1e-3],
        A_ub=A,
        b_ub=b,
        bounds=[(None, None), (0.0, 1.0), (None, L), (0.0, L)],
        method="highs",
    )
    if res.status != 0 or res.x[2] <= 1e-9 * L:
        return None
    s0, alpha = float(res.x[0]), float(res.x[1])
    return (s0, c0 - s0), (alpha, 1.0 - alpha)


def segment_cost(cell: Cell, a, b) -> float:
    return cell.segment_cost(a, b)


def opt_path_cost(cell: Cell, x, y) -> tuple[float, MonotonePath]:
    return cell.opt_path(x, y)


def cost_fn_fixed_start(cell: Cell, A: BorderRef, s_star: float, B: BorderRef) -> pwq.PiecewiseQuadratic:
    """t -> opt(A(s*), B(t)) over the part of dom(B) reachable from A(s*)."""
    start = cell.point(A, s_star)
    lo = None
    if A.side in (S, W) and _OPP.get(B.side) == A.side:
        lo = max(B.lo, s_star)
        if lo >= B.hi:
            return pwq.PiecewiseQuadratic.constant(B.hi - 1e-12 * cell.scale, B.hi, 0.0)
    return cell.fn_to_border(start, B, lo=lo)


def rho_split(cell: Cell, A: BorderRef, B: BorderRef) -> RhoSplit:
    """opt(A(s), B(t)) = rho_in(s) + rho_out(t) for s <= t, with rho_in(A.lo) = 0."""
    if _OPP.get(B.side) != A.side:
        raise ContractError(f"{A.side} is not opposite to {B.side}")
    rho_out = cell.fn_to_border(cell.point(A, A.lo), B)
    far = cell.point(B, B.hi)
    rin = cell.fn_from_border(A, far)
    rho_in = pwq.add_quadratic(rin, (0.0, 0.0, -rho_out(B.hi)))
    return RhoSplit(rho_in, rho_out)


def opposite(side: str) -> str:
    return _OPP[side]


def adjoining(side: str) -> str:
    return _ADJ[side]
