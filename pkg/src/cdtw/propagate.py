"""Layered propagation of border cost functions over the parameter space.

Every output border (north, east) of every cell carries a piecewise-quadratic
function that upper-bounds the cheapest path cost from the origin to each
border point by at most a factor of five.  Cells are visited in layers of
constant i + j.  Per cell, the output borders are seeded from the two cell
corners, then improved from the single best start point on the adjoining
input border and, for the input border whose best path to the north-east
corner wins strictly, from all start points on the opposite input border up
to that best start.

Opposite borders decouple: opt(A(s), B(t)) = rho_in(s) + rho_out(t) for
s <= t.  The opposite-border update is therefore a running minimum of
A.apx + rho_in plus rho_out, computed in one left-to-right pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from . import pwq
from .cell import E, N, S, W, BorderRef, Cell, MonotonePath, ParameterSpace, RhoSplit, rho_split
from .geometry import PolygonalCurve
from .norms import NormHandle, NotPolygonalError

TIE_RTOL = 1e-12


class NumericGuardError(ArithmeticError):
    """Raised when floating-point drift exceeds the repair tolerance."""


@dataclass
class BorderState:
    ref: BorderRef
    apx: pwq.PiecewiseQuadratic
    rank: int = 0
    piece_count_log: int = 0
    candidates: int = 0

    def __post_init__(self):
        self.piece_count_log = self.apx.n_pieces


@dataclass(frozen=True)
class ParentCandidates:
    values: tuple[float, ...]
    best: tuple[float, float]  # (h*, s*)


@dataclass
class CornerCosts:
    h: list[list[float]]
    # per cell: input side and start parameter realising h
    source: dict[tuple[int, int], tuple[str, float]] = field(default_factory=dict)


class CellWork:
    """State of one cell while it is being processed."""

    def __init__(self, cell: Cell, south: BorderState, west: BorderState):
        self.cell = cell
        self.inputs = {S: south, W: west}
        self.out: dict[str, BorderState] = {}
        self._split: dict[str, RhoSplit] = {}
        self._parent: dict[str, pwq.PiecewiseQuadratic] = {}
        self.switches: list[tuple[float, float]] = []

    def split(self, out_side: str) -> RhoSplit:
        sp = self._split.get(out_side)
        if sp is None:
            A = self.cell.border(S if out_side == N else W)
            sp = self._split[out_side] = rho_split(self.cell, A, self.cell.border(out_side))
        return sp

    def parent_fn(self, in_side: str) -> pwq.PiecewiseQuadratic:
        """s -> A.apx(s) + rho_in(s); differs from the cost to the NE corner by a constant."""
        f = self._parent.get(in_side)
        if f is None:
            out_side = N if in_side == S else E
            f = self._parent[in_side] = pwq.add(self.inputs[in_side].apx, self.split(out_side).rho_in)
        return f


def _tag(kind, *rest):
    return (kind,) + rest


def propagate_corner(work: CellWork, source: str, h: float) -> pwq.PiecewiseQuadratic:
    """Seed an output border from a cell corner whose cost is h.

    source "NW" seeds the north border, "SE" the east border.
    """
    c = work.cell
    if source == "NW":
        B, start, owner = c.border(N), c.point(W, c.t_range[1]), (c.i - 1, c.j)
    elif source == "SE":
        B, start, owner = c.border(E), c.point(S, c.s_range[1]), (c.i, c.j - 1)
    else:
        raise ValueError(f"unknown corner {source!r}")
    f = c.fn_to_border(start, B, tag=_tag("corner", *owner))
    return pwq.add_quadratic(f, (0.0, 0.0, h))


def parent_candidates(work: CellWork, in_side: str) -> ParentCandidates:
    """Semistrict local minima of the start-cost-plus-path-to-NE function on an input border."""
    g = work.parent_fn(in_side)
    out_side = N if in_side == S else E
    B = work.cell.border(out_side)
    const = work.split(out_side).rho_out(B.hi)
    mins = pwq.semistrict_local_minima(g)
    s_best, v_best = pwq.argmin(g)
    return ParentCandidates(tuple(mins.ts), (v_best + const, s_best))


def propagate_from_adjoining(work: CellWork, out_side: str, s_star: float) -> None:
    c = work.cell
    in_side = W if out_side == N else S
    A = work.inputs[in_side]
    B = work.out[out_side]
    f = c.fn_to_border(c.point(in_side, s_star), c.border(out_side), tag=_tag("adj", in_side, s_star))
    f = pwq.add_quadratic(f, (0.0, 0.0, A.apx(s_star)))
    B.apx = pwq.lower_envelope(B.apx, f)


def propagate_from_opposing(work: CellWork, out_side: str, s_star: float) -> None:
    """Envelope with t -> min over s <= min(s*, t) of A.apx(s) + opt(A(s), B(t))."""
    in_side = S if out_side == N else W
    A = work.inputs[in_side]
    B = work.out[out_side]
    g = work.parent_fn(in_side)
    pm = pwq.prefix_min(g)
    # beyond s* the running minimum is pinned at s*, as s* is the global minimiser
    last = None
    for lo, hi, start in pm.starts:
        s0 = lo if start is None else start
        if last is not None and s0 < last - 1e-9 * max(1.0, abs(last)):
            raise NumericGuardError("opposite-border sweep reactivated an earlier start")
        last = hi if start is None else start
        work.switches.append((lo, s0))
    if pm.starts and pm.starts[-1][2] is not None:
        end_start = pm.starts[-1][2]
        if end_start > s_star + 1e-9 * max(1.0, abs(s_star)):
            raise NumericGuardError("running minimum ends beyond the best start")
    fn = pwq.PiecewiseQuadratic(pm.fn.bps, pm.fn.co, [_tag("opp", in_side, st) for st in pm.fn.tags])
    cand = pwq.add(fn, work.split(out_side).rho_out)
    B.apx = pwq.lower_envelope(B.apx, cand)
    B.rank = A.rank + 1


def _finalise(f: pwq.PiecewiseQuadratic) -> pwq.PiecewiseQuadratic:
    f = pwq.clamp_below(f, 0.0)
    try:
        f = pwq.repair_continuity(f)
    except pwq.ContinuityError as exc:
        raise NumericGuardError(str(exc)) from exc
    return pwq.coalesce(f)


class Propagation:
    """Result of a full run; keeps every border for diagnostics and witness paths."""

    def __init__(self, space: ParameterSpace, swapped: bool):
        self.space = space
        self.swapped = swapped
        n, m = space.n, space.m
        self.corners = CornerCosts([[math.nan] * (m + 1) for _ in range(n + 1)])
        self.north: dict[tuple[int, int], BorderState] = {}
        self.east: dict[tuple[int, int], BorderState] = {}
        self.candidates: dict[tuple[int, int, str], int] = {}
        self.switch_log: dict[tuple[int, int], list] = {}

    @property
    def value(self) -> float:
        return self.corners.h[self.space.n][self.space.m]

    # borders feeding a cell
    def south_of(self, i: int, j: int) -> BorderState:
        return self.north[(i, j - 1)]

    def west_of(self, i: int, j: int) -> BorderState:
        return self.east[(i - 1, j)]

    def output_borders(self):
        for (i, j), b in self.north.items():
            if j >= 1:
                yield (i, j, N), b
        for (i, j), b in self.east.items():
            if i >= 1:
                yield (i, j, E), b

    @property
    def max_rank(self) -> int:
        return max((b.rank for _, b in self.output_borders()), default=0)

    @property
    def total_pieces(self) -> int:
        return sum(b.apx.n_pieces for _, b in self.output_borders())

    def report(self) -> dict:
        return rank_and_piece_report(self)

    # witness reconstruction
    def _corner_path(self, i: int, j: int) -> MonotonePath:
        sp = self.space
        s, t = sp.tabP.prefix_lengths[i], sp.tabQ.prefix_lengths[j]
        if i == 0 or j == 0:
            return MonotonePath([(0.0, 0.0), (s, t)])
        side, s0 = self.corners.source[(i, j)]
        c = sp.cell(i, j)
        head = self._border_path(self.south_of(i, j) if side == S else self.west_of(i, j), c, side, s0)
        _, tail = c.opt_path(c.point(side, s0), c.ne)
        return head + tail

    def _border_path(self, state: BorderState, cell: Cell, side: str, u: float) -> MonotonePath:
        """Path realising state.apx(u); state is border `side` of `cell` (input or output)."""
        tag = state.apx.tag_at(u)
        target = cell.point(side, u)
        kind = tag[0]
        if kind == "base":
            return MonotonePath([(0.0, 0.0), target])
        ref = state.ref
        owner = self.space.cell(ref.i, ref.j)
        tgt = owner.point(ref.side, u)
        if kind == "corner":
            ci, cj = tag[1], tag[2]
            head = self._corner_path(ci, cj)
            start = head.end
        else:
            in_side, s0 = tag[1], tag[2]
            if s0 is None:
                s0 = u
            src = self.south_of(ref.i, ref.j) if in_side == S else self.west_of(ref.i, ref.j)
            head = self._border_path(src, owner, in_side, s0)
            start = owner.point(in_side, s0)
        _, tail = owner.opt_path(start, tgt)
        return head + tail

    def witness(self) -> MonotonePath:
        """Monotone path from the origin to the far corner whose cost is the returned value."""
        path = self._corner_path(self.space.n, self.space.m)
        if self.swapped:
            return MonotonePath([(t, s) for s, t in path.waypoints])
        return path

    def border_witness(self, i: int, j: int, side: str, u: float) -> MonotonePath:
        state = self.north[(i, j)] if side == N else self.east[(i, j)]
        cell = self.space.cell(max(i, 1), max(j, 1))
        if side == N and j == 0:
            return MonotonePath([(0.0, 0.0), (u, 0.0)])
        if side == E and i == 0:
            return MonotonePath([(0.0, 0.0), (0.0, u)])
        return self._border_path(state, cell, side, u)


def _base_borders(run: Propagation) -> None:
    sp = run.space
    h = run.corners.h
    h[0][0] = 0.0
    for i in range(1, sp.n + 1):
        c = sp.cell(i, 1)
        B = c.border(S)
        f = c.fn_to_border(c.point(S, B.lo), B, tag=("base",))
        f = pwq.add_quadratic(f, (0.0, 0.0, h[i - 1][0]))
        run.north[(i, 0)] = BorderState(BorderRef(i, 0, N, B.lo, B.hi), f)
        h[i][0] = f(B.hi)
    for j in range(1, sp.m + 1):
        c = sp.cell(1, j)
        B = c.border(W)
        f = c.fn_to_border(c.point(W, B.lo), B, tag=("base",))
        f = pwq.add_quadratic(f, (0.0, 0.0, h[0][j - 1]))
        run.east[(0, j)] = BorderState(BorderRef(0, j, E, B.lo, B.hi), f)
        h[0][j] = f(B.hi)


def process_cell(run: Propagation, i: int, j: int) -> CellWork:
    sp = run.space
    h = run.corners.h
    c = sp.cell(i, j)
    work = CellWork(c, run.south_of(i, j), run.west_of(i, j))
    work.out[N] = BorderState(c.border(N), propagate_corner(work, "NW", h[i - 1][j]))
    work.out[E] = BorderState(c.border(E), propagate_corner(work, "SE", h[i][j - 1]))
    pc_s = parent_candidates(work, S)
    pc_w = parent_candidates(work, W)
    (hs, ss), (hw, sw) = pc_s.best, pc_w.best
    run.candidates[(i, j, S)] = len(pc_s.values)
    run.candidates[(i, j, W)] = len(pc_w.values)
    propagate_from_adjoining(work, N, sw)
    propagate_from_adjoining(work, E, ss)
    tie = abs(hs - hw) <= TIE_RTOL * max(1.0, abs(hs), abs(hw))
    if not tie and hs < hw:
        propagate_from_opposing(work, N, ss)
    elif not tie and hw < hs:
        propagate_from_opposing(work, E, sw)
    # costs are nonnegative; clamp rounding residue
    h[i][j] = max(0.0, min(hs, hw))
    run.corners.source[(i, j)] = (S, ss) if hs <= hw else (W, sw)
    for side in (N, E):
        st = work.out[side]
        st.apx = _finalise(st.apx)
        st.piece_count_log = st.apx.n_pieces
        st.candidates = len(pc_s.values) if side == N else len(pc_w.values)
    run.north[(i, j)] = work.out[N]
    run.east[(i, j)] = work.out[E]
    if work.switches:
        run.switch_log[(i, j)] = work.switches
    return work


def cdtw_approx(P: PolygonalCurve, Q: PolygonalCurve, norm: NormHandle) -> tuple[float, Propagation]:
    """Factor-5 approximation of the continuous DTW distance under a polygonal norm."""
    if not norm.is_polygonal:
        raise NotPolygonalError("the 2-norm is not polygonal; build a gauge with approximate_norm first")
    swapped = P.n < Q.n
    if swapped:
        P, Q = Q, P
    run = Propagation(ParameterSpace(P, Q, norm), swapped)
    _base_borders(run)
    n, m = run.space.n, run.space.m
    for layer in range(2, n + m + 1):
        for i in range(max(1, layer - m), min(n, layer - 1) + 1):
            process_cell(run, i, layer - i)
    return run.value, run


def rank_and_piece_report(run: Propagation) -> dict:
    per = []
    for (i, j, side), b in sorted(run.output_borders(), key=lambda x: x[0]):
        per.append({"cell": [i, j], "side": side, "rank": b.rank, "pieces": b.apx.n_pieces, "candidates": b.candidates})
    bound = max(run.space.n, run.space.m)
    max_rank = run.max_rank
    if max_rank > bound:
        raise NumericGuardError(f"border rank {max_rank} exceeds max(n, m) = {bound}")
    return {
        "value": run.value,
        "total_pieces": run.total_pieces,
        "max_rank": max_rank,
        "per_border": per,
    }


def border_checks(run: Propagation, pairs: int = 100, rng=None) -> dict[str, float]:
    """Largest continuity jump and worst border-travel violation over all output borders.

    The travel check samples t < t' and measures
    apx(t') - apx(t) - opt(B(t), B(t')), which must not be positive.
    """
    import random

    rng = rng or random.Random(0)
    worst_jump, worst_travel = 0.0, -math.inf
    for (i, j, side), b in run.output_borders():
        f = b.apx
        worst_jump = max(worst_jump, pwq.max_jump(f))
        c = run.space.cell(i, j)
        for _ in range(pairs):
            t, t2 = sorted(rng.uniform(f.lo, f.hi) for _ in range(2))
            travel = c._seg(c.point(side, t), c.point(side, t2))
            worst_travel = max(worst_travel, f(t2) - f(t) - travel)
    return {"max_jump": worst_jump, "max_travel_violation": worst_travel}
