"""Piecewise-quadratic functions on a closed interval.

Pieces are half-open ``[lo, hi)`` except the last, which is closed.  Each
piece may carry an opaque tag; envelopes keep the tag of the winning piece,
which is how callers trace a value back to the path that produced it.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

COEF_TOL = 1e-12
DISC_TOL = 1e-12
SNAP_TOL = 1e-9
CONT_TOL = 1e-7


class PWQDomainError(ValueError):
    pass


class ContinuityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadPiece:
    lo: float
    hi: float
    a: float
    b: float
    c: float
    tag: Any = None

    def __call__(self, t: float) -> float:
        return (self.a * t + self.b) * t + self.c


@dataclass(frozen=True)
class MinimaSet:
    points: tuple[tuple[float, float], ...]

    def __len__(self):
        return len(self.points)

    @property
    def ts(self) -> list[float]:
        return [t for t, _ in self.points]


def _q(co, t):
    return (co[0] * t + co[1]) * t + co[2]


def _snap(lo: float, hi: float) -> float:
    return SNAP_TOL * max(1.0, abs(lo), abs(hi))


def quad_roots(co: Sequence[float], lo: float, hi: float) -> list[float]:
    """Sign-changing roots of a*t^2 + b*t + c strictly inside (lo, hi)."""
    a, b, c = co
    m = 0.5 * (lo + hi)
    # shift to the interval midpoint for conditioning
    A = a
    B = 2.0 * a * m + b
    C = _q(co, m)
    w = 0.5 * (hi - lo)
    if abs(A) < COEF_TOL:
        if B == 0.0:
            return []
        roots = [-C / B]
    else:
        disc = B * B - 4.0 * A * C
        if disc <= DISC_TOL * max(B * B, abs(4.0 * A * C), 1e-300):
            return []
        sq = math.sqrt(disc)
        qq = -0.5 * (B + math.copysign(sq, B))
        roots = [qq / A]
        if qq != 0.0:
            roots.append(C / qq)
    tol = _snap(lo, hi)
    out = sorted(m + r for r in roots if -w < r < w)
    return [r for r in out if lo + tol < r < hi - tol]


class PiecewiseQuadratic:
    __slots__ = ("bps", "co", "tags")

    def __init__(self, bps: Sequence[float], co: Sequence[Sequence[float]], tags: Sequence[Any] | None = None):
        if len(bps) != len(co) + 1 or not co:
            raise ValueError("need one more breakpoint than pieces")
        for i in range(len(co)):
            if not bps[i] < bps[i + 1]:
                raise ValueError(f"breakpoints not strictly increasing at {i}: {bps[i]} {bps[i + 1]}")
        self.bps = list(map(float, bps))
        self.co = [tuple(map(float, c)) for c in co]
        self.tags = list(tags) if tags is not None else [None] * len(co)

    # construction helpers
    @classmethod
    def from_pieces(cls, pieces: Sequence[QuadPiece]) -> "PiecewiseQuadratic":
        for p, q in zip(pieces, pieces[1:]):
            if p.hi != q.lo:
                raise ValueError("pieces are not contiguous")
        return cls(
            [p.lo for p in pieces] + [pieces[-1].hi],
            [(p.a, p.b, p.c) for p in pieces],
            [p.tag for p in pieces],
        )

    @classmethod
    def quadratic(cls, lo: float, hi: float, a: float, b: float, c: float, tag=None) -> "PiecewiseQuadratic":
        return cls([lo, hi], [(a, b, c)], [tag])

    @classmethod
    def constant(cls, lo: float, hi: float, value: float, tag=None) -> "PiecewiseQuadratic":
        return cls([lo, hi], [(0.0, 0.0, value)], [tag])

    @property
    def lo(self) -> float:
        return self.bps[0]

    @property
    def hi(self) -> float:
        return self.bps[-1]

    @property
    def n_pieces(self) -> int:
        return len(self.co)

    @property
    def pieces(self) -> list[QuadPiece]:
        return [QuadPiece(self.bps[i], self.bps[i + 1], *self.co[i], self.tags[i]) for i in range(len(self.co))]

    def index(self, t: float) -> int:
        tol = _snap(self.bps[0], self.bps[-1])
        if t < self.bps[0] - tol or t > self.bps[-1] + tol:
            raise PWQDomainError(f"{t} outside [{self.bps[0]}, {self.bps[-1]}]")
        i = bisect.bisect_right(self.bps, t) - 1
        return min(max(i, 0), len(self.co) - 1)

    def __call__(self, t: float) -> float:
        return _q(self.co[self.index(t)], t)

    def tag_at(self, t: float):
        return self.tags[self.index(t)]

    def left_value(self, i: int) -> float:
        """Value of piece i at its left end."""
        return _q(self.co[i], self.bps[i])

    def right_value(self, i: int) -> float:
        return _q(self.co[i], self.bps[i + 1])

    def copy(self) -> "PiecewiseQuadratic":
        return PiecewiseQuadratic(self.bps, self.co, self.tags)

    def with_tag(self, tag) -> "PiecewiseQuadratic":
        return PiecewiseQuadratic(self.bps, self.co, [tag] * len(self.co))

    def to_json(self) -> dict:
        return {"breakpoints": list(self.bps), "pieces": [list(c) for c in self.co]}

    @classmethod
    def from_json(cls, data: dict) -> "PiecewiseQuadratic":
        return cls(data["breakpoints"], data["pieces"])

    def __repr__(self):
        return f"PiecewiseQuadratic({self.n_pieces} pieces on [{self.lo}, {self.hi}])"

    def max_abs(self) -> float:
        return max(max(abs(self.left_value(i)), abs(self.right_value(i))) for i in range(len(self.co)))


def eval(f: PiecewiseQuadratic, t: float) -> float:  # noqa: A001 - mirrors the operation name
    return f(t)


def coalesce(f: PiecewiseQuadratic) -> PiecewiseQuadratic:
    """Merge neighbouring pieces with identical coefficients and tags."""
    bps, co, tags = [f.bps[0]], [f.co[0]], [f.tags[0]]
    for i in range(1, len(f.co)):
        c, p = f.co[i], co[-1]
        scale = max(1.0, *map(abs, c), *map(abs, p))
        if tags[-1] == f.tags[i] and all(abs(x - y) <= COEF_TOL * scale for x, y in zip(c, p)):
            continue
        bps.append(f.bps[i])
        co.append(c)
        tags.append(f.tags[i])
    bps.append(f.bps[-1])
    return PiecewiseQuadratic(bps, co, tags)


def _merged_breaks(f: PiecewiseQuadratic, extra: Iterable[float]) -> list[float]:
    tol = _snap(f.lo, f.hi)
    pts = sorted(set(f.bps).union(x for x in extra if f.lo + tol < x < f.hi - tol))
    out = [pts[0]]
    for x in pts[1:]:
        if x - out[-1] > tol:
            out.append(x)
        elif x in f.bps:
            out[-1] = x
    out[-1] = f.hi
    out[0] = f.lo
    return out


def merge_refine(f: PiecewiseQuadratic, extra_breakpoints: Iterable[float]) -> PiecewiseQuadratic:
    bps = _merged_breaks(f, extra_breakpoints)
    co, tags = [], []
    for i in range(len(bps) - 1):
        j = f.index(0.5 * (bps[i] + bps[i + 1]))
        co.append(f.co[j])
        tags.append(f.tags[j])
    return PiecewiseQuadratic(bps, co, tags)


def add_quadratic(f: PiecewiseQuadratic, q: Sequence[float]) -> PiecewiseQuadratic:
    a, b, c = q
    return PiecewiseQuadratic(f.bps, [(x[0] + a, x[1] + b, x[2] + c) for x in f.co], f.tags)


def _check_domains(f, g):
    tol = _snap(f.lo, f.hi)
    if abs(f.lo - g.lo) > tol or abs(f.hi - g.hi) > tol:
        raise PWQDomainError(f"domains differ: [{f.lo}, {f.hi}] vs [{g.lo}, {g.hi}]")


def _common(f, g):
    _check_domains(f, g)
    bps = _merged_breaks(f, g.bps)
    spans = []
    for i in range(len(bps) - 1):
        m = 0.5 * (bps[i] + bps[i + 1])
        spans.append((bps[i], bps[i + 1], f.index(m), g.index(m)))
    return spans


def add(f: PiecewiseQuadratic, g: PiecewiseQuadratic) -> PiecewiseQuadratic:
    """Pointwise sum; tags come from f."""
    bps, co, tags = [], [], []
    for lo, hi, i, j in _common(f, g):
        bps.append(lo)
        co.append(tuple(x + y for x, y in zip(f.co[i], g.co[j])))
        tags.append(f.tags[i])
    bps.append(f.hi)
    return PiecewiseQuadratic(bps, co, tags)


def lower_envelope(f: PiecewiseQuadratic, g: PiecewiseQuadratic) -> PiecewiseQuadratic:
    """Pointwise minimum.  Ties keep f."""
    bps, co, tags = [], [], []
    for lo, hi, i, j in _common(f, g):
        cf, cg = f.co[i], g.co[j]
        d = (cf[0] - cg[0], cf[1] - cg[1], cf[2] - cg[2])
        cuts = [lo] + quad_roots(d, lo, hi) + [hi]
        for u, v in zip(cuts, cuts[1:]):
            m = 0.5 * (u + v)
            vf, vg = _q(cf, m), _q(cg, m)
            use_g = vg < vf - 1e-15 * max(1.0, abs(vf))
            bps.append(u)
            co.append(cg if use_g else cf)
            tags.append(g.tags[j] if use_g else f.tags[i])
    bps.append(f.hi)
    return coalesce(PiecewiseQuadratic(bps, co, tags))


def clamp_below(f: PiecewiseQuadratic, floor: float = 0.0) -> PiecewiseQuadratic:
    """Pointwise max(f, floor)."""
    if all(min(f.left_value(i), f.right_value(i)) >= floor and _interior_min(f, i) >= floor for i in range(f.n_pieces)):
        return f
    bps, co, tags = [], [], []
    for i in range(f.n_pieces):
        lo, hi, c = f.bps[i], f.bps[i + 1], f.co[i]
        cuts = [lo] + quad_roots((c[0], c[1], c[2] - floor), lo, hi) + [hi]
        for u, v in zip(cuts, cuts[1:]):
            bps.append(u)
            if _q(c, 0.5 * (u + v)) < floor:
                co.append((0.0, 0.0, floor))
            else:
                co.append(c)
            tags.append(f.tags[i])
    bps.append(f.hi)
    return coalesce(PiecewiseQuadratic(bps, co, tags))


def _interior_min(f, i):
    a, b, _ = f.co[i]
    if a > 0:
        v = -b / (2 * a)
        if f.bps[i] < v < f.bps[i + 1]:
            return _q(f.co[i], v)
    return math.inf


def max_jump(f: PiecewiseQuadratic) -> float:
    """Largest relative discontinuity across interior breakpoints."""
    scale = f.max_abs()
    worst = 0.0
    for i in range(1, f.n_pieces):
        l, r = f.right_value(i - 1), f.left_value(i)
        den = max(abs(l), abs(r), 1e-9 * scale, 1e-300)
        worst = max(worst, abs(l - r) / den)
    return worst


def repair_continuity(f: PiecewiseQuadratic, rtol: float = CONT_TOL) -> PiecewiseQuadratic:
    """Close small jumps by averaging; raise ContinuityError on larger ones.

    Each piece receives the linear correction that moves its end values to the
    averaged targets, so no new jumps appear.
    """
    jump = max_jump(f)
    if jump == 0.0:
        return f
    if jump >= rtol:
        raise ContinuityError(f"relative jump {jump:.3g} exceeds {rtol:g}")
    n = f.n_pieces
    target = [f.left_value(0)]
    for i in range(1, n):
        target.append(0.5 * (f.right_value(i - 1) + f.left_value(i)))
    target.append(f.right_value(n - 1))
    co = []
    for i in range(n):
        u, v = f.bps[i], f.bps[i + 1]
        du = target[i] - f.left_value(i)
        dv = target[i + 1] - f.right_value(i)
        slope = (dv - du) / (v - u)
        a, b, c = f.co[i]
        co.append((a, b + slope, c + du - slope * u))
    return PiecewiseQuadratic(f.bps, co, f.tags)


def _side_signs(f: PiecewiseQuadratic, i: int, t: float) -> tuple[int, int]:
    """Local behaviour at breakpoint index i: (+1 rising, 0 flat, -1 falling) moving left and right."""
    scale = max(1.0, f.max_abs())
    width = f.hi - f.lo
    dtol = 1e-9 * scale / width
    atol = 1e-9 * scale / (width * width)
    L = 0
    if i > 0:
        a, b, _ = f.co[i - 1]
        d = 2 * a * t + b
        if d < -dtol:
            L = 1
        elif d > dtol:
            L = -1
        else:
            L = 1 if a > atol else (-1 if a < -atol else 0)
    R = 0
    if i < f.n_pieces:
        a, b, _ = f.co[i]
        d = 2 * a * t + b
        if d > dtol:
            R = 1
        elif d < -dtol:
            R = -1
        else:
            R = 1 if a > atol else (-1 if a < -atol else 0)
    return L, R


def semistrict_local_minima(f: PiecewiseQuadratic) -> MinimaSet:
    """Local minima that are strict on at least one side.

    Candidates are domain ends, breakpoints and interior parabola vertices;
    interior points of constant pieces never qualify.
    """
    out = []
    n = f.n_pieces
    scale = max(1.0, f.max_abs())
    atol = 1e-9 * scale / (f.hi - f.lo) ** 2
    for i in range(n + 1):
        t = f.bps[i]
        L, R = _side_signs(f, i, t)
        if i == 0:
            ok = R > 0
        elif i == n:
            ok = L > 0
        else:
            ok = L >= 0 and R >= 0 and (L > 0 or R > 0)
        if ok:
            out.append((t, f.left_value(i) if i < n else f.right_value(n - 1)))
        if i < n:
            a, b, _ = f.co[i]
            if a > atol:
                v = -b / (2 * a)
                tol = _snap(f.bps[i], f.bps[i + 1])
                if f.bps[i] + tol < v < f.bps[i + 1] - tol:
                    out.append((v, _q(f.co[i], v)))
    out.sort()
    return MinimaSet(tuple(out))


def argmin(f: PiecewiseQuadratic, rtol: float = 1e-12) -> tuple[float, float]:
    """Global minimum (t, value); the smallest t wins among near-ties."""
    cands = []
    for i in range(f.n_pieces):
        cands.append((f.bps[i], f.left_value(i)))
        a, b, _ = f.co[i]
        if a > 0:
            v = -b / (2 * a)
            if f.bps[i] < v < f.bps[i + 1]:
                cands.append((v, _q(f.co[i], v)))
    cands.append((f.hi, f.right_value(f.n_pieces - 1)))
    best = min(v for _, v in cands)
    tol = rtol * max(1.0, f.max_abs())
    return min((t, v) for t, v in cands if v <= best + tol)


def _running_min_piece(co, lo, hi):
    """Running minimum of one quadratic over [lo, t] for t in [lo, hi].

    Returns ordered parts (u, v, kind, s0) where kind is "self" (equals the
    quadratic, still decreasing) or "flat" (constant value attained at s0).
    """
    a, b, _ = co
    if abs(a) < COEF_TOL:
        if b < 0:
            return [(lo, hi, "self", None)]
        return [(lo, hi, "flat", lo)]
    v = -b / (2 * a)
    tol = _snap(lo, hi)
    if a > 0:
        if v <= lo + tol:
            return [(lo, hi, "flat", lo)]
        if v >= hi - tol:
            return [(lo, hi, "self", None)]
        return [(lo, v, "self", None), (v, hi, "flat", v)]
    if v <= lo + tol:
        return [(lo, hi, "self", None)]
    r = 2 * v - lo
    if r >= hi - tol:
        return [(lo, hi, "flat", lo)]
    return [(lo, r, "flat", lo), (r, hi, "self", None)]


@dataclass
class PrefixMin:
    fn: PiecewiseQuadratic
    starts: list[tuple[float, float, Any]]  # (lo, hi, start) with start None meaning s = t


def prefix_min(f: PiecewiseQuadratic) -> PrefixMin:
    """t -> min over s <= t of f(s), with the minimising s recorded per piece.

    Ties prefer the earlier s.  Pieces whose minimiser is t itself get start
    None; others carry the fixed minimiser.
    """
    scale = max(1.0, f.max_abs())
    tie = 1e-13 * scale
    rec_val, rec_s = math.inf, None
    bps, co, starts = [], [], []

    def emit(u, v, c, s):
        if v <= u:
            return
        bps.append(u)
        co.append(c)
        starts.append(s)

    for i in range(f.n_pieces):
        c = f.co[i]
        for u, v, kind, s0 in _running_min_piece(c, f.bps[i], f.bps[i + 1]):
            if kind == "flat":
                val = _q(c, s0)
                if val < rec_val - tie:
                    rec_val, rec_s = val, s0
                emit(u, v, (0.0, 0.0, rec_val), rec_s)
                continue
            # decreasing part: the record is kept until c drops below it
            if _q(c, u) < rec_val - tie or rec_s is None:
                emit(u, v, c, None)
                rec_val, rec_s = _q(c, v), v
                continue
            if _q(c, v) >= rec_val - tie:
                emit(u, v, (0.0, 0.0, rec_val), rec_s)
                continue
            roots = quad_roots((c[0], c[1], c[2] - rec_val), u, v)
            x = roots[0] if roots else u
            emit(u, x, (0.0, 0.0, rec_val), rec_s)
            emit(x, v, c, None)
            rec_val, rec_s = _q(c, v), v
    bps.append(f.hi)
    g = PiecewiseQuadratic(bps, co, starts)
    spans = [(g.bps[i], g.bps[i + 1], g.tags[i]) for i in range(g.n_pieces)]
    return PrefixMin(coalesce(g), spans)


def fit(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    breaks: Iterable[float] = (),
    tag=None,
    rtol: float = 1e-9,
    max_depth: int = 40,
) -> PiecewiseQuadratic:
    """Recover a function that is exactly quadratic between known breakpoints.

    Each interval is interpolated through its ends and midpoint and checked at
    an interior point; a failed check bisects the interval, so a missing
    breakpoint costs evaluations but not accuracy.
    """
    if not hi > lo:
        raise ValueError("empty interval")
    tol = _snap(lo, hi)
    pts = [lo]
    for x in sorted(breaks):
        if lo + tol < x < hi - tol and x - pts[-1] > tol:
            pts.append(x)
    if hi - pts[-1] <= tol and len(pts) > 1:
        pts.pop()
    pts.append(hi)
    cache: dict[float, float] = {}

    def F(t):
        v = cache.get(t)
        if v is None:
            v = cache[t] = fn(t)
        return v

    width = hi - lo
    bps, co = [], []

    def interp(u, v, fu, fm, fv):
        h = v - u
        m = 0.5 * (u + v)
        if h < 1e-7 * max(width, 1e-300):
            s = (fv - fu) / h
            return (0.0, s, fu - s * u)
        # Newton form around the midpoint, then expanded
        d1 = (fv - fu) / h
        a = 2.0 * (fv - 2.0 * fm + fu) / (h * h)
        b1 = d1 - 2.0 * a * m
        return (a, b1, fm - a * m * m - b1 * m)

    def solve(u, v, depth):
        fu, fv = F(u), F(v)
        m = 0.5 * (u + v)
        fm = F(m)
        c = interp(u, v, fu, fm, fv)
        if depth < max_depth and v - u > 4 * tol:
            x = u + 0.8090169943749475 * (v - u)
            fx = F(x)
            if abs(_q(c, x) - fx) > rtol * max(1.0, abs(fx), abs(fu), abs(fv)):
                solve(u, m, depth + 1)
                solve(m, v, depth + 1)
                return
        bps.append(u)
        co.append(c)

    for u, v in zip(pts, pts[1:]):
        solve(u, v, 0)
    bps.append(hi)
    return PiecewiseQuadratic(bps, co, [tag] * len(co))
