"""Norms on the plane.

Built-in 1-, 2- and max-norms, gauge norms of balanced convex polygons, and
polygonal approximation of arbitrary norms.  A gauge is linear on each cone
spanned by two adjacent polygon vertices, so evaluation reduces to locating
the cone (binary search over polar angles) and one dot product.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull

COLLINEAR_TOL = 1e-12
BALANCE_TOL = 1e-9


class GaugeError(ValueError):
    """Base class for malformed gauge polygons."""


class NotBalancedError(GaugeError):
    pass


class NotConvexError(GaugeError):
    pass


class NotAbsorbingError(GaugeError):
    pass


class NotPolygonalError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def validate_gauge(vertices: Sequence[Sequence[float]]) -> tuple[tuple[float, float], ...]:
    """Check a candidate unit ball and return its vertices with collinear ones merged.

    Raises the first violated property: NotBalancedError, NotConvexError or
    NotAbsorbingError.
    """
    pts = [(float(v[0]), float(v[1])) for v in vertices]
    if any(not (math.isfinite(x) and math.isfinite(y)) for x, y in pts):
        raise GaugeError("non-finite vertex")
    scale = max((abs(x) + abs(y) for x, y in pts), default=0.0)
    if scale == 0.0:
        raise NotAbsorbingError("polygon collapses to the origin")
    # drop vertices lying on the segment between their neighbours
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        k = len(pts)
        for i in range(k):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % k]
            cr = _cross(b[0] - a[0], b[1] - a[1], c[0] - b[0], c[1] - b[1])
            if abs(cr) < COLLINEAR_TOL * scale * scale:
                del pts[i]
                changed = True
                break
    k = len(pts)
    if k % 2 or k < 4:
        raise NotBalancedError(f"{k} vertices cannot form a centrally symmetric polygon")
    h = k // 2
    for i in range(h):
        a, b = pts[i], pts[i + h]
        if abs(a[0] + b[0]) > BALANCE_TOL * scale or abs(a[1] + b[1]) > BALANCE_TOL * scale:
            raise NotBalancedError(f"vertex {i} {a} has no opposite counterpart")
    for i in range(k):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % k]
        if _cross(b[0] - a[0], b[1] - a[1], c[0] - b[0], c[1] - b[1]) <= 0.0:
            raise NotConvexError(f"reflex or clockwise turn at vertex {i} {b}")
    for i in range(k):
        a, b = pts[i], pts[(i + 1) % k]
        if _cross(b[0] - a[0], b[1] - a[1], -a[0], -a[1]) <= 0.0:
            raise NotAbsorbingError("origin is not strictly inside the polygon")
    # winding must be exactly once around the origin
    turn = sum(
        math.remainder(math.atan2(pts[(i + 1) % k][1], pts[(i + 1) % k][0]) - math.atan2(pts[i][1], pts[i][0]), 2 * math.pi)
        for i in range(k)
    )
    if abs(turn - 2 * math.pi) > 1e-6:
        raise NotConvexError("vertices wind around the origin more than once")
    return tuple(pts)


@dataclass(frozen=True)
class GaugePolygon:
    vertices: tuple[tuple[float, float], ...]
    evec: tuple[tuple[float, float], ...] = field(repr=False, compare=False)
    _angles: tuple[float, ...] = field(repr=False, compare=False)
    _order: tuple[int, ...] = field(repr=False, compare=False)

    def __init__(self, vertices: Sequence[Sequence[float]]):
        pts = validate_gauge(vertices)
        k = len(pts)
        ev = []
        for c in range(k):
            v, w = pts[c], pts[(c + 1) % k]
            den = v[0] * w[1] - w[0] * v[1]
            ev.append(((w[1] - v[1]) / den, (v[0] - w[0]) / den))
        ang = [math.atan2(y, x) for x, y in pts]
        r = min(range(k), key=ang.__getitem__)
        order = tuple((r + j) % k for j in range(k))
        object.__setattr__(self, "vertices", pts)
        object.__setattr__(self, "evec", tuple(ev))
        object.__setattr__(self, "_angles", tuple(ang[i] for i in order))
        object.__setattr__(self, "_order", order)

    @property
    def k(self) -> int:
        return len(self.vertices)

    def cone_of(self, x: float, y: float) -> int:
        """Index c of the cone spanned by vertices c and c+1 that contains (x, y).

        Points on a shared ray go to the cone ending at that ray.
        """
        j = bisect.bisect_left(self._angles, math.atan2(y, x)) - 1
        return self._order[j % self.k]

    def __call__(self, x: float, y: float) -> float:
        if x == 0.0 and y == 0.0:
            return 0.0
        e = self.evec[self.cone_of(x, y)]
        return max(e[0] * x + e[1] * y, 0.0)

    def brute(self, x: float, y: float) -> float:
        # gauge equals the support of the polar: max over all cone functionals
        return max(e[0] * x + e[1] * y for e in self.evec)

    def to_json(self) -> dict:
        return {"type": "polygon", "vertices": [list(v) for v in self.vertices]}


TILTED_SQUARE = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))
AXIS_SQUARE = ((1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0))


@dataclass(frozen=True)
class NormHandle:
    kind: str  # "l1", "l2", "linf" or "gauge"
    polygon: GaugePolygon | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("l1", "l2", "linf", "gauge"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "gauge" and not isinstance(self.polygon, GaugePolygon):
            raise ValueError("gauge norm needs a GaugePolygon")

    @classmethod
    def l1(cls) -> "NormHandle":
        return cls("l1")

    @classmethod
    def l2(cls) -> "NormHandle":
        return cls("l2")

    @classmethod
    def linf(cls) -> "NormHandle":
        return cls("linf")

    @classmethod
    def gauge(cls, vertices, label: str | None = None) -> "NormHandle":
        poly = vertices if isinstance(vertices, GaugePolygon) else GaugePolygon(vertices)
        return cls("gauge", poly, label)

    @property
    def is_polygonal(self) -> bool:
        return self.kind != "l2"

    def to_json(self) -> dict:
        if self.kind == "gauge":
            d = self.polygon.to_json()
            if self.label:
                d["label"] = self.label
            return d
        return {"type": self.kind}


def as_gauge(norm: NormHandle) -> GaugePolygon:
    """The unit ball of a polygonal norm."""
    if norm.kind == "l1":
        return _L1_POLY
    if norm.kind == "linf":
        return _LINF_POLY
    if norm.kind == "gauge":
        return norm.polygon
    raise NotPolygonalError(f"{norm.kind} is not polygonal; apply approximate_norm first")


_L1_POLY = GaugePolygon(TILTED_SQUARE)
_LINF_POLY = GaugePolygon(AXIS_SQUARE)


def norm_eval(norm: NormHandle, z: Sequence[float]) -> float:
    x, y = float(z[0]), float(z[1])
    if norm.kind == "l1":
        return abs(x) + abs(y)
    if norm.kind == "l2":
        return math.hypot(x, y)
    if norm.kind == "linf":
        return max(abs(x), abs(y))
    return norm.polygon(x, y)


def evaluation_vector(K: GaugePolygon, cone_index: int) -> tuple[float, float]:
    if not 0 <= cone_index < K.k:
        raise IndexError(f"cone index {cone_index} out of range for {K.k} cones")
    return K.evec[cone_index]


@dataclass(frozen=True)
class ApproxConfig:
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be positive and finite, got {self.epsilon}")


def regular_polygon(count: int, phase: float = 0.0) -> GaugePolygon:
    """Regular polygon with an even number of vertices inscribed in the unit circle."""
    if count < 4 or count % 2:
        raise ValueError("vertex count must be even and at least 4")
    return GaugePolygon(
        [(math.cos(phase + 2 * math.pi * i / count), math.sin(phase + 2 * math.pi * i / count)) for i in range(count)]
    )


def l2_vertex_count(epsilon: float) -> int:
    """Smallest even N >= 4 with sec(pi/N) <= 1 + epsilon."""
    n = 2
    while 1.0 / math.cos(math.pi / (2 * n)) > 1.0 + epsilon:
        n += 1
    return 2 * n


def _hull_polygon(points: np.ndarray) -> GaugePolygon:
    hull = ConvexHull(points)
    # scipy returns 2D hull vertices in counter-clockwise order
    return GaugePolygon(points[hull.vertices])


def approximate_norm(norm: NormHandle | Callable[[float, float], float], cfg: ApproxConfig) -> GaugePolygon:
    """Balanced convex polygon K with ||z|| <= G_K(z) <= (1 + eps) ||z||.

    Polygonal norms are returned unchanged.  The 2-norm gets an inscribed
    regular polygon.  A black-box evaluator is sampled on its unit circle and
    refined until a dense direction check passes; that path is best-effort.
    """
    if isinstance(norm, NormHandle):
        if norm.is_polygonal:
            return as_gauge(norm)
        return regular_polygon(l2_vertex_count(cfg.epsilon))
    f = norm
    m = max(2, math.ceil(math.pi / math.sqrt(2.0 * cfg.epsilon)))
    check = np.linspace(0.0, 2 * math.pi, 4096, endpoint=False)
    for _ in range(12):
        th = np.pi * np.arange(m) / m
        pts = np.array([(math.cos(a), math.sin(a)) for a in th])
        pts /= np.array([f(x, y) for x, y in pts])[:, None]
        K = _hull_polygon(np.vstack([pts, -pts]))
        worst = max(K(math.cos(a), math.sin(a)) / f(math.cos(a), math.sin(a)) for a in check)
        if worst <= 1.0 + cfg.epsilon:
            return K
        m *= 2
    raise ConfigError("black-box norm could not be approximated to the requested accuracy")


def random_gauge(rng: np.random.Generator, k: int = 8) -> GaugePolygon:
    """Random balanced convex polygon with at most k vertices."""
    while True:
        th = np.sort(rng.uniform(0.0, np.pi, k // 2))
        r = rng.uniform(0.5, 1.5, k // 2)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        try:
            return _hull_polygon(np.vstack([pts, -pts]))
        except (GaugeError, ValueError):
            continue


def parse_norm(spec: str | dict) -> NormHandle:
    """Parse {"type": "l1"|"l2"|"linf"}, {"type": "polygon", ...} or {"type": "approx", ...}.

    A bare name such as "l1" is accepted as shorthand.
    """
    if isinstance(spec, str):
        s = spec.strip()
        if s.lower() in ("l1", "l2", "linf"):
            return NormHandle(s.lower())
        spec = json.loads(s)
    kind = str(spec.get("type", "")).lower()
    if kind in ("l1", "l2", "linf"):
        return NormHandle(kind)
    if kind == "polygon":
        return NormHandle.gauge(spec["vertices"])
    if kind == "approx":
        base = parse_norm({"type": spec.get("base", "l2")})
        eps = float(spec.get("epsilon", 0.01))
        return NormHandle.gauge(approximate_norm(base, ApproxConfig(eps)), label=f"approx({base.kind},{eps})")
    raise ValueError(f"unknown norm type {kind!r}")
