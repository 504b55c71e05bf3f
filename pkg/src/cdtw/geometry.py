"""Polygonal curves in the plane and their arc-length parametrisation."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from . import norms

DUPLICATE_TOL = 1e-12
ARC_REL_TOL = 1e-9


class CurveError(ValueError):
    pass


class CurveParseError(CurveError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(ValueError):
    pass


class Point2(NamedTuple):
    x: float
    y: float


def _as_point(v) -> Point2:
    if len(v) != 2:
        raise CurveError(f"expected 2 coordinates, got {len(v)}")
    x, y = float(v[0]), float(v[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise CurveError(f"non-finite coordinate in {v!r}")
    return Point2(x, y)


@dataclass(frozen=True)
class PolygonalCurve:
    vertices: tuple[Point2, ...]

    def __init__(self, vertices: Iterable[Sequence[float]]):
        pts = tuple(_as_point(v) for v in vertices)
        if len(pts) < 2:
            raise CurveError("a polygonal curve needs at least two vertices")
        for i in range(1, len(pts)):
            a, b = pts[i - 1], pts[i]
            if abs(a.x - b.x) <= DUPLICATE_TOL and abs(a.y - b.y) <= DUPLICATE_TOL:
                raise CurveError(f"vertices {i - 1} and {i} coincide")
        object.__setattr__(self, "vertices", pts)

    @property
    def n(self) -> int:
        """Number of segments."""
        return len(self.vertices) - 1

    def reversed(self) -> "PolygonalCurve":
        return PolygonalCurve(self.vertices[::-1])

    def translated(self, dx: float, dy: float) -> "PolygonalCurve":
        return PolygonalCurve([(v.x + dx, v.y + dy) for v in self.vertices])


@dataclass(frozen=True)
class ArcTable:
    prefix_lengths: tuple[float, ...]

    @property
    def total(self) -> float:
        return self.prefix_lengths[-1]

    def segment_of(self, s: float) -> int:
        """Index i (1-based) of the segment containing parameter s."""
        i = bisect.bisect_right(self.prefix_lengths, s)
        return min(max(i, 1), len(self.prefix_lengths) - 1)


def build_arc_table(curve: PolygonalCurve, norm: "norms.NormHandle") -> ArcTable:
    acc = [0.0]
    vs = curve.vertices
    for i in range(1, len(vs)):
        d = norms.norm_eval(norm, (vs[i].x - vs[i - 1].x, vs[i].y - vs[i - 1].y))
        acc.append(acc[-1] + d)
    return ArcTable(tuple(acc))


def arc_length(curve: PolygonalCurve, norm: "norms.NormHandle") -> float:
    return build_arc_table(curve, norm).total


def point_at(curve: PolygonalCurve, table: ArcTable, s: float) -> Point2:
    total = table.total
    tol = ARC_REL_TOL * total
    if s < -tol or s > total + tol:
        raise DomainError(f"arc parameter {s} outside [0, {total}]")
    s = min(max(s, 0.0), total)
    i = table.segment_of(s)
    lo, hi = table.prefix_lengths[i - 1], table.prefix_lengths[i]
    a, b = curve.vertices[i - 1], curve.vertices[i]
    u = (s - lo) / (hi - lo)
    return Point2(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y))


def parse_curve_text(text: str, fmt: str | None = None) -> PolygonalCurve:
    """Parse a curve from CSV ("x,y" per line) or JSON ({"vertices": [[x, y], ...]})."""
    stripped = text.lstrip()
    if fmt == "json" or (fmt is None and stripped.startswith("{")):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CurveParseError(exc.msg, exc.lineno) from exc
        if not isinstance(data, dict) or "vertices" not in data:
            raise CurveParseError('JSON curve must be an object with a "vertices" list')
        try:
            return PolygonalCurve(data["vertices"])
        except (TypeError, CurveError) as exc:
            raise CurveParseError(str(exc)) from exc
    pts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise CurveParseError(f"expected 'x,y', got {raw!r}", lineno)
        try:
            pt = _as_point([float(parts[0]), float(parts[1])])
        except (ValueError, CurveError) as exc:
            raise CurveParseError(f"bad coordinate in {raw!r}", lineno) from exc
        pts.append(pt)
    try:
        return PolygonalCurve(pts)
    except CurveError as exc:
        raise CurveParseError(str(exc)) from exc


def load_curve(path: str | Path) -> PolygonalCurve:
    p = Path(path)
    fmt = "json" if p.suffix.lower() == ".json" else None
    return parse_curve_text(p.read_text(), fmt)
