"""Constant-factor approximation of continuous dynamic time warping for planar polygonal curves."""

from .geometry import PolygonalCurve, Point2, arc_length, build_arc_table, point_at
from .norms import ApproxConfig, GaugePolygon, NormHandle, approximate_norm, norm_eval
from .propagate import cdtw_approx

__all__ = [
    "ApproxConfig",
    "GaugePolygon",
    "NormHandle",
    "Point2",
    "PolygonalCurve",
    "approximate_norm",
    "arc_length",
    "build_arc_table",
    "cdtw_approx",
    "norm_eval",
    "point_at",
]
