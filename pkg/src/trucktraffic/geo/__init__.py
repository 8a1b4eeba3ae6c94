"""Planar geometry kernel: WKT, lengths/areas, buffering, clipping, indexing."""

from .primitives import (
    AnyPolygon,
    Geometry,
    GeometryError,
    LineString,
    MultiPolygon,
    Point,
    Polygon,
    VERTEX_TOL,
    bounds,
    line_length_km,
    lonlat_to_planar,
    polygon_area_km2,
    polygon_parts,
    ring_signed_area,
    translate,
)
from .wkt import WktError, parse_wkt, to_wkt
from .clip import clip_line_to_polygon, point_in_polygon
from .buffer import buffer
from .index import SpatialIndex, build_index

__all__ = [
    "AnyPolygon",
    "Geometry",
    "GeometryError",
    "LineString",
    "MultiPolygon",
    "Point",
    "Polygon",
    "SpatialIndex",
    "VERTEX_TOL",
    "WktError",
    "bounds",
    "buffer",
    "build_index",
    "clip_line_to_polygon",
    "line_length_km",
    "lonlat_to_planar",
    "parse_wkt",
    "point_in_polygon",
    "polygon_area_km2",
    "polygon_parts",
    "ring_signed_area",
    "to_wkt",
    "translate",
]
