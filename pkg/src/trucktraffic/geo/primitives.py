"""Planar geometry primitives in a projected, meter-based coordinate system.

All math here is Euclidean. Inputs in geographic (lon/lat) coordinates must be
projected first; ``lonlat_to_planar`` offers a local approximation for small
extents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

#: Consecutive vertices closer than this (meters) are merged during repair.
VERTEX_TOL = 1e-9


class GeometryError(ValueError):
    pass


def _as_coords(coords: object) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError("coordinates must be an (n, 2) sequence")
    if not np.isfinite(arr).all():
        raise GeometryError("coordinates must be finite")
    return arr


def _dedup(arr: np.ndarray) -> np.ndarray:
    if len(arr) < 2:
        return arr
    keep = np.ones(len(arr), dtype=bool)
    d = np.abs(np.diff(arr, axis=0)).max(axis=1)
    keep[1:] = d > VERTEX_TOL
    return arr[keep]


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class LineString:
    """Open polyline with at least 2 distinct vertices."""

    coords: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = _dedup(_as_coords(self.coords))
        if len(arr) < 2:
            raise GeometryError("LineString needs >= 2 distinct vertices")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LineString) and np.array_equal(self.coords, other.coords)


def _check_ring(arr: np.ndarray) -> np.ndarray:
    if len(arr) < 4:
        raise GeometryError("ring needs >= 4 points (3 distinct, closed)")
    if np.abs(arr[0] - arr[-1]).max() > VERTEX_TOL:
        raise GeometryError("ring must be closed (first point == last point)")
    arr = _dedup(arr[:-1])
    if len(arr) < 3:
        raise GeometryError("ring degenerates to < 3 distinct vertices")
    return np.vstack([arr, arr[:1]])


def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise rings. Ring is closed."""
    x, y = ring[:-1, 0], ring[:-1, 1]
    xn, yn = ring[1:, 0], ring[1:, 1]
    return float(np.sum(x * yn - xn * y) / 2.0)


@dataclass(frozen=True)
class Polygon:
    """One exterior ring plus optional holes; normalized so the exterior is
    counter-clockwise and holes are clockwise."""

    exterior: np.ndarray = field(repr=False)
    holes: tuple = ()

    def __post_init__(self) -> None:
        ext = _check_ring(_as_coords(self.exterior))
        if ring_signed_area(ext) < 0:
            ext = ext[::-1].copy()
        ext.setflags(write=False)
        normalized = []
        for h in self.holes:
            ring = _check_ring(_as_coords(h))
            if ring_signed_area(ring) > 0:
                ring = ring[::-1].copy()
            ring.setflags(write=False)
            normalized.append(ring)
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", tuple(normalized))

    def rings(self) -> list[np.ndarray]:
        return [self.exterior, *self.holes]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Polygon)
            and np.array_equal(self.exterior, other.exterior)
            and len(self.holes) == len(other.holes)
            and all(np.array_equal(a, b) for a, b in zip(self.holes, other.holes))
        )


@dataclass(frozen=True)
class MultiPolygon:
    parts: tuple

    def __post_init__(self) -> None:
        parts = tuple(self.parts)
        if not parts:
            raise GeometryError("MultiPolygon needs >= 1 part")
        if not all(isinstance(p, Polygon) for p in parts):
            raise GeometryError("MultiPolygon parts must be Polygons")
        object.__setattr__(self, "parts", parts)

    def rings(self) -> list[np.ndarray]:
        return [r for p in self.parts for r in p.rings()]


Geometry = Union[Point, LineString, Polygon, MultiPolygon]
AnyPolygon = Union[Polygon, MultiPolygon]


def polygon_parts(poly: AnyPolygon) -> tuple:
    return poly.parts if isinstance(poly, MultiPolygon) else (poly,)


def line_length_km(line: LineString) -> float:
    """Euclidean length of the polyline, meters in -> kilometers out."""
    seg = np.diff(line.coords, axis=0)
    return float(np.sum(np.hypot(seg[:, 0], seg[:, 1]))) / 1000.0


def polygon_area_km2(poly: AnyPolygon) -> float:
    """Exterior areas minus holes, summed over parts, in square kilometers."""
    total = 0.0
    for part in polygon_parts(poly):
        total += ring_signed_area(part.exterior)
        total += sum(ring_signed_area(h) for h in part.holes)  # holes are CW: negative
    return total / 1e6


def bounds(geom: Geometry) -> tuple[float, float, float, float]:
    """(minx, miny, maxx, maxy) of any geometry."""
    if isinstance(geom, Point):
        return (geom.x, geom.y, geom.x, geom.y)
    if isinstance(geom, LineString):
        arr = geom.coords
    elif isinstance(geom, Polygon):
        arr = geom.exterior
    else:
        boxes = [bounds(p) for p in geom.parts]
        b = np.array(boxes)
        return (float(b[:, 0].min()), float(b[:, 1].min()),
                float(b[:, 2].max()), float(b[:, 3].max()))
    return (float(arr[:, 0].min()), float(arr[:, 1].min()),
            float(arr[:, 0].max()), float(arr[:, 1].max()))


def translate(geom: Geometry, dx: float, dy: float) -> Geometry:
    off = np.array([dx, dy])
    if isinstance(geom, Point):
        return Point(geom.x + dx, geom.y + dy)
    if isinstance(geom, LineString):
        return LineString(geom.coords + off)
    if isinstance(geom, Polygon):
        return Polygon(geom.exterior + off, tuple(h + off for h in geom.holes))
    return MultiPolygon(tuple(translate(p, dx, dy) for p in geom.parts))


EARTH_RADIUS_M = 6_371_008.8


def lonlat_to_planar(
    coords: Sequence[Sequence[float]] | Iterable, origin: tuple[float, float]
) -> np.ndarray:
    """Project lon/lat degrees to local planar meters around ``origin``.

    Equirectangular approximation centered at the origin latitude; adequate
    for extents up to a few hundred km (distance error well under 0.5%).
    Not a substitute for a real projection on continental extents.
    """
    arr = np.asarray(coords, dtype=np.float64)
    lon0, lat0 = origin
    rad = np.pi / 180.0
    x = (arr[:, 0] - lon0) * rad * EARTH_RADIUS_M * np.cos(lat0 * rad)
    y = (arr[:, 1] - lat0) * rad * EARTH_RADIUS_M
    return np.column_stack([x, y])
