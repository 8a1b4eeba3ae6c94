"""WKT text <-> geometry (POINT, LINESTRING, POLYGON, MULTIPOLYGON only)."""

from __future__ import annotations

import numpy as np

from .primitives import Geometry, GeometryError, LineString, MultiPolygon, Point, Polygon


class WktError(ValueError):
    """Syntax or semantic error; ``offset`` is the byte position in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise WktError(f"expected '{ch}'", self.pos)
        self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        if self.pos == start:
            raise WktError("expected geometry type", start)
        return self.text[start:self.pos].upper()

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in "+-.0123456789eE":
            self.pos += 1
        if self.pos == start:
            raise WktError("expected a number", start)
        try:
            return float(self.text[start:self.pos])
        except ValueError:
            raise WktError("malformed number", start) from None

    def done(self) -> None:
        self.skip_ws()
        if self.pos != len(self.text):
            raise WktError("trailing characters", self.pos)


def _coord_list(sc: _Scanner) -> np.ndarray:
    sc.expect("(")
    pts = []
    while True:
        x = sc.number()
        y = sc.number()
        pts.append((x, y))
        ch = sc.peek()
        if ch == ",":
            sc.pos += 1
            continue
        break
    sc.expect(")")
    return np.array(pts, dtype=np.float64)


def _ring_list(sc: _Scanner) -> list[np.ndarray]:
    sc.expect("(")
    rings = [_coord_list(sc)]
    while sc.peek() == ",":
        sc.pos += 1
        rings.append(_coord_list(sc))
    sc.expect(")")
    return rings


def parse_wkt(text: str) -> Geometry:
    """Parse a WKT string; raises WktError with the byte offset on bad syntax."""
    sc = _Scanner(text)
    kind = sc.word()
    try:
        if kind == "POINT":
            arr = _coord_list(sc)
            if len(arr) != 1:
                raise WktError("POINT takes exactly one coordinate", sc.pos)
            geom: Geometry = Point(float(arr[0, 0]), float(arr[0, 1]))
        elif kind == "LINESTRING":
            geom = LineString(_coord_list(sc))
        elif kind == "POLYGON":
            rings = _ring_list(sc)
            geom = Polygon(rings[0], tuple(rings[1:]))
        elif kind == "MULTIPOLYGON":
            sc.expect("(")
            parts = [_poly_from_rings(_ring_list(sc), sc)]
            while sc.peek() == ",":
                sc.pos += 1
                parts.append(_poly_from_rings(_ring_list(sc), sc))
            sc.expect(")")
            geom = MultiPolygon(tuple(parts))
        else:
            raise WktError(f"unsupported geometry type '{kind}'", 0)
    except GeometryError as exc:
        raise WktError(str(exc), sc.pos) from exc
    sc.done()
    return geom


def _poly_from_rings(rings: list[np.ndarray], sc: _Scanner) -> Polygon:
    try:
        return Polygon(rings[0], tuple(rings[1:]))
    except GeometryError as exc:
        raise WktError(str(exc), sc.pos) from exc


def _fmt(arr: np.ndarray) -> str:
    return ", ".join(f"{float(x)!r} {float(y)!r}" for x, y in arr)


def to_wkt(geom: Geometry) -> str:
    """Inverse of parse_wkt; coordinates render via repr so the round trip is
    lossless."""
    if isinstance(geom, Point):
        return f"POINT ({float(geom.x)!r} {float(geom.y)!r})"
    if isinstance(geom, LineString):
        return f"LINESTRING ({_fmt(geom.coords)})"
    if isinstance(geom, Polygon):
        rings = ", ".join(f"({_fmt(r)})" for r in geom.rings())
        return f"POLYGON ({rings})"
    if isinstance(geom, MultiPolygon):
        parts = ", ".join(
            "(" + ", ".join(f"({_fmt(r)})" for r in p.rings()) + ")" for p in geom.parts
        )
        return f"MULTIPOLYGON ({parts})"
    raise TypeError(f"cannot serialize {type(geom).__name__}")
