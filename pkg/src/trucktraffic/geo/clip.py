"""Line-to-polygon clipping with even-odd classification.

Boundary ties resolve toward inclusion, so a run of the line that is collinear
with a polygon edge counts as inside.
"""

from __future__ import annotations

import numpy as np

from .primitives import AnyPolygon, LineString, bounds, polygon_parts

#: Points within this distance (meters) of a ring edge count as "on boundary".
BOUNDARY_TOL = 1e-9
_PARAM_TOL = 1e-12


def _ring_edges(poly: AnyPolygon) -> tuple[np.ndarray, np.ndarray]:
    a, b = [], []
    for part in polygon_parts(poly):
        for ring in part.rings():
            a.append(ring[:-1])
            b.append(ring[1:])
    return np.vstack(a), np.vstack(b)


def point_on_boundary(x: float, y: float, edges: tuple[np.ndarray, np.ndarray],
                      tol: float = BOUNDARY_TOL) -> bool:
    a, b = edges
    d = b - a
    ap = np.array([x, y]) - a
    seg_len2 = d[:, 0] ** 2 + d[:, 1] ** 2
    t = np.clip(np.divide(ap[:, 0] * d[:, 0] + ap[:, 1] * d[:, 1],
                          seg_len2, out=np.zeros_like(seg_len2),
                          where=seg_len2 > 0), 0.0, 1.0)
    close = a + t[:, None] * d
    dist2 = (close[:, 0] - x) ** 2 + (close[:, 1] - y) ** 2
    return bool((dist2 <= tol * tol).any())


def _even_odd(x: float, y: float, edges: tuple[np.ndarray, np.ndarray]) -> bool:
    a, b = edges
    ay, by = a[:, 1], b[:, 1]
    straddle = (ay > y) != (by > y)
    if not straddle.any():
        return False
    ax, bx = a[straddle, 0], b[straddle, 0]
    ay, by = a[straddle, 1], b[straddle, 1]
    xi = ax + (bx - ax) * (y - ay) / (by - ay)
    return bool(np.count_nonzero(xi > x) % 2 == 1)


def point_in_polygon(x: float, y: float, poly: AnyPolygon,
                     edges: tuple[np.ndarray, np.ndarray] | None = None) -> bool:
    """Even-odd containment over all rings; boundary points count as inside."""
    if edges is None:
        edges = _ring_edges(poly)
    if point_on_boundary(x, y, edges):
        return True
    return _even_odd(x, y, edges)


def _segment_cuts(p: np.ndarray, q: np.ndarray,
                  edges: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Parameters t in [0, 1] where segment p->q meets any ring edge."""
    a, b = edges
    d = q - p
    e = b - a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    ap = a - p
    cuts = []
    crossing = np.abs(denom) > _PARAM_TOL
    if crossing.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ap[:, 0] * e[:, 1] - ap[:, 1] * e[:, 0]) / denom
            u = (ap[:, 0] * d[1] - ap[:, 1] * d[0]) / denom
        ok = crossing & (t >= -_PARAM_TOL) & (t <= 1 + _PARAM_TOL) \
            & (u >= -_PARAM_TOL) & (u <= 1 + _PARAM_TOL)
        if ok.any():
            cuts.append(np.clip(t[ok], 0.0, 1.0))
    # collinear overlaps: project edge endpoints onto the segment
    parallel = ~crossing
    if parallel.any():
        cr = ap[parallel, 0] * d[1] - ap[parallel, 1] * d[0]
        seg_len2 = d[0] ** 2 + d[1] ** 2
        coll = np.abs(cr) <= BOUNDARY_TOL * np.sqrt(max(seg_len2, 1e-300))
        if coll.any() and seg_len2 > 0:
            for end in (a[parallel][coll], b[parallel][coll]):
                t = ((end[:, 0] - p[0]) * d[0] + (end[:, 1] - p[1]) * d[1]) / seg_len2
                inside = (t > _PARAM_TOL) & (t < 1 - _PARAM_TOL)
                if inside.any():
                    cuts.append(t[inside])
    if not cuts:
        return np.empty(0)
    return np.concatenate(cuts)


def clip_line_to_polygon(line: LineString, poly: AnyPolygon) -> list[LineString]:
    """Portions of ``line`` inside ``poly`` (empty list when there is no
    overlap). Total returned length never exceeds the input length."""
    edges = _ring_edges(poly)
    pminx, pminy, pmaxx, pmaxy = bounds(poly)
    coords = line.coords
    pieces: list[np.ndarray] = []
    run: list[np.ndarray] = []

    def flush() -> None:
        if len(run) >= 2:
            arr = np.vstack(run)
            if np.abs(np.diff(arr, axis=0)).max() > BOUNDARY_TOL:
                pieces.append(arr)
        run.clear()

    for i in range(len(coords) - 1):
        p, q = coords[i], coords[i + 1]
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        if (lo[0] > pmaxx + BOUNDARY_TOL or hi[0] < pminx - BOUNDARY_TOL
                or lo[1] > pmaxy + BOUNDARY_TOL or hi[1] < pminy - BOUNDARY_TOL):
            flush()
            continue
        ts = np.unique(np.concatenate([[0.0, 1.0], _segment_cuts(p, q, edges)]))
        ts = ts[np.concatenate([[True], np.diff(ts) > _PARAM_TOL])]
        for t0, t1 in zip(ts[:-1], ts[1:]):
            tm = (t0 + t1) / 2.0
            mid = p + tm * (q - p)
            if point_in_polygon(float(mid[0]), float(mid[1]), poly, edges):
                start = p + t0 * (q - p)
                end = p + t1 * (q - p)
                if run and np.abs(run[-1] - start).max() <= BOUNDARY_TOL:
                    run.append(end)
                else:
                    flush()
                    run.extend([start, end])
            else:
                flush()
    flush()
    return [LineString(arr) for arr in pieces]
