"""Outward polygon offsetting (Minkowski sum with a disc).

Each ring edge is translated outward by the offset distance and consecutive
offset edges are joined with circular arcs (approximated by chords, a fixed
number per quarter turn) centered on the shared vertex, swept by the signed
turn angle. For non-convex rings that raw curve self-intersects; the offset
region is recovered as the set of points with winding number >= 1, and its
boundary is extracted from the arrangement of the split curve segments.
"""

from __future__ import annotations

import math

import numpy as np

from .primitives import AnyPolygon, MultiPolygon, Polygon, polygon_parts, ring_signed_area

_PARAM_TOL = 1e-9


def _offset_ring(ring: np.ndarray, d: float, arc_segments: int) -> np.ndarray:
    """Raw offset curve of one closed ring (interior on the left of travel)."""
    pts = ring[:-1]
    n = len(pts)
    dirs = np.roll(pts, -1, axis=0) - pts
    lens = np.hypot(dirs[:, 0], dirs[:, 1])
    units = dirs / lens[:, None]
    normals = np.column_stack([units[:, 1], -units[:, 0]])  # right of travel
    out: list[np.ndarray] = []
    for i in range(n):
        j = (i + 1) % n
        v1 = pts[j]
        out.append(pts[i] + d * normals[i])
        out.append(v1 + d * normals[i])
        n0, n1 = normals[i], normals[j]
        sweep = math.atan2(
            n0[0] * n1[1] - n0[1] * n1[0], n0[0] * n1[0] + n0[1] * n1[1]
        )
        if abs(sweep) > 1e-12:
            steps = max(1, math.ceil(abs(sweep) / (math.pi / 2) * arc_segments))
            ang0 = math.atan2(n0[1], n0[0])
            ks = np.arange(1, steps)
            angs = ang0 + sweep * ks / steps
            out.append(v1 + d * np.column_stack([np.cos(angs), np.sin(angs)]))
    curve = np.vstack([np.atleast_2d(p) for p in out])
    keep = np.ones(len(curve), dtype=bool)
    keep[1:] = np.abs(np.diff(curve, axis=0)).max(axis=1) > 1e-12
    curve = curve[keep]
    if np.abs(curve[0] - curve[-1]).max() > 1e-12:
        curve = np.vstack([curve, curve[:1]])
    else:
        curve = np.vstack([curve[:-1], curve[:1]])
    return curve


def _curve_segments(curves: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    a = np.vstack([c[:-1] for c in curves])
    b = np.vstack([c[1:] for c in curves])
    return a, b


def _pairwise_cuts(a: np.ndarray, b: np.ndarray) -> list[list[float]]:
    """Interior intersection parameters per directed segment, O(S^2) sweep."""
    S = len(a)
    cuts: list[list[float]] = [[] for _ in range(S)]
    d = b - a
    for i in range(S - 1):
        di = d[i]
        ao = a[i + 1:]
        do = d[i + 1:]
        denom = di[0] * do[:, 1] - di[1] * do[:, 0]
        ap = ao - a[i]
        cross_ok = np.abs(denom) > 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ap[:, 0] * do[:, 1] - ap[:, 1] * do[:, 0]) / denom
            u = (ap[:, 0] * di[1] - ap[:, 1] * di[0]) / denom
        hit = cross_ok & (t > -_PARAM_TOL) & (t < 1 + _PARAM_TOL) \
            & (u > -_PARAM_TOL) & (u < 1 + _PARAM_TOL)
        idx = np.flatnonzero(hit)
        for k in idx:
            ti, uj = float(t[k]), float(u[k])
            if _PARAM_TOL < ti < 1 - _PARAM_TOL:
                cuts[i].append(ti)
            if _PARAM_TOL < uj < 1 - _PARAM_TOL:
                cuts[i + 1 + k].append(uj)
    return cuts


class _SnapIndex:
    """Merges points within ``tol`` so arrangement vertices match exactly."""

    def __init__(self, tol: float):
        self.tol = tol
        self._grid: dict[tuple[int, int], int] = {}
        self.points: list[tuple[float, float]] = []

    def key(self, x: float, y: float) -> int:
        gx, gy = round(x / self.tol), round(y / self.tol)
        for dx in (0, -1, 1):
            for dy in (0, -1, 1):
                pid = self._grid.get((gx + dx, gy + dy))
                if pid is not None:
                    px, py = self.points[pid]
                    if abs(px - x) <= self.tol and abs(py - y) <= self.tol:
                        return pid
        pid = len(self.points)
        self.points.append((x, y))
        self._grid[(gx, gy)] = pid
        return pid


def _winding(px: np.ndarray, py: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Winding number of the full raw curve set at each query point."""
    ax, ay = a[:, 0][None, :], a[:, 1][None, :]
    bx, by = b[:, 0][None, :], b[:, 1][None, :]
    qx, qy = px[:, None], py[:, None]
    cross = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
    up = (ay <= qy) & (by > qy) & (cross > 0)
    dn = (by <= qy) & (ay > qy) & (cross < 0)
    return (up.sum(axis=1) - dn.sum(axis=1)).astype(np.int64)


def _extract_region(curves: list[np.ndarray], d: float) -> list[np.ndarray]:
    """Boundary rings of the winding >= 1 region of the raw offset curves."""
    a, b = _curve_segments(curves)
    cuts = _pairwise_cuts(a, b)
    snap = max(1e-12, min(1e-9, d * 1e-6))
    if not any(cuts):
        return [c for c in curves]

    pieces_a, pieces_b = [], []
    for i in range(len(a)):
        ts = np.unique(np.concatenate([[0.0, 1.0], np.asarray(cuts[i])]))
        ts = ts[np.concatenate([[True], np.diff(ts) > _PARAM_TOL])]
        pts = a[i] + ts[:, None] * (b[i] - a[i])
        pieces_a.append(pts[:-1])
        pieces_b.append(pts[1:])
    ea = np.vstack(pieces_a)
    eb = np.vstack(pieces_b)
    seg = eb - ea
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    ok = seg_len > snap
    ea, eb, seg, seg_len = ea[ok], eb[ok], seg[ok], seg_len[ok]

    mid = (ea + eb) / 2.0
    nx = seg[:, 1] / seg_len
    ny = -seg[:, 0] / seg_len
    eps = np.minimum(seg_len / 4.0, d * 1e-4)
    wl = _winding(mid[:, 0] - nx * eps, mid[:, 1] - ny * eps, a, b)  # left side
    wr = _winding(mid[:, 0] + nx * eps, mid[:, 1] + ny * eps, a, b)  # right side
    keep = (wl >= 1) & (wr < 1)
    ea, eb = ea[keep], eb[keep]

    idx = _SnapIndex(snap)
    starts = [idx.key(float(x), float(y)) for x, y in ea]
    ends = [idx.key(float(x), float(y)) for x, y in eb]
    out_edges: dict[int, list[int]] = {}
    for e, s in enumerate(starts):
        out_edges.setdefault(s, []).append(e)

    used = np.zeros(len(ea), dtype=bool)
    rings: list[np.ndarray] = []
    for e0 in range(len(ea)):
        if used[e0] or starts[e0] == ends[e0]:
            continue
        chain = [e0]
        used[e0] = True
        guard = 0
        while ends[chain[-1]] != starts[chain[0]]:
            guard += 1
            if guard > len(ea) + 1:
                chain = []
                break
            at = ends[chain[-1]]
            cands = [e for e in out_edges.get(at, []) if not used[e]]
            if not cands:
                chain = []
                break
            if len(cands) == 1:
                nxt = cands[0]
            else:
                # tangential pinch: take the sharpest left turn to keep the
                # region on the left of the walk
                din = eb[chain[-1]] - ea[chain[-1]]
                ang_in = math.atan2(din[1], din[0])
                def turn(e: int) -> float:
                    dv = eb[e] - ea[e]
                    t = math.atan2(dv[1], dv[0]) - ang_in
                    while t <= -math.pi:
                        t += 2 * math.pi
                    while t > math.pi:
                        t -= 2 * math.pi
                    return t
                nxt = max(cands, key=turn)
            chain.append(nxt)
            used[nxt] = True
        if chain:
            ring = np.vstack([ea[chain], ea[chain[0]:chain[0] + 1]])
            if abs(ring_signed_area(ring)) > max(1e-12, (snap * 10) ** 2):
                rings.append(ring)
    return rings


def _assemble(rings: list[np.ndarray]) -> AnyPolygon:
    exts = [(abs(ring_signed_area(r)), r) for r in rings if ring_signed_area(r) > 0]
    holes = [r for r in rings if ring_signed_area(r) < 0]
    exts.sort(key=lambda t: t[0])
    if not exts:
        raise ValueError("offset produced no exterior ring")
    assigned: list[list[np.ndarray]] = [[] for _ in exts]
    for h in holes:
        hx, hy = h[0]
        for i, (_, ext) in enumerate(exts):  # smallest containing exterior wins
            if _point_in_ring(hx, hy, ext):
                assigned[i].append(h)
                break
    parts = [Polygon(ext, tuple(hs)) for (_, ext), hs in zip(exts, assigned)]
    return parts[0] if len(parts) == 1 else MultiPolygon(tuple(parts))


def _point_in_ring(x: float, y: float, ring: np.ndarray) -> bool:
    a, b = ring[:-1], ring[1:]
    straddle = (a[:, 1] > y) != (b[:, 1] > y)
    if not straddle.any():
        return False
    ax, ay = a[straddle, 0], a[straddle, 1]
    bx, by = b[straddle, 0], b[straddle, 1]
    xi = ax + (bx - ax) * (y - ay) / (by - ay)
    return bool(np.count_nonzero(xi > x) % 2 == 1)


def buffer(poly: AnyPolygon, distance_m: float, arc_segments: int = 16) -> AnyPolygon:
    """Outward offset of ``poly`` by ``distance_m`` meters.

    Arcs use ``arc_segments`` chords per quarter circle; the chords are
    inscribed, so the area slightly underestimates the true offset (about
    0.16% of the disc term at 16 segments). The result always contains the
    input.
    """
    if distance_m <= 0:
        raise ValueError("buffer distance must be positive")
    if arc_segments < 4:
        raise ValueError("arc_segments must be >= 4")
    curves: list[np.ndarray] = []
    for part in polygon_parts(poly):
        curves.append(_offset_ring(part.exterior, distance_m, arc_segments))
        for hole in part.holes:
            # holes whose smallest bbox dimension is within 2d vanish entirely
            w = hole[:, 0].max() - hole[:, 0].min()
            h = hole[:, 1].max() - hole[:, 1].min()
            if min(w, h) <= 2 * distance_m:
                continue
            curves.append(_offset_ring(hole, distance_m, arc_segments))
    rings = _extract_region(curves, distance_m)
    return _assemble(rings)
