import numpy as np
import pytest

from trucktraffic.geo import (
    LineString,
    clip_line_to_polygon,
    line_length_km,
    lonlat_to_planar,
    parse_wkt,
    point_in_polygon,
    polygon_area_km2,
    translate,
)

SQUARE = parse_wkt("POLYGON((0 0,1000 0,1000 1000,0 1000,0 0))")


class TestLengthArea:
    def test_two_segment_length(self):
        g = parse_wkt("LINESTRING(0 0,1000 0,1000 1000)")
        assert line_length_km(g) == pytest.approx(2.0, rel=1e-12)

    def test_square_with_hole(self):
        g = parse_wkt(
            "POLYGON((0 0,1000 0,1000 1000,0 1000,0 0),"
            "(250 250,750 250,750 750,250 750,250 250))")
        assert polygon_area_km2(g) == pytest.approx(0.75, rel=1e-12)

    def test_disjoint_multipolygon_sums(self):
        g = parse_wkt(
            "MULTIPOLYGON(((0 0,1000 0,1000 1000,0 1000,0 0)),"
            "((5000 0,6000 0,6000 1000,5000 1000,5000 0)))")
        assert polygon_area_km2(g) == pytest.approx(2.0, rel=1e-12)


class TestClip:
    def test_axis_crossing_chord(self):
        line = parse_wkt("LINESTRING(-1000 500,2000 500)")
        pieces = clip_line_to_polygon(line, SQUARE)
        assert len(pieces) == 1
        assert line_length_km(pieces[0]) == pytest.approx(1.0, rel=1e-12)

    def test_fully_inside_returned_unchanged(self):
        line = parse_wkt("LINESTRING(100 100,900 900)")
        pieces = clip_line_to_polygon(line, SQUARE)
        assert len(pieces) == 1
        assert np.allclose(pieces[0].coords, line.coords)

    def test_fully_outside_empty(self):
        line = parse_wkt("LINESTRING(2000 2000,3000 3000)")
        assert clip_line_to_polygon(line, SQUARE) == []

    def test_collinear_boundary_run_counts_inside(self):
        line = parse_wkt("LINESTRING(-500 0,1500 0)")  # along the bottom edge
        pieces = clip_line_to_polygon(line, SQUARE)
        assert sum(line_length_km(p) for p in pieces) == pytest.approx(1.0, rel=1e-9)

    def test_multiple_crossings(self):
        g = parse_wkt(
            "POLYGON((0 0,1000 0,1000 1000,0 1000,0 0),"
            "(400 -1,600 -1,600 1001,400 1001,400 -1))")
        # horizontal line crosses the vertical slot: two pieces of 400 m
        line = parse_wkt("LINESTRING(-100 500,1100 500)")
        pieces = clip_line_to_polygon(line, g)
        lengths = sorted(round(line_length_km(p), 9) for p in pieces)
        assert lengths == [0.4, 0.4]

    def test_returned_length_never_exceeds_input(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            coords = rng.uniform(-1500, 2500, size=(4, 2))
            try:
                line = LineString(coords)
            except Exception:
                continue
            pieces = clip_line_to_polygon(line, SQUARE)
            total = sum(line_length_km(p) for p in pieces)
            assert total <= line_length_km(line) * (1 + 1e-9)

    def test_inside_plus_outside_equals_total(self):
        rng = np.random.default_rng(6)
        for _ in range(60):
            a = rng.uniform(-500, 1500, 2)
            b = rng.uniform(-500, 1500, 2)
            if np.hypot(*(a - b)) < 1e-3:
                continue
            line = LineString(np.vstack([a, b]))
            inside = sum(line_length_km(p)
                         for p in clip_line_to_polygon(line, SQUARE))
            total = line_length_km(line)
            # outside length = total - inside; must be within [0, total]
            assert -1e-9 * total <= total - inside <= total * (1 + 1e-9)
            # crosscheck inside length against dense sampling
            ts = np.linspace(0, 1, 2001)
            pts = a[None, :] + ts[:, None] * (b - a)[None, :]
            frac = np.mean([(0 <= x <= 1000) and (0 <= y <= 1000) for x, y in pts])
            assert inside == pytest.approx(total * frac, abs=total * 2e-3 + 1e-9)


class TestPointInPolygon:
    def test_boundary_counts_inside(self):
        assert point_in_polygon(0.0, 500.0, SQUARE)
        assert point_in_polygon(1000.0, 1000.0, SQUARE)

    def test_hole_excluded(self):
        g = parse_wkt(
            "POLYGON((0 0,1000 0,1000 1000,0 1000,0 0),"
            "(250 250,750 250,750 750,250 750,250 250))")
        assert not point_in_polygon(500.0, 500.0, g)
        assert point_in_polygon(100.0, 100.0, g)


def test_translate_preserves_shape():
    moved = translate(SQUARE, 5000.0, -3000.0)
    assert polygon_area_km2(moved) == pytest.approx(polygon_area_km2(SQUARE),
                                                    rel=1e-12)


def test_lonlat_helper_scale():
    # one degree of longitude at the equator is about 111.2 km
    pts = lonlat_to_planar([[1.0, 0.0], [0.0, 0.0]], origin=(0.0, 0.0))
    assert np.hypot(*(pts[0] - pts[1])) == pytest.approx(111_195, rel=1e-3)
