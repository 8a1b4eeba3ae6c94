import numpy as np
import pytest

from trucktraffic.core import CensusBlock, Provenance, VehicleClass
from trucktraffic.density import BlockDensity, compute_density, write_density
from trucktraffic.geo import (
    Polygon,
    buffer,
    clip_line_to_polygon,
    line_length_km,
    translate,
)

from conftest import make_link


def block(geoid="100010000000001", x0=0.0, y0=0.0, size=1000.0):
    ring = np.array([[x0, y0], [x0 + size, y0], [x0 + size, y0 + size],
                     [x0, y0 + size], [x0, y0]])
    return CensusBlock(geoid=geoid, geometry=Polygon(ring))


def road(link_id, coords, total, mdv, hdv, fc=3):
    from trucktraffic.geo import LineString, line_length_km
    from trucktraffic.core import RoadLink

    geom = LineString(np.array(coords, dtype=float))
    ldv = total - mdv - hdv
    return RoadLink(
        link_id=link_id, state_fips="50", county_fips="50001",
        functional_class=fc, urban_code=0, through_lanes=2, geometry=geom,
        length_km=line_length_km(geom), aadt_total=total, aadt_mdv=mdv,
        aadt_hdv=hdv, aadt_ldv=ldv,
        mdv_provenance=Provenance.OBSERVED, hdv_provenance=Provenance.OBSERVED,
        ldv_provenance=Provenance.DERIVED)


class TestFixtures:
    def test_single_segment_fully_inside(self):
        # 1 km^2 block, 1.0 km segment inside, AADT total 500 / mdv 50 / hdv 50
        links = [road("r1", [[0, 500], [1000, 500]], 500.0, 50.0, 50.0)]
        results, report = compute_density([block()], links)
        d = results[0]
        assert d.density[VehicleClass.TOTAL] == pytest.approx(500.0, rel=1e-6)
        assert d.density[VehicleClass.MDV] == pytest.approx(50.0, rel=1e-6)
        assert d.density[VehicleClass.HDV] == pytest.approx(50.0, rel=1e-6)
        assert d.density[VehicleClass.LDV] == pytest.approx(400.0, rel=1e-6)
        assert d.contributing_links == 1

    def test_no_roads_within_buffer(self):
        links = [road("far", [[9000, 9000], [9500, 9000]], 100.0, 10.0, 10.0)]
        results, _ = compute_density([block()], links)
        d = results[0]
        assert all(v == 0.0 for v in d.density.values())
        assert d.contributing_links == 0

    def test_crossing_chord_clipped_to_1500m(self):
        # road y=500 from x=-2000 to 2000 crosses the buffered square:
        # chord spans [-250, 1250] -> 1.5 km -> VKT 150 -> density 150
        links = [road("chord", [[-2000, 500], [2000, 500]], 100.0, 0.0, 0.0)]
        results, _ = compute_density([block()], links, buffer_m=250.0)
        d = results[0]
        assert d.vkt[VehicleClass.TOTAL] == pytest.approx(150.0, rel=1e-6)
        assert d.density[VehicleClass.TOTAL] == pytest.approx(150.0, rel=1e-6)

    def test_zero_area_block_reported_not_emitted(self):
        links = [road("r1", [[0, 500], [1000, 500]], 500.0, 50.0, 50.0)]
        bad = CensusBlock.__new__(CensusBlock)
        object.__setattr__(bad, "geoid", "Z" * 15)
        object.__setattr__(bad, "geometry", block().geometry)
        object.__setattr__(bad, "area_km2", 0.0)
        results, report = compute_density([bad, block()], links)
        assert len(results) == 1
        assert report.zero_area_blocks == ["Z" * 15]


class TestProperties:
    def test_buffer_monotonicity_of_exposure(self):
        links = [road("chord", [[-2000, 500], [2000, 500]], 100.0, 5.0, 5.0),
                 road("edge", [[-500, -100], [1500, -100]], 300.0, 10.0, 10.0)]
        blocks = [block()]
        d250, _ = compute_density(blocks, links, buffer_m=250.0)
        d300, _ = compute_density(blocks, links, buffer_m=300.0)
        for c in VehicleClass:
            assert d300[0].density[c] >= d250[0].density[c] - 1e-12

    def test_translation_invariance(self):
        links = [road("a", [[-300, 320], [1800, 700]], 450.0, 30.0, 20.0),
                 road("b", [[200, 200], [900, 950]], 120.0, 4.0, 2.0)]
        blocks = [block()]
        base, _ = compute_density(blocks, links)
        dx, dy = 12_345.0, -9_876.0
        from dataclasses import replace

        moved_links = []
        for l in links:
            geom = translate(l.geometry, dx, dy)
            moved_links.append(replace(l, geometry=geom,
                                       length_km=line_length_km(geom)))
        moved_block = CensusBlock(
            geoid=blocks[0].geoid,
            geometry=translate(blocks[0].geometry, dx, dy))
        moved, _ = compute_density([moved_block], moved_links)
        for c in VehicleClass:
            assert moved[0].density[c] == pytest.approx(
                base[0].density[c], rel=1e-9, abs=1e-12)

    def test_class_additivity_on_outputs(self, mixed_corpus):
        from trucktraffic.core import Hyperparameters
        from trucktraffic.impute import run_imputation

        links, blocks, _ = mixed_corpus
        result = run_imputation(links[:400], Hyperparameters(n_estimators=6),
                                Hyperparameters(n_estimators=6), seed=0)
        densities, _ = compute_density(blocks[:20], result.links)
        for d in densities:
            total = (d.density[VehicleClass.LDV] + d.density[VehicleClass.MDV]
                     + d.density[VehicleClass.HDV])
            assert total == pytest.approx(d.density[VehicleClass.TOTAL],
                                          rel=1e-6, abs=1e-12)
            for c in VehicleClass:
                assert d.density[c] == d.vkt[c] / d.area_km2

    def test_links_shared_between_adjacent_blocks(self):
        links = [road("shared", [[900, 500], [1100, 500]], 100.0, 10.0, 10.0)]
        b1 = block("B1", 0.0, 0.0)
        b2 = block("B2", 1000.0, 0.0)
        results, _ = compute_density([b1, b2], links)
        # the same segment contributes fully to both buffers
        for d in results:
            assert d.vkt[VehicleClass.TOTAL] == pytest.approx(
                100.0 * 0.2, rel=1e-6)

    def test_unimputed_and_class7_links_skipped(self):
        incomplete = make_link("nofill", total=100.0)  # no class values
        seven = road("seven", [[0, 500], [1000, 500]], 100.0, 5.0, 5.0, fc=7)
        results, report = compute_density([block()],
                                          [incomplete, seven])
        assert report.links_skipped == 2 and report.links_usable == 0
        assert results[0].contributing_links == 0

    def test_index_path_equals_bruteforce_bit_for_bit(self, mixed_corpus):
        from trucktraffic.core import Hyperparameters
        from trucktraffic.impute import run_imputation

        links, blocks, _ = mixed_corpus
        result = run_imputation(links[:250], Hyperparameters(n_estimators=5),
                                Hyperparameters(n_estimators=5), seed=1)
        use_blocks = blocks[:12]
        fast, _ = compute_density(use_blocks, result.links)
        slow = _brute_force_density(use_blocks, result.links)
        assert len(fast) == len(slow)
        for a, b in zip(fast, slow):
            assert a.geoid == b.geoid
            for c in VehicleClass:
                assert a.vkt[c] == b.vkt[c]  # bit-equal
                assert a.density[c] == b.density[c]
            assert a.contributing_links == b.contributing_links


def _brute_force_density(blocks, links, buffer_m=250.0, arc_segments=16):
    """All-pairs oracle: no spatial index, same accumulation order."""
    usable = [l for l in links
              if l.functional_class <= 6 and l.aadt_ldv is not None
              and l.aadt_mdv is not None and l.aadt_hdv is not None]
    out = []
    for blk in blocks:
        zone = buffer(blk.geometry, buffer_m, arc_segments)
        vkt = {c: 0.0 for c in VehicleClass}
        contributing = 0
        for link in usable:
            pieces = clip_line_to_polygon(link.geometry, zone)
            if not pieces:
                continue
            km = sum(line_length_km(p) for p in pieces)
            if km <= 0:
                continue
            contributing += 1
            vkt[VehicleClass.TOTAL] += link.aadt_total * km
            vkt[VehicleClass.LDV] += link.aadt_ldv * km
            vkt[VehicleClass.MDV] += link.aadt_mdv * km
            vkt[VehicleClass.HDV] += link.aadt_hdv * km
        out.append(BlockDensity(
            geoid=blk.geoid, area_km2=blk.area_km2, vkt=vkt,
            density={c: vkt[c] / blk.area_km2 for c in VehicleClass},
            contributing_links=contributing))
    return out


class TestWriteDensity:
    def test_empty_results_header_only(self, tmp_path):
        path = tmp_path / "density.csv"
        write_density([], path)
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert len(lines) == 1 and lines[0].startswith("geoid,")

    def test_two_blocks_sorted_by_geoid(self, tmp_path):
        links = [road("r", [[0, 500], [1000, 500]], 100.0, 5.0, 5.0)]
        b_hi = block("B2", 0, 0)
        b_lo = block("B1", 0, 0)
        results, _ = compute_density([b_hi, b_lo], links)
        path = tmp_path / "density.csv"
        write_density(results, path)
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert [l.split(",")[0] for l in lines[1:]] == ["B1", "B2"]

    def test_rerun_byte_identical(self, tmp_path):
        links = [road("r", [[-500, 300], [1500, 800]], 123.4, 7.5, 3.25)]
        results, _ = compute_density([block()], links)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_density(results, p1)
        results2, _ = compute_density([block()], links)
        write_density(results2, p2)
        assert p1.read_bytes() == p2.read_bytes()
