"""File ingestion: link/block parsing, cleaning rules, county attribution, and
urban-rural reclassification.

Parsing and cleaning are separate passes: parse errors are cell-level problems
(bad numbers, malformed WKT, out-of-domain codes) reported per row with line
numbers; cleaning drops are the documented exclusion rules, tallied in a
CleaningReport whose counters always reconcile with the rows read.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .core import CensusBlock, LANE_DEFAULT, Provenance, RoadLink, URBAN_CODES, ValidationError
from .geo import (
    AnyPolygon,
    GeometryError,
    LineString,
    WktError,
    bounds,
    build_index,
    clip_line_to_polygon,
    line_length_km,
    parse_wkt,
)

LINK_COLUMNS = [
    "link_id", "state_fips", "county_fips", "functional_class", "urban_code",
    "through_lanes", "length_km", "aadt_total", "aadt_mdv", "aadt_hdv",
    "geometry_wkt",
]


class IngestError(ValueError):
    """Fatal file-level problem (schema, duplicate keys)."""


@dataclass(frozen=True)
class RowError:
    line_no: int
    message: str


@dataclass
class RawLink:
    """Parsed but not yet cleaned row; optional fields may be missing."""

    line_no: int
    link_id: str
    state_fips: str
    county_fips: str
    functional_class: int
    urban_code: int
    through_lanes: Optional[int]
    length_km: Optional[float]
    aadt_total: Optional[float]
    aadt_mdv: Optional[float]
    aadt_hdv: Optional[float]
    geometry: Optional[LineString]


@dataclass
class CleaningReport:
    rows_read: int = 0
    rows_kept: int = 0
    dropped_missing_total_aadt: int = 0
    dropped_class_exceeds_total: int = 0
    dropped_invalid_geometry: int = 0
    lanes_defaulted: int = 0
    urban_code_changed: int = 0
    dropped_lane_km: float = 0.0
    dropped_share: float = 0.0

    def dropped_total(self) -> int:
        return (self.dropped_missing_total_aadt
                + self.dropped_class_exceeds_total
                + self.dropped_invalid_geometry)

    def reconciles(self) -> bool:
        return self.rows_kept + self.dropped_total() == self.rows_read

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _opt_int(cell: str, name: str, minimum: int) -> Optional[int]:
    if cell == "":
        return None
    try:
        v = int(cell)
    except ValueError:
        raise ValueError(f"{name}: not an integer") from None
    if v < minimum:
        raise ValueError(f"{name}: must be >= {minimum}")
    return v


def _opt_float(cell: str, name: str) -> Optional[float]:
    if cell == "":
        return None
    try:
        v = float(cell)
    except ValueError:
        raise ValueError(f"{name}: not a number") from None
    if v < 0:
        raise ValueError(f"{name}: must be >= 0")
    return v


def parse_links(path: str | Path) -> tuple[list[RawLink], list[RowError]]:
    """Read the links CSV. Unparseable rows become RowErrors with their line
    number, never silent skips; a wrong header is fatal."""
    path = Path(path)
    candidates: list[RawLink] = []
    errors: list[RowError] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, expected header "
                              f"{','.join(LINK_COLUMNS)}") from None
        if header != LINK_COLUMNS:
            raise IngestError(
                f"{path}: header mismatch; expected {','.join(LINK_COLUMNS)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LINK_COLUMNS):
                errors.append(RowError(line_no, f"expected {len(LINK_COLUMNS)} "
                                                f"columns, found {len(row)}"))
                continue
            rec = dict(zip(LINK_COLUMNS, row))
            try:
                candidates.append(_parse_row(line_no, rec, errors))
            except (ValueError, KeyError) as exc:
                errors.append(RowError(line_no, str(exc)))
    return candidates, errors


def _parse_row(line_no: int, rec: dict, errors: list[RowError]) -> RawLink:
    link_id = rec["link_id"].strip()
    if not link_id:
        raise ValueError("link_id: must be nonempty")
    state = rec["state_fips"].strip()
    if not (len(state) == 2 and state.isdigit()):
        raise ValueError("state_fips: must be a 2-digit string")
    county = rec["county_fips"].strip()
    if county and not (len(county) == 5 and county.isdigit()):
        raise ValueError("county_fips: must be a 5-digit string or empty")
    try:
        fc = int(rec["functional_class"])
    except ValueError:
        raise ValueError("functional_class: not an integer") from None
    if fc not in range(1, 8):
        raise ValueError("functional_class: must be in 1..7")
    try:
        uc = int(rec["urban_code"])
    except ValueError:
        raise ValueError("urban_code: not an integer") from None
    if uc not in URBAN_CODES:
        raise ValueError("urban_code: must be one of {0, 1, 2}")
    try:
        lanes = _opt_int(rec["through_lanes"].strip(), "through_lanes", 1)
        length_km = _opt_float(rec["length_km"].strip(), "length_km")
        total = _opt_float(rec["aadt_total"].strip(), "aadt_total")
        mdv = _opt_float(rec["aadt_mdv"].strip(), "aadt_mdv")
        hdv = _opt_float(rec["aadt_hdv"].strip(), "aadt_hdv")
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    geometry: Optional[LineString] = None
    wkt = rec["geometry_wkt"].strip()
    if wkt:
        try:
            geom = parse_wkt(wkt)
            if isinstance(geom, LineString):
                geometry = geom
            else:
                raise ValueError("geometry_wkt: links must be LINESTRING")
        except WktError as exc:
            raise ValueError(f"geometry_wkt: {exc}") from None
        except GeometryError:
            geometry = None  # degenerate geometry: a cleaning drop, not a parse error
    return RawLink(line_no, link_id, state, county, fc, uc, lanes, length_km,
                   total, mdv, hdv, geometry)


def clean_links(candidates: Sequence[RawLink]) -> tuple[list[RoadLink], CleaningReport]:
    """Apply the exclusion rules: drop rows missing total AADT, rows whose
    class AADTs exceed the total, and rows without usable geometry; default
    missing lane counts to two. Drop precedence follows that order, one reason
    per row."""
    report = CleaningReport(rows_read=len(candidates))
    kept: list[RoadLink] = []
    for raw in candidates:
        if raw.aadt_total is None:
            report.dropped_missing_total_aadt += 1
            report.dropped_lane_km += _lane_km(raw)
            continue
        if (raw.aadt_mdv is not None and raw.aadt_hdv is not None
                and raw.aadt_mdv + raw.aadt_hdv > raw.aadt_total * (1 + 1e-12)):
            report.dropped_class_exceeds_total += 1
            report.dropped_lane_km += _lane_km(raw)
            continue
        if raw.geometry is None:
            report.dropped_invalid_geometry += 1
            report.dropped_lane_km += _lane_km(raw)
            continue
        lanes = raw.through_lanes
        if lanes is None:
            lanes = LANE_DEFAULT
            report.lanes_defaulted += 1
        kept.append(RoadLink(
            link_id=raw.link_id,
            state_fips=raw.state_fips,
            county_fips=raw.county_fips,
            functional_class=raw.functional_class,
            urban_code=raw.urban_code,
            through_lanes=lanes,
            geometry=raw.geometry,
            length_km=line_length_km(raw.geometry),
            aadt_total=raw.aadt_total,
            aadt_mdv=raw.aadt_mdv,
            aadt_hdv=raw.aadt_hdv,
            mdv_provenance=None if raw.aadt_mdv is None else Provenance.OBSERVED,
            hdv_provenance=None if raw.aadt_hdv is None else Provenance.OBSERVED,
        ))
    report.rows_kept = len(kept)
    if report.rows_read:
        report.dropped_share = report.dropped_total() / report.rows_read
    return kept, report


def _lane_km(raw: RawLink) -> float:
    lanes = raw.through_lanes if raw.through_lanes is not None else LANE_DEFAULT
    if raw.geometry is not None:
        return lanes * line_length_km(raw.geometry)
    return lanes * (raw.length_km or 0.0)


def _inside_lengths(link: RoadLink, polys: list[tuple[str, AnyPolygon]],
                    index) -> dict[str, float]:
    """Clipped length of the link inside each candidate polygon, by key.
    Per-key contributions are summed in sorted value order so the result is
    independent of polygon input order down to the last bit."""
    parts: dict[str, list[float]] = {}
    for key_i in index.query(bounds(link.geometry)):
        key, poly = polys[key_i]
        pieces = clip_line_to_polygon(link.geometry, poly)
        if pieces:
            parts.setdefault(key, []).append(
                sum(line_length_km(p) for p in pieces))
    return {key: sum(sorted(vals)) for key, vals in parts.items()}


def assign_counties(
    links: Sequence[RoadLink],
    county_polygons: Sequence[tuple[str, AnyPolygon]],
) -> tuple[list[RoadLink], list[str]]:
    """Attribute each link to the county holding the largest share of its
    length (ties to the lexicographically smallest FIPS, so polygon input
    order never matters). Links touching no county keep an empty county code
    and are returned in the unmatched list."""
    polys = list(county_polygons)
    index = build_index([(i, p) for i, (_, p) in enumerate(polys)])
    out: list[RoadLink] = []
    unmatched: list[str] = []
    for link in links:
        shares = _inside_lengths(link, polys, index)
        if not shares:
            unmatched.append(link.link_id)
            out.append(replace(link, county_fips=""))
            continue
        best = min(shares.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        out.append(replace(link, county_fips=best))
    return out, unmatched


def reclassify_urban(
    links: Sequence[RoadLink],
    urban_areas: Sequence[tuple[str, AnyPolygon]],
) -> tuple[list[RoadLink], int]:
    """Set urban_code from the polygons: 1 when at least half the link length
    lies in urban polygons, 2 for small-urban, else 0 (rural). Exact half-half
    ties pick the lexicographically smaller kind."""
    for kind, _ in urban_areas:
        if kind not in ("urban", "small_urban"):
            raise ValueError(f"unknown urban polygon kind {kind!r}")
    polys = list(urban_areas)
    index = build_index([(i, p) for i, (_, p) in enumerate(polys)])
    out: list[RoadLink] = []
    changed = 0
    for link in links:
        shares = _inside_lengths(link, polys, index)
        ulen = shares.get("urban", 0.0)
        slen = shares.get("small_urban", 0.0)
        half = link.length_km / 2.0
        code = 0
        if max(ulen, slen) >= half * (1 - 1e-12) and max(ulen, slen) > 0:
            if slen > ulen or (slen == ulen):
                code = 2  # "small_urban" < "urban" lexicographically
            else:
                code = 1
        if code != link.urban_code:
            changed += 1
            out.append(replace(link, urban_code=code))
        else:
            out.append(link)
    return out, changed


def parse_blocks(path: str | Path) -> tuple[list[CensusBlock], list[RowError]]:
    """Read census blocks from NDJSON ({"geoid", "wkt", "area_km2"?} records)
    or CSV (geoid,wkt[,area_km2]). Duplicate geoids are fatal; rows with bad
    geometry are reported and skipped."""
    path = Path(path)
    blocks: list[CensusBlock] = []
    errors: list[RowError] = []
    seen: set[str] = set()

    def add(line_no: int, geoid: str, wkt: str, area) -> None:
        if geoid in seen:
            raise IngestError(f"{path}: duplicate geoid {geoid!r} at line {line_no}")
        try:
            geom = parse_wkt(wkt)
        except WktError as exc:
            errors.append(RowError(line_no, f"wkt: {exc}"))
            return
        if not hasattr(geom, "rings"):
            errors.append(RowError(line_no, "wkt: blocks must be POLYGON or MULTIPOLYGON"))
            return
        try:
            block = CensusBlock(geoid=geoid, geometry=geom,
                                area_km2=float(area) if area not in (None, "") else 0.0)
        except (ValidationError, ValueError) as exc:
            errors.append(RowError(line_no, str(exc)))
            return
        seen.add(geoid)
        blocks.append(block)

    text = path.read_text(encoding="utf-8")
    first = text.lstrip()[:1]
    if first == "{":
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                add(line_no, str(rec["geoid"]), str(rec["wkt"]), rec.get("area_km2"))
            except (json.JSONDecodeError, KeyError) as exc:
                errors.append(RowError(line_no, f"bad record: {exc}"))
    else:
        reader = csv.reader(text.splitlines())
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty blocks file") from None
        if header[:2] != ["geoid", "wkt"]:
            raise IngestError(f"{path}: blocks header must start geoid,wkt")
        has_area = len(header) > 2 and header[2] == "area_km2"
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                add(line_no, row[0], row[1], row[2] if has_area and len(row) > 2 else None)
            except (IndexError, ValueError) as exc:
                if isinstance(exc, IngestError):
                    raise
                errors.append(RowError(line_no, f"bad record: {exc}"))
    return blocks, errors


def parse_polygons_csv(path: str | Path, key_name: str) -> list[tuple[str, AnyPolygon]]:
    """Read (key, polygon WKT) pairs, e.g. county or urban-area boundaries.
    Header must be '<key_name>,wkt'."""
    path = Path(path)
    out: list[tuple[str, AnyPolygon]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != [key_name, "wkt"]:
            raise IngestError(f"{path}: header must be {key_name},wkt")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                geom = parse_wkt(row[1])
            except (WktError, IndexError) as exc:
                raise IngestError(f"{path}: line {line_no}: {exc}") from None
            if not hasattr(geom, "rings"):
                raise IngestError(
                    f"{path}: line {line_no}: expected POLYGON or MULTIPOLYGON")
            out.append((row[0], geom))
    return out


def write_links_csv(links: Sequence[RoadLink], path: str | Path) -> None:
    """Write cleaned links back out in the canonical column order."""
    from .geo import to_wkt

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LINK_COLUMNS)
        for l in links:
            writer.writerow([
                l.link_id, l.state_fips, l.county_fips, l.functional_class,
                l.urban_code, l.through_lanes, repr(l.length_km),
                repr(l.aadt_total),
                "" if l.aadt_mdv is None else repr(l.aadt_mdv),
                "" if l.aadt_hdv is None else repr(l.aadt_hdv),
                to_wkt(l.geometry),
            ])
