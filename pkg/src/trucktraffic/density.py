"""Census-block traffic density: buffer each block, clip nearby links to the
buffer, sum per-class VKT, divide by the block's own area (not the buffered
area -- the denominator is deliberately the block itself)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import CensusBlock, MODELABLE_FUNCTIONAL_CLASSES, RoadLink, VehicleClass
from .geo import bounds, buffer, build_index, clip_line_to_polygon, line_length_km

CLASSES = (VehicleClass.TOTAL, VehicleClass.LDV, VehicleClass.MDV, VehicleClass.HDV)


@dataclass
class BlockDensity:
    geoid: str
    area_km2: float
    vkt: dict  # VehicleClass -> daily vehicle-km within the buffer
    density: dict  # VehicleClass -> VKT / km^2 of block area
    contributing_links: int


@dataclass
class DensityReport:
    blocks_in: int = 0
    blocks_out: int = 0
    zero_area_blocks: list = field(default_factory=list)
    links_usable: int = 0
    links_skipped: int = 0  # class 7 or unimputed: out of scope, not zero

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _usable(link: RoadLink) -> bool:
    return (
        link.functional_class in MODELABLE_FUNCTIONAL_CLASSES
        and link.aadt_ldv is not None
        and link.aadt_mdv is not None
        and link.aadt_hdv is not None
    )


def compute_density(
    blocks: Sequence[CensusBlock],
    links: Sequence[RoadLink],
    buffer_m: float = 250.0,
    arc_segments: int = 16,
) -> tuple[list[BlockDensity], DensityReport]:
    """Per-block per-class density. Whole-link AADT applies uniformly along
    the link, so clipped VKT is proportional to clipped length; a segment
    inside several blocks' buffers contributes to each of them. Links without
    a full class breakdown contribute nothing and are counted in the report.
    Blocks with nonpositive area become report entries instead of output rows.
    """
    report = DensityReport(blocks_in=len(blocks))
    usable = [l for l in links if _usable(l)]
    report.links_usable = len(usable)
    report.links_skipped = len(links) - len(usable)
    index = build_index([(i, l.geometry) for i, l in enumerate(usable)])

    out: list[BlockDensity] = []
    for block in blocks:
        if block.area_km2 <= 0:
            report.zero_area_blocks.append(block.geoid)
            continue
        zone = buffer(block.geometry, buffer_m, arc_segments)
        vkt = {c: 0.0 for c in CLASSES}
        contributing = 0
        for i in sorted(index.query(bounds(zone))):  # input order: deterministic sums
            link = usable[i]
            pieces = clip_line_to_polygon(link.geometry, zone)
            if not pieces:
                continue
            clipped_km = sum(line_length_km(p) for p in pieces)
            if clipped_km <= 0:
                continue
            contributing += 1
            vkt[VehicleClass.TOTAL] += link.aadt_total * clipped_km
            vkt[VehicleClass.LDV] += link.aadt_ldv * clipped_km
            vkt[VehicleClass.MDV] += link.aadt_mdv * clipped_km
            vkt[VehicleClass.HDV] += link.aadt_hdv * clipped_km
        density = {c: vkt[c] / block.area_km2 for c in CLASSES}
        out.append(BlockDensity(
            geoid=block.geoid,
            area_km2=block.area_km2,
            vkt=vkt,
            density=density,
            contributing_links=contributing,
        ))
    report.blocks_out = len(out)
    return out, report


DENSITY_COLUMNS = [
    "geoid", "area_km2", "vkt_total", "vkt_ldv", "vkt_mdv", "vkt_hdv",
    "density_total", "density_ldv", "density_mdv", "density_hdv",
    "contributing_links",
]


def write_density(results: Sequence[BlockDensity], path: str | Path) -> None:
    """CSV sorted by geoid; reruns on identical inputs are byte-identical."""
    rows = sorted(results, key=lambda r: r.geoid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DENSITY_COLUMNS)
        for r in rows:
            writer.writerow([
                r.geoid, repr(r.area_km2),
                repr(r.vkt[VehicleClass.TOTAL]), repr(r.vkt[VehicleClass.LDV]),
                repr(r.vkt[VehicleClass.MDV]), repr(r.vkt[VehicleClass.HDV]),
                repr(r.density[VehicleClass.TOTAL]), repr(r.density[VehicleClass.LDV]),
                repr(r.density[VehicleClass.MDV]), repr(r.density[VehicleClass.HDV]),
                r.contributing_links,
            ])
