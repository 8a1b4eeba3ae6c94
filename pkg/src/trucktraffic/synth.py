"""Synthetic corpus generator: links and blocks with known class-share ground
truth, the oracle behind every desk-scale recovery and acceptance run."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CensusBlock, Provenance, RoadLink
from .geo import LineString, Polygon, to_wkt

#: True MDV / HDV share of total AADT per functional class. Interstates carry
#: the heaviest truck mix; collectors the lightest.
MDV_SHARE = {1: 0.040, 2: 0.035, 3: 0.042, 4: 0.019, 5: 0.015, 6: 0.019}
HDV_SHARE = {1: 0.110, 2: 0.041, 3: 0.046, 4: 0.014, 5: 0.009, 6: 0.007}

#: Lognormal location of total AADT by functional class (roughly 18k veh/day
#: on interstates down to ~250 on minor collectors).
TOTAL_AADT_MU = {1: 9.8, 2: 9.2, 3: 8.6, 4: 7.6, 5: 6.6, 6: 5.5}
TOTAL_AADT_SIGMA = 0.8

COUNTY_EXTENT_M = 10_000.0  # each county is a square this wide


@dataclass
class SynthConfig:
    n_links: int = 1000
    seed: int = 0
    n_states: int = 2
    counties_per_state: int = 3
    noise_pct: float = 10.0  # multiplicative class-share noise
    missing_frac: float = 0.3  # links with both class AADTs masked
    single_missing_frac: float = 0.05  # links with exactly one class masked
    block_grid: int = 5  # blocks per county side on a 1 km grid
    functional_class_7_frac: float = 0.0
    total_sigma: float = TOTAL_AADT_SIGMA  # lognormal spread of total AADT
    #: optional volume-regime effect: links above their class's median total
    #: carry (1 + rate_knee) times the base truck shares, making total AADT
    #: dominate the signal in a way local averaging cannot smooth over
    rate_knee: float = 0.0


@dataclass
class SynthTruth:
    """Everything a test oracle needs to recover the generator's parameters."""

    mdv_share: dict
    hdv_share: dict
    state_mult: dict
    county_mult: dict
    rate_knee: float = 0.0
    knee_threshold: dict = None  # functional class -> total AADT threshold

    def expected_rate(self, cls: str, fc: int, state: str, county: str,
                      total: Optional[float] = None) -> float:
        base = (self.mdv_share if cls == "mdv" else self.hdv_share)[fc]
        rate = base * self.state_mult[state] * self.county_mult[county]
        if (self.rate_knee and total is not None
                and total > self.knee_threshold[fc]):
            rate *= 1.0 + self.rate_knee
        return rate

    def to_dict(self) -> dict:
        return {
            "mdv_share": {str(k): v for k, v in self.mdv_share.items()},
            "hdv_share": {str(k): v for k, v in self.hdv_share.items()},
            "state_mult": self.state_mult,
            "county_mult": self.county_mult,
            "rate_knee": self.rate_knee,
            "knee_threshold": {str(k): v for k, v in
                               (self.knee_threshold or {}).items()},
        }


def _fips(state_i: int, county_i: int) -> tuple[str, str]:
    state = f"{state_i + 10:02d}"
    return state, f"{state}{county_i * 2 + 1:03d}"


def generate_corpus(
    config: SynthConfig,
) -> tuple[list[RoadLink], list[CensusBlock], SynthTruth]:
    """Seeded corpus: per-link total AADT lognormal by functional class, true
    class shares = share[fc] * state_mult * county_mult with multiplicative
    Gaussian noise, shares masked missing at the configured rates. Construction
    keeps mdv + hdv <= total on every link."""
    rng = np.random.default_rng(config.seed)
    counties: list[tuple[str, str, float, float]] = []  # state, county, x0, y0
    for si in range(config.n_states):
        for ci in range(config.counties_per_state):
            state, county = _fips(si, ci)
            counties.append((state, county,
                             si * COUNTY_EXTENT_M, ci * COUNTY_EXTENT_M))
    state_mult = {f"{si + 10:02d}": float(0.8 + 0.4 * rng.random())
                  for si in range(config.n_states)}
    county_mult = {c: float(0.9 + 0.2 * rng.random()) for _, c, _, _ in counties}
    knee_threshold = {fc: float(np.exp(mu)) for fc, mu in TOTAL_AADT_MU.items()}
    truth = SynthTruth(dict(MDV_SHARE), dict(HDV_SHARE), state_mult, county_mult,
                       rate_knee=config.rate_knee, knee_threshold=knee_threshold)

    fc_choices = np.array([1, 2, 3, 4, 5, 6])
    fc_weights = np.array([0.06, 0.05, 0.14, 0.20, 0.45, 0.10])
    links: list[RoadLink] = []
    sigma = config.noise_pct / 100.0
    for i in range(config.n_links):
        state, county, x0, y0 = counties[int(rng.integers(len(counties)))]
        if config.functional_class_7_frac > 0 and rng.random() < config.functional_class_7_frac:
            fc = 7
        else:
            fc = int(rng.choice(fc_choices, p=fc_weights))
        ax = x0 + rng.random() * (COUNTY_EXTENT_M - 2000) + 1000
        ay = y0 + rng.random() * (COUNTY_EXTENT_M - 2000) + 1000
        ang = rng.random() * 2 * np.pi
        length_m = float(np.clip(rng.lognormal(6.6, 0.5), 100, 5000))
        bx = ax + np.cos(ang) * length_m
        by = ay + np.sin(ang) * length_m
        geom = LineString(np.array([[ax, ay], [bx, by]]))

        mu = TOTAL_AADT_MU.get(fc, 5.0)
        total = float(np.round(rng.lognormal(mu, config.total_sigma), 1))
        if fc == 7:
            links.append(RoadLink(
                link_id=f"L{i:07d}", state_fips=state, county_fips=county,
                functional_class=fc, urban_code=0, through_lanes=2,
                geometry=geom, length_km=_len_km(geom), aadt_total=total,
            ))
            continue
        lanes = int(np.clip(rng.poisson({1: 3, 2: 3, 3: 2}.get(fc, 1)) + 1, 1, 8))
        urban = int(rng.choice([0, 1, 2], p=[0.5, 0.4, 0.1]))
        mdv_rate = truth.expected_rate("mdv", fc, state, county, total)
        hdv_rate = truth.expected_rate("hdv", fc, state, county, total)
        mdv = total * mdv_rate * max(1.0 + sigma * rng.standard_normal(), 0.0)
        hdv = total * hdv_rate * max(1.0 + sigma * rng.standard_normal(), 0.0)
        if mdv + hdv > total > 0:  # construction guarantee, vanishingly rare
            scale = total / (mdv + hdv)
            mdv *= scale
            hdv *= scale
        u = rng.random()
        mdv_val: Optional[float] = float(mdv)
        hdv_val: Optional[float] = float(hdv)
        if u < config.missing_frac:
            mdv_val = hdv_val = None
        elif u < config.missing_frac + config.single_missing_frac:
            if rng.random() < 0.5:
                mdv_val = None
            else:
                hdv_val = None
        links.append(RoadLink(
            link_id=f"L{i:07d}", state_fips=state, county_fips=county,
            functional_class=fc, urban_code=urban, through_lanes=lanes,
            geometry=geom, length_km=_len_km(geom), aadt_total=total,
            aadt_mdv=mdv_val, aadt_hdv=hdv_val,
            mdv_provenance=None if mdv_val is None else Provenance.OBSERVED,
            hdv_provenance=None if hdv_val is None else Provenance.OBSERVED,
        ))

    blocks: list[CensusBlock] = []
    size = 1000.0
    for si in range(config.n_states):
        for ci in range(config.counties_per_state):
            state, county, x0, y0 = counties[si * config.counties_per_state + ci]
            for gx in range(config.block_grid):
                for gy in range(config.block_grid):
                    bx0 = x0 + 2000 + gx * size
                    by0 = y0 + 2000 + gy * size
                    ring = np.array([
                        [bx0, by0], [bx0 + size, by0],
                        [bx0 + size, by0 + size], [bx0, by0 + size], [bx0, by0],
                    ])
                    geoid = f"{county}{gx:03d}{gy:03d}{si:02d}{ci:02d}"
                    blocks.append(CensusBlock(geoid=geoid, geometry=Polygon(ring)))
    return links, blocks, truth


def _len_km(geom: LineString) -> float:
    from .geo import line_length_km

    return line_length_km(geom)


def write_corpus(
    links, blocks, truth: SynthTruth, out_dir: str | Path
) -> dict:
    """links.csv (canonical columns), blocks.ndjson, truth.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links_path = out / "links.csv"
    with open(links_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "link_id", "state_fips", "county_fips", "functional_class",
            "urban_code", "through_lanes", "length_km", "aadt_total",
            "aadt_mdv", "aadt_hdv", "geometry_wkt",
        ])
        for l in links:
            writer.writerow([
                l.link_id, l.state_fips, l.county_fips, l.functional_class,
                l.urban_code, l.through_lanes, repr(l.length_km), repr(l.aadt_total),
                "" if l.aadt_mdv is None else repr(l.aadt_mdv),
                "" if l.aadt_hdv is None else repr(l.aadt_hdv),
                to_wkt(l.geometry),
            ])
    blocks_path = out / "blocks.ndjson"
    with open(blocks_path, "w", encoding="utf-8") as fh:
        for b in blocks:
            fh.write(json.dumps({"geoid": b.geoid, "wkt": to_wkt(b.geometry)}))
            fh.write("\n")
    truth_path = out / "truth.json"
    truth_path.write_text(json.dumps(truth.to_dict(), indent=2), encoding="utf-8")
    return {"links": links_path, "blocks": blocks_path, "truth": truth_path}
