"""Imputation pipeline: train per-class forests on observed links, predict the
missing MDV/HDV values, and derive LDV so every modelable link carries a full,
self-consistent class breakdown."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .core import (
    Hyperparameters,
    MODELABLE_FUNCTIONAL_CLASSES,
    Provenance,
    RoadLink,
    VehicleClass,
)
from .forest import LinkTable, fit_forest
from .geo import parse_wkt, to_wkt
from .ingest import LINK_COLUMNS, IngestError

#: Offsets keeping the MDV and HDV model seeds distinct but derived.
_TARGET_SEED_OFFSET = {VehicleClass.MDV: 0, VehicleClass.HDV: 1}


def split_observed_missing(
    links: Sequence[RoadLink], target: VehicleClass
) -> tuple[list[RoadLink], list[RoadLink]]:
    """Disjoint, exhaustive partition by presence of the target AADT."""
    observed = [l for l in links if l.aadt(target) is not None]
    missing = [l for l in links if l.aadt(target) is None]
    return observed, missing


def derive_ldv(
    total: float, mdv: float, hdv: float
) -> tuple[float, float, float, bool]:
    """LDV = total - MDV - HDV. When predicted class values overshoot the
    total (impossible for observed rows after cleaning), MDV and HDV are
    rescaled proportionally to the total, LDV becomes 0, and the flag is set,
    preserving both the MDV:HDV ratio and the accounting identity."""
    if total < 0 or mdv < 0 or hdv < 0:
        raise ValueError("AADT values must be nonnegative")
    if mdv + hdv <= total:
        # sequential subtraction can go negative by an ulp when the class sum
        # rounds to exactly the total; clamp keeps LDV nonnegative
        return max(total - mdv - hdv, 0.0), mdv, hdv, False
    scale = total / (mdv + hdv)
    return 0.0, mdv * scale, hdv * scale, True


@dataclass
class ImputationStats:
    predicted_mdv: int = 0
    predicted_hdv: int = 0
    rescaled: int = 0
    passthrough_unmodeled: int = 0
    vkt_total: float = 0.0
    vkt_ldv: float = 0.0
    vkt_mdv: float = 0.0
    vkt_hdv: float = 0.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ImputationResult:
    links: list
    stats: ImputationStats


def train_models(
    links: Sequence[RoadLink],
    mdv_params: Hyperparameters,
    hdv_params: Hyperparameters,
    seed: int,
    threads: int = 1,
) -> dict:
    """One forest per target, trained on the observed subset of modelable
    links. Raises when a target has no observed rows at all."""
    modelable = [l for l in links
                 if l.functional_class in MODELABLE_FUNCTIONAL_CLASSES]
    models = {}
    for target, params in ((VehicleClass.MDV, mdv_params),
                           (VehicleClass.HDV, hdv_params)):
        observed, _ = split_observed_missing(modelable, target)
        if not observed:
            raise ValueError(f"no observed {target.value} AADT to train on")
        models[target] = fit_forest(
            observed, target, params,
            seed=seed + _TARGET_SEED_OFFSET[target], threads=threads)
    return models


def run_imputation(
    links: Sequence[RoadLink],
    mdv_params: Hyperparameters,
    hdv_params: Hyperparameters,
    seed: int,
    models: Optional[dict] = None,
    threads: int = 1,
) -> ImputationResult:
    """Fill missing MDV/HDV AADT with forest predictions and derive LDV.

    Observed values are never touched. Links outside functional classes 1-6
    pass through with class fields left missing. Output preserves input order.
    """
    stats = ImputationStats()
    modelable_idx = [i for i, l in enumerate(links)
                     if l.functional_class in MODELABLE_FUNCTIONAL_CLASSES]
    stats.passthrough_unmodeled = len(links) - len(modelable_idx)
    out: list[Optional[RoadLink]] = list(links)

    filled: dict[int, RoadLink] = {i: links[i] for i in modelable_idx}
    needs_model = any(
        links[i].aadt(t) is None
        for t in (VehicleClass.MDV, VehicleClass.HDV) for i in modelable_idx
    )
    if needs_model and models is None:
        models = train_models(links, mdv_params, hdv_params, seed, threads=threads)
    for target, params in ((VehicleClass.MDV, mdv_params),
                           (VehicleClass.HDV, hdv_params)):
        missing_idx = [i for i in modelable_idx if links[i].aadt(target) is None]
        if missing_idx:
            model = (models or {}).get(target)
            if model is None:
                raise ValueError(f"no model available for {target.value}")
            preds = model.predict_table(
                LinkTable.from_links([filled[i] for i in missing_idx]))
            for i, value in zip(missing_idx, preds):
                link = filled[i]
                if target is VehicleClass.MDV:
                    filled[i] = replace(link, aadt_mdv=float(value),
                                        mdv_provenance=Provenance.PREDICTED)
                    stats.predicted_mdv += 1
                else:
                    filled[i] = replace(link, aadt_hdv=float(value),
                                        hdv_provenance=Provenance.PREDICTED)
                    stats.predicted_hdv += 1

    for i in modelable_idx:
        link = filled[i]
        ldv, mdv, hdv, rescaled = derive_ldv(
            link.aadt_total, link.aadt_mdv, link.aadt_hdv)
        if rescaled:
            stats.rescaled += 1
        link = replace(
            link, aadt_ldv=ldv, aadt_mdv=mdv, aadt_hdv=hdv,
            ldv_provenance=Provenance.DERIVED, rescaled=rescaled)
        out[i] = link
        stats.vkt_total += link.aadt_total * link.length_km
        stats.vkt_ldv += ldv * link.length_km
        stats.vkt_mdv += mdv * link.length_km
        stats.vkt_hdv += hdv * link.length_km
    return ImputationResult(links=out, stats=stats)


IMPUTED_COLUMNS = LINK_COLUMNS + [
    "aadt_mdv_est", "aadt_hdv_est", "aadt_ldv_est",
    "mdv_provenance", "hdv_provenance", "rescaled",
]


def write_imputed_csv(result: ImputationResult, path: str | Path) -> None:
    """Imputed links as the input columns plus the estimate/provenance block,
    sorted by link_id for reproducible diffs."""
    rows = sorted(result.links, key=lambda l: l.link_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(IMPUTED_COLUMNS)
        for l in rows:
            writer.writerow([
                l.link_id, l.state_fips, l.county_fips, l.functional_class,
                l.urban_code, l.through_lanes, repr(l.length_km),
                repr(l.aadt_total),
                "" if l.mdv_provenance is not Provenance.OBSERVED else repr(l.aadt_mdv),
                "" if l.hdv_provenance is not Provenance.OBSERVED else repr(l.aadt_hdv),
                to_wkt(l.geometry),
                "" if l.aadt_mdv is None else repr(l.aadt_mdv),
                "" if l.aadt_hdv is None else repr(l.aadt_hdv),
                "" if l.aadt_ldv is None else repr(l.aadt_ldv),
                "" if l.mdv_provenance is None else l.mdv_provenance.value,
                "" if l.hdv_provenance is None else l.hdv_provenance.value,
                "1" if l.rescaled else "0",
            ])


def read_imputed_csv(path: str | Path) -> list[RoadLink]:
    """Load a file written by write_imputed_csv back into full RoadLinks."""
    links: list[RoadLink] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != IMPUTED_COLUMNS:
            raise IngestError(f"{path}: not an imputed links file")
        for row in reader:
            if not row:
                continue
            rec = dict(zip(IMPUTED_COLUMNS, row))
            geom = parse_wkt(rec["geometry_wkt"])
            links.append(RoadLink(
                link_id=rec["link_id"],
                state_fips=rec["state_fips"],
                county_fips=rec["county_fips"],
                functional_class=int(rec["functional_class"]),
                urban_code=int(rec["urban_code"]),
                through_lanes=int(rec["through_lanes"]),
                geometry=geom,
                length_km=float(rec["length_km"]),
                aadt_total=float(rec["aadt_total"]),
                aadt_mdv=float(rec["aadt_mdv_est"]) if rec["aadt_mdv_est"] else None,
                aadt_hdv=float(rec["aadt_hdv_est"]) if rec["aadt_hdv_est"] else None,
                aadt_ldv=float(rec["aadt_ldv_est"]) if rec["aadt_ldv_est"] else None,
                mdv_provenance=Provenance(rec["mdv_provenance"])
                if rec["mdv_provenance"] else None,
                hdv_provenance=Provenance(rec["hdv_provenance"])
                if rec["hdv_provenance"] else None,
                ldv_provenance=Provenance.DERIVED if rec["aadt_ldv_est"] else None,
                rescaled=rec["rescaled"] == "1",
            ))
    return links
