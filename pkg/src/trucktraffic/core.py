"""Shared domain types: road links, census blocks, model knobs, metric bundles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Union

from .geo import LineString, MultiPolygon, Polygon, line_length_km, polygon_area_km2

MODELABLE_FUNCTIONAL_CLASSES = (1, 2, 3, 4, 5, 6)
URBAN_CODES = (0, 1, 2)  # rural, urban, small urban
LANE_DEFAULT = 2


class VehicleClass(Enum):
    LDV = "ldv"
    MDV = "mdv"
    HDV = "hdv"
    TOTAL = "total"


#: Classes a model may be trained for. TOTAL is an input, never a target.
PREDICTABLE_CLASSES = (VehicleClass.MDV, VehicleClass.HDV)


class Provenance(Enum):
    OBSERVED = "observed"
    PREDICTED = "predicted"
    DERIVED = "derived"


class ValidationError(ValueError):
    """Raised when a record violates type invariants; carries every violation."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class Hyperparameters:
    """Random-forest knobs. max_features is 'all', 'sqrt', or a fraction in (0, 1]."""

    n_estimators: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: Union[str, float] = "all"

    def __post_init__(self) -> None:
        errs = []
        if self.n_estimators < 1:
            errs.append("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            errs.append("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            errs.append("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            errs.append("min_samples_leaf must be >= 1")
        if self.min_samples_leaf > self.min_samples_split:
            errs.append("min_samples_leaf must be <= min_samples_split")
        if isinstance(self.max_features, str):
            if self.max_features not in ("all", "sqrt"):
                errs.append("max_features must be 'all', 'sqrt', or a fraction")
        elif not 0.0 < float(self.max_features) <= 1.0:
            errs.append("max_features fraction must lie in (0, 1]")
        if errs:
            raise ValidationError(errs)


#: Defaults used whenever tuning is skipped.
DEFAULT_MDV_PARAMS = Hyperparameters(
    n_estimators=98, max_depth=None, min_samples_split=2, min_samples_leaf=1,
    max_features="all",
)
DEFAULT_HDV_PARAMS = Hyperparameters(
    n_estimators=95, max_depth=40, min_samples_split=2, min_samples_leaf=1,
    max_features="all",
)


@dataclass(frozen=True)
class RoadLink:
    """One road segment with per-class AADT and provenance.

    AADT values are stored as reals; predictions are tree averages and
    fractional by nature, so rounding happens only at final export.
    """

    link_id: str
    state_fips: str
    county_fips: str  # may be empty until county attribution runs
    functional_class: int
    urban_code: int
    through_lanes: int
    geometry: LineString
    length_km: float
    aadt_total: float
    aadt_mdv: Optional[float] = None
    aadt_hdv: Optional[float] = None
    aadt_ldv: Optional[float] = None
    mdv_provenance: Optional[Provenance] = None
    hdv_provenance: Optional[Provenance] = None
    ldv_provenance: Optional[Provenance] = None
    rescaled: bool = False

    def __post_init__(self) -> None:
        errs = _link_violations(
            link_id=self.link_id,
            state_fips=self.state_fips,
            county_fips=self.county_fips,
            functional_class=self.functional_class,
            urban_code=self.urban_code,
            through_lanes=self.through_lanes,
            geometry=self.geometry,
            length_km=self.length_km,
            aadt_total=self.aadt_total,
            aadt_mdv=self.aadt_mdv,
            aadt_hdv=self.aadt_hdv,
            aadt_ldv=self.aadt_ldv,
            predicted=(self.mdv_provenance is Provenance.PREDICTED
                       or self.hdv_provenance is Provenance.PREDICTED),
        )
        if errs:
            raise ValidationError(errs)

    def aadt(self, cls: VehicleClass) -> Optional[float]:
        return {
            VehicleClass.TOTAL: self.aadt_total,
            VehicleClass.MDV: self.aadt_mdv,
            VehicleClass.HDV: self.aadt_hdv,
            VehicleClass.LDV: self.aadt_ldv,
        }[cls]


def _link_violations(**f) -> list[str]:
    errs = []
    if not f["link_id"]:
        errs.append("link_id must be nonempty")
    if not (len(f["state_fips"]) == 2 and f["state_fips"].isdigit()):
        errs.append("state_fips must be a 2-digit string")
    cf = f["county_fips"]
    if cf and not (len(cf) == 5 and cf.isdigit()):
        errs.append("county_fips must be a 5-digit string or empty")
    if f["functional_class"] not in range(1, 8):
        errs.append("functional_class must be in 1..7")
    if f["urban_code"] not in URBAN_CODES:
        errs.append("urban_code must be one of {0, 1, 2}")
    if f["through_lanes"] < 1:
        errs.append("through_lanes must be >= 1")
    geom = f["geometry"]
    if geom is None:
        errs.append("geometry is required")
    else:
        glen = line_length_km(geom)
        if not math.isclose(f["length_km"], glen, rel_tol=1e-9, abs_tol=1e-15):
            errs.append("length_km must equal geometry length within 1e-9 relative")
    if f["length_km"] < 0:
        errs.append("length_km must be >= 0")
    total = f["aadt_total"]
    if total is None or total < 0 or not math.isfinite(total):
        errs.append("aadt_total must be a finite nonnegative number")
    for name in ("aadt_mdv", "aadt_hdv", "aadt_ldv"):
        v = f[name]
        if v is not None and (v < 0 or not math.isfinite(v)):
            errs.append(f"{name} must be finite and >= 0 when present")
    mdv, hdv = f["aadt_mdv"], f["aadt_hdv"]
    if (
        total is not None
        and mdv is not None
        and hdv is not None
        and not f["predicted"]  # predicted overshoots are rescaled downstream
        and f["aadt_ldv"] is None  # post-derivation sums are checked elsewhere
        and mdv + hdv > total * (1 + 1e-12)
    ):
        errs.append("aadt_mdv + aadt_hdv must not exceed aadt_total")
    return errs


def validate_link(record: Mapping[str, object]) -> RoadLink:
    """Build a RoadLink from parsed raw fields, raising with the complete
    violation list (each entry names the field and the broken rule)."""
    try:
        return RoadLink(
            link_id=str(record["link_id"]),
            state_fips=str(record["state_fips"]),
            county_fips=str(record.get("county_fips") or ""),
            functional_class=int(record["functional_class"]),  # type: ignore[arg-type]
            urban_code=int(record["urban_code"]),  # type: ignore[arg-type]
            through_lanes=int(record["through_lanes"]),  # type: ignore[arg-type]
            geometry=record["geometry"],  # type: ignore[arg-type]
            length_km=float(record["length_km"]),  # type: ignore[arg-type]
            aadt_total=float(record["aadt_total"]),  # type: ignore[arg-type]
            aadt_mdv=_opt_float(record.get("aadt_mdv")),
            aadt_hdv=_opt_float(record.get("aadt_hdv")),
        )  # raw records carry observed values, so the class-sum rule applies
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError([f"unparseable record: {exc}"]) from exc


def _opt_float(v: object) -> Optional[float]:
    if v is None or v == "":
        return None
    return float(v)  # type: ignore[arg-type]


@dataclass(frozen=True)
class CensusBlock:
    """Census block polygon; area_km2 is computed from geometry when not supplied."""

    geoid: str
    geometry: Union[Polygon, MultiPolygon]
    area_km2: float = field(default=0.0)

    def __post_init__(self) -> None:
        errs = []
        if not self.geoid:
            errs.append("geoid must be nonempty")
        if self.area_km2 == 0.0:
            object.__setattr__(self, "area_km2", polygon_area_km2(self.geometry))
        if self.area_km2 <= 0:
            errs.append("area_km2 must be positive (geometry must enclose area)")
        if errs:
            raise ValidationError(errs)


@dataclass(frozen=True)
class MetricsReport:
    """R2 / MAE / RMSE / MAPE bundle for one evaluation. r2 is NaN when the
    observed variance is zero (flagged, not raised)."""

    r2: float
    mae: float
    rmse: float
    mape: Optional[float]
    n: int

    def __post_init__(self) -> None:
        errs = []
        if self.mae < 0 or self.rmse < 0:
            errs.append("mae and rmse must be >= 0")
        if self.rmse < self.mae * (1 - 1e-12):
            errs.append("rmse must be >= mae")
        if math.isfinite(self.r2) and self.r2 > 1 + 1e-12:
            errs.append("r2 must be <= 1")
        if self.mape is not None and self.mape < 0:
            errs.append("mape must be >= 0 when present")
        if self.n < 0:
            errs.append("n must be >= 0")
        if errs:
            raise ValidationError(errs)
