"""Model validation: split metrics, VKT-weighted county MAPE, lowess residual
smoothing, k-fold cross-validation, and noise sensitivity curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import Hyperparameters, MetricsReport, RoadLink, VehicleClass
from .forest import LinkTable, fit_forest_matrix, schema_from_table


def train_test_split(
    links: Sequence, test_frac: float = 0.2, seed: int = 0
) -> tuple[list, list]:
    """Seeded uniform shuffle, then split. Test size is round(n * test_frac)
    (banker's rounding), clamped so both sides are nonempty."""
    n = len(links)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must lie in (0, 1)")
    n_test = min(max(int(round(n * test_frac)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return [links[i] for i in train_idx], [links[i] for i in test_idx]


def score(y_true: np.ndarray, y_pred: np.ndarray) -> MetricsReport:
    """R2 = 1 - SSE/SST, MAE, RMSE, and MAPE over rows with y_true > 0.
    Zero observed variance flags R2 as NaN rather than raising."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or len(y_true) == 0:
        raise ValueError("y_true and y_pred must be equal-length nonempty vectors")
    err = y_true - y_pred
    sse = float(np.sum(err * err))
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    mae = float(np.mean(np.abs(err)))
    rmse = math.sqrt(float(np.mean(err * err)))
    pos = y_true > 0
    mape = float(np.mean(np.abs(err[pos]) / y_true[pos]) * 100) if pos.any() else None
    return MetricsReport(r2=r2, mae=mae, rmse=rmse, mape=mape, n=len(y_true))


@dataclass(frozen=True)
class CountyMape:
    county_fips: str
    mape_pct: float
    total_vkt: float
    n_links: int


@dataclass(frozen=True)
class CountyMapeResult:
    counties: list
    zero_observed_excluded: int
    zero_weight_counties: list


def county_weighted_mape(
    test_links: Sequence[RoadLink],
    predictions: np.ndarray,
    target: VehicleClass,
) -> CountyMapeResult:
    """Per-county mean absolute percentage error, weighted by each link's VKT
    (observed target AADT times length). Links with zero observed AADT are
    excluded from the average and counted; counties whose total weight is zero
    are reported separately rather than emitted."""
    y = np.array([l.aadt(target) for l in test_links], dtype=np.float64)
    if np.isnan(y).any():
        raise ValueError("every test link needs an observed target value")
    pred = np.asarray(predictions, dtype=np.float64)
    if len(pred) != len(y):
        raise ValueError("predictions must align with test links")
    length = np.array([l.length_km for l in test_links])
    county = np.array([l.county_fips for l in test_links], dtype=object)

    usable = y > 0
    excluded = int(np.count_nonzero(~usable))
    weights = y * length
    ape = np.zeros_like(y)
    ape[usable] = np.abs(y[usable] - pred[usable]) / y[usable]

    out: list[CountyMape] = []
    zero_weight: list[str] = []
    for fips in sorted(set(county)):
        in_county = county == fips
        m = in_county & usable
        wsum = float(weights[m].sum())
        if wsum <= 0:
            zero_weight.append(str(fips))
            continue
        mape = float(np.sum(weights[m] * ape[m]) / wsum * 100)
        out.append(CountyMape(
            county_fips=str(fips),
            mape_pct=mape,
            total_vkt=float(weights[in_county].sum()),
            n_links=int(np.count_nonzero(in_county)),
        ))
    return CountyMapeResult(out, excluded, zero_weight)


def lowess(
    x: np.ndarray,
    y: np.ndarray,
    frac: float = 2.0 / 3.0,
    robust_iters: int = 0,
) -> np.ndarray:
    """Locally weighted scatterplot smoothing.

    Each fitted value is a weighted local linear regression over the
    ceil(frac * n) nearest neighbors in x, with tri-cube weights
    (1 - (d/dmax)^3)^3. Optional robustifying iterations downweight large
    residuals with bisquare weights. Neighborhoods whose x values are all
    identical fall back to the local weighted mean.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y) or n < 2:
        raise ValueError("x and y must be equal-length with n >= 2")
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must lie in (0, 1]")
    r = min(n, max(2, math.ceil(frac * n)))
    fitted = np.zeros(n)
    delta = np.ones(n)
    for iteration in range(robust_iters + 1):
        for i in range(n):
            d = np.abs(x - x[i])
            dmax = np.partition(d, r - 1)[r - 1]
            if dmax <= 0:
                w = delta * (d <= 0)
                fitted[i] = np.sum(w * y) / np.sum(w) if w.sum() > 0 else y[i]
                continue
            u = np.clip(d / dmax, 0.0, 1.0)
            tri = (1 - u ** 3) ** 3
            w = delta * tri
            if np.sum(w) <= 0:
                w = tri  # every neighbor robust-zeroed: drop the robust weights
            dx = x - x[i]  # center so the intercept is the fitted value
            sw = np.sum(w)
            swx = np.sum(w * dx)
            swxx = np.sum(w * dx * dx)
            swy = np.sum(w * y)
            swxy = np.sum(w * dx * y)
            det = sw * swxx - swx * swx
            if abs(det) <= 1e-12 * max(sw * swxx, 1e-300):
                fitted[i] = swy / sw
            else:
                fitted[i] = (swy * swxx - swxy * swx) / det
        if iteration < robust_iters:
            res = y - fitted
            s = float(np.median(np.abs(res)))
            if s <= 0:
                # degenerate median (most residuals exactly zero): fall back
                # to a tiny fraction of the largest residual so true outliers
                # still lose their weight
                s = 1e-9 * float(np.abs(res).max())
            if s <= 0:
                delta = np.ones(n)
                continue
            delta = np.clip(res / (6.0 * s), -1.0, 1.0)
            delta = (1 - delta ** 2) ** 2
    return fitted


def residual_analysis(
    test_links: Sequence[RoadLink],
    predictions: np.ndarray,
    target: VehicleClass,
    frac: float = 2.0 / 3.0,
    robust_iters: int = 0,
) -> list[tuple[float, float, float]]:
    """(observed, residual, lowess_fit) rows, one per test link, sorted by
    observed value so the smoothed curve plots directly."""
    y = np.array([l.aadt(target) for l in test_links], dtype=np.float64)
    pred = np.asarray(predictions, dtype=np.float64)
    resid = y - pred
    order = np.lexsort((resid, y))
    ys, rs = y[order], resid[order]
    fit = lowess(ys, rs, frac=frac, robust_iters=robust_iters)
    return [(float(a), float(b), float(c)) for a, b, c in zip(ys, rs, fit)]


@dataclass(frozen=True)
class KFoldResult:
    fold_metrics: list
    mean: dict
    variance: dict


def _metric_dict(reports: list) -> tuple[dict, dict]:
    mean, var = {}, {}
    for name in ("r2", "mae", "rmse", "mape"):
        vals = np.array([getattr(m, name) for m in reports
                         if getattr(m, name) is not None], dtype=np.float64)
        if len(vals):
            mean[name] = float(vals.mean())
            var[name] = float(vals.var())
    return mean, var


def make_folds(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic shuffled partition into k folds with sizes differing by
    at most one. Depends only on (n, k, seed)."""
    if k < 2:
        raise ValueError("need k >= 2 folds")
    if k > n:
        raise ValueError("more folds than records")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def kfold_cv(
    links: Sequence[RoadLink],
    target: VehicleClass,
    params: Hyperparameters,
    k: int = 5,
    seed: int = 0,
    threads: int = 1,
) -> KFoldResult:
    """Per-fold fit-on-rest / score-on-fold metrics plus their mean and
    variance across folds (variance reported for every metric)."""
    table = LinkTable.from_links(links)
    return kfold_cv_table(table, target, params, k=k, seed=seed, threads=threads)


def kfold_cv_table(
    table: LinkTable,
    target: VehicleClass,
    params: Hyperparameters,
    k: int = 5,
    seed: int = 0,
    threads: int = 1,
) -> KFoldResult:
    y = table.target(target)
    if np.isnan(y).any():
        raise ValueError("cross-validation needs the target observed on every link")
    folds = make_folds(len(table), k, seed)
    reports = []
    for fold in folds:
        mask = np.ones(len(table), dtype=bool)
        mask[fold] = False
        train = table.take(np.flatnonzero(mask))
        schema = schema_from_table(train)
        model = fit_forest_matrix(
            schema.encode(train), y[mask], params, seed, schema, target,
            threads=threads,
        )
        pred = model.predict_matrix(schema.encode(table.take(fold)))
        reports.append(score(y[fold], pred))
    mean, var = _metric_dict(reports)
    return KFoldResult(fold_metrics=reports, mean=mean, variance=var)


class NoiseTarget(Enum):
    PREDICTOR = "predictor"  # multiplicative noise on total AADT
    RESPONSE = "response"  # multiplicative noise on the target AADT


@dataclass(frozen=True)
class SensitivityCurve:
    noise_target: NoiseTarget
    levels: list  # ascending (noise_pct, r2), level 0 present

    def __post_init__(self) -> None:
        pts = sorted(self.levels)
        if not pts or pts[0][0] != 0:
            raise ValueError("sensitivity curve must include noise level 0")
        object.__setattr__(self, "levels", pts)


DEFAULT_NOISE_LEVELS = (0.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0)


def sensitivity(
    links: Sequence[RoadLink],
    target: VehicleClass,
    params: Hyperparameters,
    noise_target: NoiseTarget,
    levels: Sequence[float] = DEFAULT_NOISE_LEVELS,
    seed: int = 0,
    test_frac: float = 0.2,
    threads: int = 1,
) -> SensitivityCurve:
    """Gaussian-noise robustness curve: at each level p the chosen quantity is
    multiplied by (1 + eps), eps ~ Normal(0, p/100), clamped at zero; the model
    is retrained with the same seed and scored on the untouched held-out test
    set. Level 0 skips the perturbation entirely, so it reproduces the
    baseline bit for bit."""
    table = LinkTable.from_links(links)
    return sensitivity_table(table, target, params, noise_target,
                             levels=levels, seed=seed, test_frac=test_frac,
                             threads=threads)


def sensitivity_table(
    table: LinkTable,
    target: VehicleClass,
    params: Hyperparameters,
    noise_target: NoiseTarget,
    levels: Sequence[float] = DEFAULT_NOISE_LEVELS,
    seed: int = 0,
    test_frac: float = 0.2,
    threads: int = 1,
) -> SensitivityCurve:
    y_all = table.target(target)
    if np.isnan(y_all).any():
        raise ValueError("sensitivity needs the target observed on every link")
    n = len(table)
    if n < 2:
        raise ValueError("need at least 2 links")
    n_test = min(max(int(round(n * test_frac)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    train = table.take(train_idx)
    test = table.take(test_idx)
    schema = schema_from_table(train)
    X_test = schema.encode(test)
    y_test = y_all[test_idx]
    y_train = y_all[train_idx]

    points = []
    for li, pct in enumerate(sorted(set(float(p) for p in levels))):
        noisy = train
        y_fit = y_train
        if pct > 0:
            rng = np.random.default_rng([seed, li])
            eps = rng.standard_normal(len(train_idx)) * (pct / 100.0)
            if noise_target is NoiseTarget.PREDICTOR:
                noisy = LinkTable(**{k: getattr(train, k).copy()
                                     for k in train.__dataclass_fields__})
                noisy.aadt_total = np.maximum(train.aadt_total * (1 + eps), 0.0)
            else:
                y_fit = np.maximum(y_train * (1 + eps), 0.0)
        model = fit_forest_matrix(
            schema.encode(noisy), y_fit, params, seed, schema, target,
            threads=threads,
        )
        r2 = score(y_test, model.predict_matrix(X_test)).r2
        points.append((pct, r2))
    return SensitivityCurve(noise_target=noise_target, levels=points)


@dataclass(frozen=True)
class PredictorBucketRow:
    predictor: str
    bucket: str
    series: str  # "observed" or "predicted"
    q_min: float
    q1: float
    median: float
    q3: float
    q_max: float
    n: int


def predictor_summary(
    test_links: Sequence[RoadLink],
    predictions: np.ndarray,
    target: VehicleClass,
) -> list[PredictorBucketRow]:
    """Observed-vs-predicted distribution summaries per predictor bucket:
    through lanes, functional class, and total-AADT deciles."""
    y = np.array([l.aadt(target) for l in test_links], dtype=np.float64)
    pred = np.asarray(predictions, dtype=np.float64)
    lanes = np.array([l.through_lanes for l in test_links])
    fclass = np.array([l.functional_class for l in test_links])
    total = np.array([l.aadt_total for l in test_links])

    rows: list[PredictorBucketRow] = []

    def emit(predictor: str, bucket: str, mask: np.ndarray) -> None:
        for series, vals in (("observed", y[mask]), ("predicted", pred[mask])):
            if len(vals) == 0:
                continue
            q = np.percentile(vals, [0, 25, 50, 75, 100])
            rows.append(PredictorBucketRow(predictor, bucket, series,
                                           *(float(v) for v in q), int(mask.sum())))

    for v in sorted(set(lanes)):
        emit("through_lanes", str(int(v)), lanes == v)
    for v in sorted(set(fclass)):
        emit("functional_class", str(int(v)), fclass == v)
    edges = np.percentile(total, np.linspace(0, 100, 11))
    for b in range(10):
        lo, hi = edges[b], edges[b + 1]
        mask = (total >= lo) & ((total < hi) if b < 9 else (total <= hi))
        emit("aadt_total_decile", f"{b + 1}", mask)
    return rows
