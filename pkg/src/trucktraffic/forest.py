"""Random-forest regression built from scratch: one-hot feature encoding,
level-synchronous CART induction, bootstrap aggregation, prediction.

Trees are grown breadth-first so every node at a depth level is scored in a
handful of vectorized passes (segmented cumulative sums over per-feature
sorted orders, maintained by stable partition). This keeps desk-scale training
fast without changing the math: splits minimize weighted child SSE over
midpoint thresholds, exactly as a per-node implementation would.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Hyperparameters, PREDICTABLE_CLASSES, RoadLink, VehicleClass

#: One-hot blocks in declaration order; levels sorted within each block.
CATEGORICAL_FIELDS = ("functional_class", "state_fips", "county_fips")
CONTINUOUS_FIELDS = ("aadt_total", "through_lanes")


@dataclass
class LinkTable:
    """Column view of a link list; the unit every model op works on."""

    link_id: np.ndarray
    aadt_total: np.ndarray
    through_lanes: np.ndarray
    functional_class: np.ndarray
    state_fips: np.ndarray
    county_fips: np.ndarray
    aadt_mdv: np.ndarray  # NaN where missing
    aadt_hdv: np.ndarray
    length_km: np.ndarray

    @classmethod
    def from_links(cls, links: Sequence[RoadLink]) -> "LinkTable":
        def col(f, dtype=None):
            return np.array([f(l) for l in links], dtype=dtype)

        nan = float("nan")
        return cls(
            link_id=col(lambda l: l.link_id, object),
            aadt_total=col(lambda l: l.aadt_total, np.float64),
            through_lanes=col(lambda l: l.through_lanes, np.float64),
            functional_class=col(lambda l: l.functional_class, np.int32),
            state_fips=col(lambda l: l.state_fips, object),
            county_fips=col(lambda l: l.county_fips, object),
            aadt_mdv=col(lambda l: nan if l.aadt_mdv is None else l.aadt_mdv, np.float64),
            aadt_hdv=col(lambda l: nan if l.aadt_hdv is None else l.aadt_hdv, np.float64),
            length_km=col(lambda l: l.length_km, np.float64),
        )

    def __len__(self) -> int:
        return len(self.aadt_total)

    def take(self, idx: np.ndarray) -> "LinkTable":
        return LinkTable(**{k: getattr(self, k)[idx] for k in self.__dataclass_fields__})

    def target(self, cls: VehicleClass) -> np.ndarray:
        if cls is VehicleClass.MDV:
            return self.aadt_mdv
        if cls is VehicleClass.HDV:
            return self.aadt_hdv
        raise ValueError(f"{cls} is not a prediction target")


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout: the two continuous features first, then one one-hot
    block per categorical field with levels observed in training, sorted.
    Unseen levels at predict time encode as an all-zero block."""

    levels: dict

    @property
    def width(self) -> int:
        return len(CONTINUOUS_FIELDS) + sum(len(v) for v in self.levels.values())

    def column_names(self) -> list[str]:
        names = list(CONTINUOUS_FIELDS)
        for f in CATEGORICAL_FIELDS:
            names.extend(f"{f}={v}" for v in self.levels[f])
        return names

    def encode(self, table: LinkTable) -> np.ndarray:
        n = len(table)
        X = np.zeros((n, self.width), dtype=np.float64)
        X[:, 0] = table.aadt_total
        X[:, 1] = table.through_lanes
        col = len(CONTINUOUS_FIELDS)
        for f in CATEGORICAL_FIELDS:
            levels = self.levels[f]
            if levels:
                lookup = {v: i for i, v in enumerate(levels)}
                vals = getattr(self, "_field")(table, f)
                for r, v in enumerate(vals):
                    i = lookup.get(v)
                    if i is not None:
                        X[r, col + i] = 1.0
            col += len(levels)
        return X

    @staticmethod
    def _field(table: LinkTable, f: str):
        return getattr(table, f)

    def to_dict(self) -> dict:
        return {"levels": {k: list(v) for k, v in self.levels.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        lv = d["levels"]
        return cls(levels={
            "functional_class": tuple(int(v) for v in lv["functional_class"]),
            "state_fips": tuple(str(v) for v in lv["state_fips"]),
            "county_fips": tuple(str(v) for v in lv["county_fips"]),
        })


def build_schema(links: Sequence[RoadLink]) -> FeatureSchema:
    if not links:
        raise ValueError("cannot build a feature schema from zero links")
    return schema_from_table(LinkTable.from_links(links))


def schema_from_table(table: LinkTable) -> FeatureSchema:
    if len(table) == 0:
        raise ValueError("cannot build a feature schema from zero links")
    return FeatureSchema(levels={
        "functional_class": tuple(sorted({int(v) for v in table.functional_class})),
        "state_fips": tuple(sorted(set(table.state_fips))),
        "county_fips": tuple(sorted(set(table.county_fips))),
    })


@dataclass
class RegressionTree:
    """Flattened CART arrays. feature == -1 marks a leaf; value is the mean of
    training targets reaching the node, n their (bootstrap-weighted) count.
    depth is an upper bound on the deepest leaf, used to cap prediction
    routing passes."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n: np.ndarray
    depth: int

    def node_count(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        rows = np.arange(len(X))
        for _ in range(self.depth + 1):
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                break
            xv = X[rows, np.where(internal, f, 0)]
            goleft = xv <= self.threshold[node]
            nxt = np.where(goleft, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n": self.n.tolist(),
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int32),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int32),
            right=np.array(d["right"], dtype=np.int32),
            value=np.array(d["value"], dtype=np.float64),
            n=np.array(d["n"], dtype=np.int64),
            depth=int(d["depth"]),
        )


def _feature_count(mode, total: int) -> int:
    if mode == "all":
        return total
    if mode == "sqrt":
        return max(1, math.ceil(math.sqrt(total)))
    return max(1, math.ceil(float(mode) * total))


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: Hyperparameters,
    rng: np.random.Generator,
    sample_weight: Optional[np.ndarray] = None,
) -> RegressionTree:
    """Grow one CART greedily: at each node pick the (feature, midpoint
    threshold) over the sampled feature subset minimizing weighted child SSE;
    stop on min_samples_split, the depth limit, or when no split reduces SSE.
    Equal-SSE ties break to the lowest feature index, then lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("X must be a 2-D matrix with at least one feature")
    if len(X) != len(y) or len(y) == 0:
        raise ValueError("X and y must be the same nonzero length")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, np.float64)
    m, F = X.shape
    k_feat = _feature_count(params.max_features, F)
    wy = w * y

    cap = 64
    t_feat = np.full(cap, -1, dtype=np.int32)
    t_thr = np.zeros(cap, dtype=np.float64)
    t_left = np.full(cap, -1, dtype=np.int32)
    t_right = np.full(cap, -1, dtype=np.int32)
    t_val = np.zeros(cap, dtype=np.float64)
    t_n = np.zeros(cap, dtype=np.int64)
    n_nodes = 1

    def grow(need: int):
        nonlocal cap, t_feat, t_thr, t_left, t_right, t_val, t_n
        while cap < need:
            cap *= 2
        t_feat = _extend(t_feat, cap, -1)
        t_thr = _extend(t_thr, cap, 0.0)
        t_left = _extend(t_left, cap, -1)
        t_right = _extend(t_right, cap, -1)
        t_val = _extend(t_val, cap, 0.0)
        t_n = _extend(t_n, cap, 0)

    # orders[:, j] lists row indices sorted by feature j, segment-grouped by
    # node label; maintained across levels by stable partition so every level
    # scores all features with a fixed handful of 2-D vectorized passes.
    orders = np.argsort(X, axis=0, kind="stable")
    cols = np.arange(F)[None, :]
    node_of = np.zeros(m, dtype=np.int64)
    cur_ids = np.array([0], dtype=np.int64)
    depth = 0
    max_depth_seen = 0

    while len(cur_ids):
        K = len(cur_ids)
        N = m
        r0 = orders[:, 0]
        sizes = np.bincount(node_of, minlength=K)
        starts = np.concatenate(([0], np.cumsum(sizes)))[:-1].astype(np.int64)
        tot_w = np.add.reduceat(w[r0], starts)
        tot_wy = np.add.reduceat(wy[r0], starts)
        y_s = y[r0]
        pure = np.maximum.reduceat(y_s, starts) <= np.minimum.reduceat(y_s, starts)
        t_val[cur_ids] = tot_wy / tot_w
        t_n[cur_ids] = np.rint(tot_w).astype(np.int64)
        can_split = (tot_w >= params.min_samples_split) & ~pure & (sizes >= 2)
        if params.max_depth is not None and depth >= params.max_depth:
            can_split[:] = False
        if not can_split.any() or N < 2:
            break
        max_depth_seen = depth

        if k_feat < F:
            keys = rng.random((K, F))
            picks = np.argsort(keys, axis=1, kind="stable")[:, :k_feat]
            allowed = np.zeros((K, F), dtype=bool)
            np.put_along_axis(allowed, picks, True, axis=1)
        else:
            allowed = None

        # score all features in cache-sized column chunks: one fixed sequence
        # of vectorized passes per chunk, identical results at any chunk width
        min_leaf = float(params.min_samples_leaf)
        st = np.minimum(starts, N - 2)
        pos = np.arange(N - 1, dtype=np.int64)[:, None]
        best_score = np.empty((K, F))
        best_pos = np.empty((K, F), dtype=np.int64)
        chunk = max(1, min(F, (1 << 22) // (max(N, 1) * 8)))
        for j0 in range(0, F, chunk):
            j1 = min(F, j0 + chunk)
            sub = orders[:, j0:j1]
            ccols = np.arange(j0, j1)[None, :]
            xv = X[sub, ccols]
            seg = node_of[sub]
            cwy = np.cumsum(wy[sub], axis=0)
            cw = np.cumsum(w[sub], axis=0)
            segc = seg[:-1]
            rel = ccols - j0
            slwy = cwy[:-1] - np.where(starts[:, None] > 0,
                                       cwy[starts - 1], 0.0)[segc, rel]
            slw = cw[:-1] - np.where(starts[:, None] > 0,
                                     cw[starts - 1], 0.0)[segc, rel]
            srwy = tot_wy[segc] - slwy
            srw = tot_w[segc] - slw
            valid = (segc == seg[1:]) & (xv[:-1] != xv[1:]) \
                & (slw >= min_leaf) & (srw >= min_leaf)
            with np.errstate(divide="ignore", invalid="ignore"):
                sc = slwy * slwy / slw + srwy * srwy / srw
            sc[~valid] = -np.inf
            mx = np.maximum.reduceat(sc, st, axis=0)
            best_score[:, j0:j1] = mx
            pos_hit = np.where(valid & (sc == mx[segc, rel]), pos, N)
            best_pos[:, j0:j1] = np.minimum.reduceat(pos_hit, st, axis=0)

        if allowed is not None:
            best_score[~allowed] = -np.inf
        best_j = np.argmax(best_score, axis=1)
        krange = np.arange(K)
        node_best = best_score[krange, best_j]
        baseline = tot_wy * tot_wy / tot_w
        do_split = can_split & (node_best > baseline)
        if not do_split.any():
            break

        p_star = best_pos[krange, best_j]
        p_safe = np.minimum(p_star, N - 2)
        lo = X[orders[p_safe, best_j], best_j]
        hi = X[orders[p_safe + 1, best_j], best_j]
        mid = (lo + hi) / 2.0
        thr = np.where(mid < hi, mid, lo)  # midpoint may round up to hi

        split_ids = np.flatnonzero(do_split)
        n_new = 2 * len(split_ids)
        grow(n_nodes + n_new)
        child_ids = n_nodes + np.arange(n_new, dtype=np.int64)
        n_nodes += n_new
        t_feat[cur_ids[split_ids]] = best_j[split_ids].astype(np.int32)
        t_thr[cur_ids[split_ids]] = thr[split_ids]
        t_left[cur_ids[split_ids]] = child_ids[0::2].astype(np.int32)
        t_right[cur_ids[split_ids]] = child_ids[1::2].astype(np.int32)

        splitting = do_split[node_of]
        go_left = X[np.arange(m), best_j[node_of]] <= thr[node_of]
        lab = 2 * node_of + (~go_left).astype(np.int64)
        old_to_new = np.full(2 * K, -1, dtype=np.int64)
        old_to_new[2 * split_ids] = np.arange(0, n_new, 2)
        old_to_new[2 * split_ids + 1] = np.arange(1, n_new, 2)
        # compact the row set to rows that keep growing; per-column orders are
        # preserved through the boolean compress, then stably re-grouped by
        # the new child labels
        keep_rows = np.flatnonzero(splitting)
        remap = np.full(m, -1, dtype=np.int64)
        remap[keep_rows] = np.arange(len(keep_rows))
        keep_in_order = splitting[orders]
        kept = orders.T[keep_in_order.T].reshape(F, len(keep_rows)).T
        sort_perm = np.argsort(old_to_new[lab[kept]], axis=0, kind="stable")
        orders = np.take_along_axis(remap[kept], sort_perm, axis=0)
        node_of = old_to_new[lab[keep_rows]]
        X = X[keep_rows]
        y = y[keep_rows]
        w = w[keep_rows]
        wy = wy[keep_rows]
        m = len(keep_rows)
        cur_ids = child_ids
        depth += 1

    return RegressionTree(
        feature=t_feat[:n_nodes].copy(),
        threshold=t_thr[:n_nodes].copy(),
        left=t_left[:n_nodes].copy(),
        right=t_right[:n_nodes].copy(),
        value=t_val[:n_nodes].copy(),
        n=t_n[:n_nodes].copy(),
        depth=max_depth_seen + 1 if n_nodes > 1 else 0,
    )


def _extend(arr: np.ndarray, cap: int, fill) -> np.ndarray:
    if len(arr) >= cap:
        return arr
    out = np.full(cap, fill, dtype=arr.dtype)
    out[:len(arr)] = arr
    return out


@dataclass
class ForestModel:
    """Bagged regression trees plus the schema that encodes links for them."""

    trees: list
    schema: FeatureSchema
    params: Hyperparameters
    seed: int
    target: VehicleClass

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return np.maximum(total / len(self.trees), 0.0)

    def predict_table(self, table: LinkTable) -> np.ndarray:
        return self.predict_matrix(self.schema.encode(table))

    def to_json(self) -> str:
        return json.dumps({
            "format": "trucktraffic-forest",
            "version": 1,
            "target": self.target.value,
            "seed": self.seed,
            "params": {
                "n_estimators": self.params.n_estimators,
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
                "min_samples_leaf": self.params.min_samples_leaf,
                "max_features": self.params.max_features,
            },
            "schema": self.schema.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        })

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        d = json.loads(text)
        if d.get("format") != "trucktraffic-forest" or d.get("version") != 1:
            raise ValueError("not a recognized forest model file")
        p = d["params"]
        return cls(
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            schema=FeatureSchema.from_dict(d["schema"]),
            params=Hyperparameters(
                n_estimators=p["n_estimators"],
                max_depth=p["max_depth"],
                min_samples_split=p["min_samples_split"],
                min_samples_leaf=p["min_samples_leaf"],
                max_features=p["max_features"],
            ),
            seed=int(d["seed"]),
            target=VehicleClass(d["target"]),
        )


def _fit_one_tree(X: np.ndarray, y: np.ndarray, params: Hyperparameters,
                  seed: int, tree_index: int, bootstrap: bool) -> RegressionTree:
    rng = np.random.default_rng([seed, tree_index])
    n = len(y)
    if bootstrap:
        draw = rng.integers(0, n, size=n)
        weights = np.bincount(draw, minlength=n).astype(np.float64)
        rows = np.flatnonzero(weights)
        return fit_tree(X[rows], y[rows], params, rng, sample_weight=weights[rows])
    return fit_tree(X, y, params, rng)


def fit_forest_matrix(
    X: np.ndarray,
    y: np.ndarray,
    params: Hyperparameters,
    seed: int,
    schema: FeatureSchema,
    target: VehicleClass,
    bootstrap: bool = True,
    threads: int = 1,
) -> ForestModel:
    if len(y) == 0:
        raise ValueError("cannot fit a forest on an empty training set")
    indices = range(params.n_estimators)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trees = list(ex.map(
                lambda i: _fit_one_tree(X, y, params, seed, i, bootstrap), indices))
    else:
        trees = [_fit_one_tree(X, y, params, seed, i, bootstrap) for i in indices]
    return ForestModel(trees=trees, schema=schema, params=params, seed=seed, target=target)


def fit_forest(
    links: Sequence[RoadLink],
    target: VehicleClass,
    params: Hyperparameters,
    seed: int,
    bootstrap: bool = True,
    threads: int = 1,
) -> ForestModel:
    """Train one forest for MDV or HDV on links whose target AADT is observed.

    Each tree draws a full-size bootstrap sample (with replacement) from an RNG
    stream derived from (seed, tree_index), so the model is bit-identical for a
    fixed seed regardless of thread count. ``bootstrap=False`` is a test hook.
    """
    if target not in PREDICTABLE_CLASSES:
        raise ValueError(f"{target} is not a prediction target")
    table = LinkTable.from_links(links)
    y = table.target(target)
    if np.isnan(y).any():
        raise ValueError("training links must all have the target AADT observed")
    schema = schema_from_table(table)
    X = schema.encode(table)
    return fit_forest_matrix(X, y, params, seed, schema, target,
                             bootstrap=bootstrap, threads=threads)


def predict(model: ForestModel, links: Sequence[RoadLink]) -> np.ndarray:
    """Per-link mean of tree predictions, clamped at zero."""
    return model.predict_table(LinkTable.from_links(links))
