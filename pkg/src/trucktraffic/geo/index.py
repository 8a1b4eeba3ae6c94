"""Bounding-box R-tree (sort-tile-recursive packing), immutable after build.

Queries return a superset of the items whose geometry intersects the query
box: the test is on bounding boxes, so false positives are possible and callers
filter with exact geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .primitives import Geometry, bounds

LEAF_CAPACITY = 16
NODE_CAPACITY = 8


@dataclass
class _Node:
    box: tuple[float, float, float, float]
    children: list  # _Node list, or item-id list at leaves
    leaf: bool


class SpatialIndex:
    def __init__(self, root: _Node | None, ids: list):
        self._root = root
        self._ids = ids

    def __len__(self) -> int:
        return len(self._ids)

    def query(self, box: tuple[float, float, float, float]) -> list:
        """Ids of all indexed items whose bbox intersects ``box``."""
        if self._root is None:
            return []
        out: list = []
        stack = [self._root]
        while stack:
            node = stack.pop()
            if not _boxes_meet(node.box, box):
                continue
            if node.leaf:
                for i in node.children:
                    if _boxes_meet(self._boxes[i], box):
                        out.append(self._ids[i])
            else:
                stack.extend(reversed(node.children))
        return out


def _boxes_meet(a: tuple, b: tuple) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _tile(order: np.ndarray, boxes: np.ndarray, cap: int) -> list[list[int]]:
    """STR tiling: sort by center x, slice, sort slices by center y, chunk."""
    n = len(order)
    p = math.ceil(n / cap)
    s = max(1, math.ceil(math.sqrt(p)))
    cx = (boxes[order, 0] + boxes[order, 2]) / 2
    cy = (boxes[order, 1] + boxes[order, 3]) / 2
    by_x = order[np.lexsort((order, cy, cx))]
    slice_size = s * cap
    groups = []
    for i in range(0, n, slice_size):
        sl = by_x[i:i + slice_size]
        scy = (boxes[sl, 1] + boxes[sl, 3]) / 2
        sl = sl[np.lexsort((sl, scy))]
        for j in range(0, len(sl), cap):
            groups.append(list(sl[j:j + cap]))
    return groups


def build_index(items: Sequence[tuple[Hashable, Geometry]]) -> SpatialIndex:
    """Pack (id, geometry) pairs into an R-tree. Deterministic for a given
    input order."""
    ids = [i for i, _ in items]
    if not items:
        idx = SpatialIndex(None, [])
        idx._boxes = np.empty((0, 4))
        return idx
    boxes = np.array([bounds(g) for _, g in items], dtype=np.float64)
    groups = _tile(np.arange(len(items)), boxes, LEAF_CAPACITY)
    nodes = [
        _Node(tuple(np.array([boxes[g, 0].min(), boxes[g, 1].min(),
                              boxes[g, 2].max(), boxes[g, 3].max()])), g, True)
        for g in groups
    ]
    while len(nodes) > 1:
        nboxes = np.array([n.box for n in nodes])
        groups = _tile(np.arange(len(nodes)), nboxes, NODE_CAPACITY)
        nodes = [
            _Node(tuple(np.array([nboxes[g, 0].min(), nboxes[g, 1].min(),
                                  nboxes[g, 2].max(), nboxes[g, 3].max()])),
                  [nodes[i] for i in g], False)
            for g in groups
        ]
    idx = SpatialIndex(nodes[0], ids)
    idx._boxes = boxes
    return idx
