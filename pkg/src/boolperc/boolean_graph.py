"""Boolean (Gilbert) disk graph: clusters and crossing events.

Two points are neighbours when ``|x - y|_2 < 2r`` (strict).  Clusters are
built with a spatial hash of cell side ``2r`` and union-find; every point is
compared only against the points in its 3x3 cell neighbourhood.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .pointconfig import PointConfig, Window

# Cells finer than side/2^20 only blow up the key range without pruning anything.
_MAX_CELLS_PER_AXIS = 1 << 20

AXES = {"horizontal": 0, "x": 0, "vertical": 1, "y": 1}


@numba.njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@numba.njit(cache=True)
def _hashed_union_find(x, y, x0, y0, cell, thresh2):
    n = x.shape[0]
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    if n < 2:
        return parent
    cx = np.floor((x - x0) / cell).astype(np.int64)
    cy = np.floor((y - y0) / cell).astype(np.int64)
    ny = cy.max() + 3
    key = (cx + 1) * ny + (cy + 1)
    order = np.argsort(key, kind="mergesort")
    skey = key[order]
    for a in range(n):
        i = order[a]
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                k = (cx[i] + 1 + dx) * ny + (cy[i] + 1 + dy)
                lo = np.searchsorted(skey, k, side="left")
                hi = np.searchsorted(skey, k, side="right")
                for b in range(lo, hi):
                    j = order[b]
                    if j <= i:
                        continue
                    ddx = x[i] - x[j]
                    ddy = y[i] - y[j]
                    if ddx * ddx + ddy * ddy < thresh2:
                        ri = _find(parent, i)
                        rj = _find(parent, j)
                        if ri != rj:
                            if size[ri] < size[rj]:
                                ri, rj = rj, ri
                            parent[rj] = ri
                            size[ri] += size[rj]
    for i in range(n):
        parent[i] = _find(parent, i)
    return parent


def _canonical(roots: np.ndarray) -> np.ndarray:
    """Relabel so cluster ids are 0, 1, ... in order of first appearance."""
    _, first, inv = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv.reshape(-1)]


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """Partition of a configuration into Boolean-model clusters at radius ``r``.

    Per-cluster arrays are indexed by cluster id.  ``linf_min``/``linf_max``
    are the extremes of ``|x|_inf`` (about the origin) over the cluster.
    """

    radius: float
    window: Window
    cluster_id: np.ndarray
    cluster_sizes: np.ndarray
    xmin: np.ndarray
    xmax: np.ndarray
    ymin: np.ndarray
    ymax: np.ndarray
    linf_min: np.ndarray
    linf_max: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return int(self.cluster_id.size)

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_sizes.size)

    @property
    def largest_cluster_size(self) -> int:
        return int(self.cluster_sizes.max()) if self.n_clusters else 0

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.cluster_id == cid)

    def same_partition(self, other: "ClusterLabeling") -> bool:
        return np.array_equal(self.cluster_id, other.cluster_id)


def _labeling_from_ids(config: PointConfig, r: float, ids: np.ndarray) -> ClusterLabeling:
    pts = config.points
    k = int(ids.max()) + 1 if ids.size else 0
    sizes = np.bincount(ids, minlength=k).astype(np.int64)
    linf = np.max(np.abs(pts), axis=1) if ids.size else np.empty(0)

    def reduce(vals, fn, fill):
        out = np.full(k, fill)
        fn.at(out, ids, vals)
        return out

    arrays = dict(
        xmin=reduce(pts[:, 0], np.minimum, np.inf),
        xmax=reduce(pts[:, 0], np.maximum, -np.inf),
        ymin=reduce(pts[:, 1], np.minimum, np.inf),
        ymax=reduce(pts[:, 1], np.maximum, -np.inf),
        linf_min=reduce(linf, np.minimum, np.inf),
        linf_max=reduce(linf, np.maximum, -np.inf),
    )
    ids = ids.astype(np.int64)
    for a in (ids, sizes, *arrays.values()):
        a.setflags(write=False)
    return ClusterLabeling(float(r), config.window, ids, sizes, **arrays)


def build_clusters(config: PointConfig, r: float) -> ClusterLabeling:
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    pts = config.points
    x0, x1, y0, y1 = config.window.bounds
    cell = max(2.0 * r, max(x1 - x0, y1 - y0) / _MAX_CELLS_PER_AXIS)
    x = np.ascontiguousarray(pts[:, 0])
    y = np.ascontiguousarray(pts[:, 1])
    roots = _hashed_union_find(x, y, x0, y0, cell, 4.0 * r * r)
    return _labeling_from_ids(config, r, _canonical(roots))


def brute_force_clusters(config: PointConfig, r: float) -> ClusterLabeling:
    """All-pairs reference construction (O(n^2) memory), used as an oracle."""
    pts = config.points
    n = len(pts)
    if n == 0:
        return _labeling_from_ids(config, r, np.empty(0, dtype=np.int64))
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    i, j = np.nonzero(dx * dx + dy * dy < 4.0 * r * r)
    adj = coo_matrix((np.ones(i.size), (i, j)), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    return _labeling_from_ids(config, r, _canonical(comp))


def distance_to_box_boundary(points, R: float) -> np.ndarray:
    """Euclidean distance from each point to the L-inf sphere ``W_R``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a = np.abs(pts)
    inside = np.max(a, axis=1) <= R
    out = np.hypot(np.maximum(a[:, 0] - R, 0.0), np.maximum(a[:, 1] - R, 0.0))
    return np.where(inside, R - np.max(a, axis=1), out)


def origin_box_witnesses(labeling: ClusterLabeling, config: PointConfig, R: float) -> np.ndarray:
    """Cluster ids whose union of open r-disks covers 0 and meets ``W_R``."""
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    if R > labeling.window.half_width:
        raise ValueError(f"R={R} exceeds window half_width={labeling.window.half_width}")
    if labeling.n_points == 0:
        return np.empty(0, dtype=np.int64)
    r = labeling.radius
    pts = config.points
    at_origin = np.hypot(pts[:, 0], pts[:, 1]) < r
    at_box = distance_to_box_boundary(pts, R) < r
    k = labeling.n_clusters
    has_origin = np.bincount(labeling.cluster_id, weights=at_origin, minlength=k) > 0
    has_box = np.bincount(labeling.cluster_id, weights=at_box, minlength=k) > 0
    return np.flatnonzero(has_origin & has_box)


def origin_connected_to_box(labeling: ClusterLabeling, config: PointConfig, R: float) -> bool:
    return origin_box_witnesses(labeling, config, R).size > 0


def annulus_crossing_witnesses(labeling: ClusterLabeling, R_in: float, R_out: float) -> np.ndarray:
    if not 0 < R_in < R_out:
        raise ValueError(f"need 0 < R_in < R_out, got R_in={R_in}, R_out={R_out}")
    if R_out > labeling.window.half_width:
        raise ValueError(f"R_out={R_out} exceeds window half_width={labeling.window.half_width}")
    return np.flatnonzero((labeling.linf_min <= R_in) & (labeling.linf_max >= R_out))


def count_annulus_crossing_clusters(labeling: ClusterLabeling, R_in: float, R_out: float) -> int:
    return int(annulus_crossing_witnesses(labeling, R_in, R_out).size)


def _axis_index(axis) -> int:
    if axis in (0, 1):
        return int(axis)
    try:
        return AXES[str(axis).lower()]
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}; use 'horizontal' or 'vertical'") from None


def edge_crossing_witnesses(labeling: ClusterLabeling, axis="horizontal") -> np.ndarray:
    """Clusters with a point within r of both the low and the high edge along ``axis``."""
    x0, x1, y0, y1 = labeling.window.bounds
    r = labeling.radius
    if _axis_index(axis) == 0:
        lo, hi, a, b = labeling.xmin, labeling.xmax, x0, x1
    else:
        lo, hi, a, b = labeling.ymin, labeling.ymax, y0, y1
    return np.flatnonzero((lo - a < r) & (b - hi < r))


def edge_to_edge_crossing(labeling: ClusterLabeling, config: PointConfig | None = None,
                          axis="horizontal") -> bool:
    return edge_crossing_witnesses(labeling, axis).size > 0


@dataclass(frozen=True)
class CrossingReport:
    radius: float
    n_points: int
    n_clusters: int
    largest_cluster_size: int
    origin_to_box: dict = field(default_factory=dict)
    annulus_crossing_count: dict = field(default_factory=dict)
    edge_crossing: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "n_points": self.n_points,
            "n_clusters": self.n_clusters,
            "largest_cluster_size": self.largest_cluster_size,
            "origin_to_box": {str(k): v for k, v in self.origin_to_box.items()},
            "annulus_crossing_count": {f"{a},{b}": v for (a, b), v in self.annulus_crossing_count.items()},
            "edge_crossing": dict(self.edge_crossing),
            "witnesses": {k: [int(c) for c in v] for k, v in self.witnesses.items()},
        }


def crossing_report(labeling: ClusterLabeling, config: PointConfig, R_list=(), annuli=(),
                    axes=("horizontal", "vertical")) -> CrossingReport:
    origin, annulus, edges, wit = {}, {}, {}, {}
    for R in R_list:
        w = origin_box_witnesses(labeling, config, R)
        origin[float(R)] = bool(w.size)
        wit[f"origin_to_box:{R}"] = w.tolist()
    for R_in, R_out in annuli:
        w = annulus_crossing_witnesses(labeling, R_in, R_out)
        annulus[(float(R_in), float(R_out))] = int(w.size)
        wit[f"annulus:{R_in},{R_out}"] = w.tolist()
    for ax in axes:
        w = edge_crossing_witnesses(labeling, ax)
        edges[str(ax)] = bool(w.size)
        wit[f"edge:{ax}"] = w.tolist()
    return CrossingReport(labeling.radius, labeling.n_points, labeling.n_clusters,
                          labeling.largest_cluster_size, origin, annulus, edges, wit)
