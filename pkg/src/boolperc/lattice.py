"""Standard-square discretization: occupancy grids, k-full paths, empty circuits.

Square ``(i, j)`` is ``[i*theta, (i+1)*theta) x [j*theta, (j+1)*theta)`` (half-open, so
occupancy is a partition of the points).  Squares are 8-neighbours when their
index differences are at most 1 in each coordinate.

For an integer ``L`` the box ``B_{L*theta}`` is tiled by the squares with
``-L <= i, j <= L-1``.  The *origin squares* are the four whose closures contain
0, and the *ring* is the layer of squares touching ``W_{L*theta}``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .boolean_graph import build_clusters, origin_box_witnesses
from .pointconfig import PointConfig

ORIGIN_SQUARES = ((0, 0), (-1, 0), (0, -1), (-1, -1))
_NEIGH8 = tuple((di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj)


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Point counts per standard square; ``counts[a, b]`` is square ``(i_min+a, j_min+b)``."""

    theta: float
    counts: np.ndarray
    i_min: int = 0
    j_min: int = 0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 2 or (c < 0).any():
            raise ValueError("counts must be a 2-D array of non-negative integers")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def extent(self) -> tuple[int, int, int, int]:
        """Inclusive index bounds ``(i_min, i_max, j_min, j_max)``."""
        ni, nj = self.counts.shape
        return self.i_min, self.i_min + ni - 1, self.j_min, self.j_min + nj - 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, i: int, j: int) -> int:
        a, b = i - self.i_min, j - self.j_min
        if 0 <= a < self.counts.shape[0] and 0 <= b < self.counts.shape[1]:
            return int(self.counts[a, b])
        return 0

    def covers(self, L: int) -> bool:
        i0, i1, j0, j1 = self.extent
        return i0 <= -L and j0 <= -L and i1 >= L - 1 and j1 >= L - 1

    def box(self, L: int) -> np.ndarray:
        """Counts of the ``2L x 2L`` squares tiling ``B_{L*theta}``; row ``a`` is ``i = a - L``."""
        out = np.zeros((2 * L, 2 * L), dtype=np.int64)
        i0, i1, j0, j1 = self.extent
        a0, a1 = max(i0, -L), min(i1, L - 1)
        b0, b1 = max(j0, -L), min(j1, L - 1)
        if a0 <= a1 and b0 <= b1:
            out[a0 + L:a1 + L + 1, b0 + L:b1 + L + 1] = \
                self.counts[a0 - i0:a1 - i0 + 1, b0 - j0:b1 - j0 + 1]
        return out

    @classmethod
    def from_box(cls, theta: float, box_counts) -> "OccupancyGrid":
        """Grid whose array is exactly the ``2L x 2L`` box around the origin."""
        c = np.asarray(box_counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] % 2:
            raise ValueError("box counts must be a square array of even side")
        L = c.shape[0] // 2
        return cls(theta, c, -L, -L)

    def to_csv_text(self) -> str:
        rows = ["i,j,count"]
        ni, nj = self.counts.shape
        for a in range(ni):
            for b in range(nj):
                rows.append(f"{self.i_min + a},{self.j_min + b},{int(self.counts[a, b])}")
        return "\n".join(rows) + "\n"


def occupancy(config: PointConfig, theta: float) -> OccupancyGrid:
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    x0, x1, y0, y1 = config.window.bounds
    i_min, i_max = math.floor(x0 / theta), math.floor(x1 / theta)
    j_min, j_max = math.floor(y0 / theta), math.floor(y1 / theta)
    counts = np.zeros((i_max - i_min + 1, j_max - j_min + 1), dtype=np.int64)
    if len(config):
        ij = np.floor(config.points / theta).astype(np.int64)
        np.add.at(counts, (ij[:, 0] - i_min, ij[:, 1] - j_min), 1)
    return OccupancyGrid(theta, counts, i_min, j_min)


@dataclass(frozen=True)
class LatticePath:
    squares: tuple
    k: int | None = None
    non_repeating: bool = field(init=False)

    def __post_init__(self):
        sq = tuple((int(i), int(j)) for i, j in self.squares)
        for (a, b), (c, d) in zip(sq, sq[1:]):
            if max(abs(a - c), abs(b - d)) != 1:
                raise ValueError(f"squares {(a, b)} and {(c, d)} are not 8-neighbours")
        object.__setattr__(self, "squares", sq)
        object.__setattr__(self, "non_repeating", len(set(sq)) == len(sq))

    def __len__(self) -> int:
        return len(self.squares)

    def is_k_full(self, grid: OccupancyGrid, k: int) -> bool:
        return all(grid.count(i, j) >= k for i, j in self.squares)

    def to_list(self) -> list:
        return [list(s) for s in self.squares]


def _in_box(i, j, L):
    return -L <= i <= L - 1 and -L <= j <= L - 1


def _on_ring(i, j, L):
    return i in (-L, L - 1) or j in (-L, L - 1)


def _flood8(grid: OccupancyGrid, k: int, L: int):
    """BFS over k-full squares of the box from the k-full origin squares.

    Returns ``(parent, reached_ring_square)``; parent maps each visited square
    to its predecessor (``None`` for the starts).
    """
    parent = {}
    queue = deque()
    for s in ORIGIN_SQUARES:
        if _in_box(*s, L) and grid.count(*s) >= k:
            parent[s] = None
            queue.append(s)
    while queue:
        s = queue.popleft()
        if _on_ring(*s, L):
            return parent, s
        for di, dj in _NEIGH8:
            t = (s[0] + di, s[1] + dj)
            if t not in parent and _in_box(*t, L) and grid.count(*t) >= k:
                parent[t] = s
                queue.append(t)
    return parent, None


def find_k_full_lattice_path(grid: OccupancyGrid, k: int, L: int) -> LatticePath | None:
    """Shortest 8-connected path of squares with count >= k from an origin square to the ring."""
    if k < 0 or L < 1:
        raise ValueError(f"need k >= 0 and L >= 1, got k={k}, L={L}")
    parent, end = _flood8(grid, k, L)
    if end is None:
        return None
    path = [end]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return LatticePath(tuple(reversed(path)), k)


def empty_circuit(grid: OccupancyGrid, L: int) -> frozenset | None:
    """A set of empty squares in the box separating the origin squares from the ring.

    Let ``H`` be the 8-connected cluster of occupied squares grown from the
    occupied origin squares.  When ``H`` stays off the ring, its outer layer
    of 8-neighbours (all empty, all inside the box) together with any empty
    origin squares contains a 4-connected circuit around the origin, which
    blocks every 8-connected occupied path.  Returns that blocking set, or
    ``None`` if ``H`` reaches the ring.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    hull, end = _flood8(grid, 1, L)
    if end is not None:
        return None
    blocking = {s for s in ORIGIN_SQUARES if s not in hull}
    for s in hull:
        for di, dj in _NEIGH8:
            t = (s[0] + di, s[1] + dj)
            if t not in hull:
                blocking.add(t)
    return frozenset(blocking)


def exists_empty_circuit(grid: OccupancyGrid, L: int) -> bool:
    return empty_circuit(grid, L) is not None


@dataclass(frozen=True)
class Verdict:
    premise_holds: bool
    conclusion_holds: bool
    witness: list | None = None
    params: dict = field(default_factory=dict)

    @property
    def counterexample(self) -> bool:
        return self.premise_holds and not self.conclusion_holds

    def to_dict(self) -> dict:
        return {
            "premise_holds": self.premise_holds,
            "conclusion_holds": self.conclusion_holds,
            "witness_path": self.witness,
            "params": dict(self.params),
        }


def _check_box_inside(config: PointConfig, R: float):
    if R > config.window.half_width or not config.window.centered_at_origin:
        raise ValueError(f"box of half-width {R} must fit in an origin-centred window "
                         f"(half_width={config.window.half_width})")


def verify_discr1(config: PointConfig, r: float, L: int) -> Verdict:
    """Occupied lattice path at ``theta = r/sqrt(5)`` implies a continuum path to ``W_{L theta}``."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    theta = r / math.sqrt(5.0)
    R = L * theta
    _check_box_inside(config, R)
    path = find_k_full_lattice_path(occupancy(config, theta), 1, L)
    params = {"r": r, "theta": theta, "L": L}
    if path is None:
        return Verdict(False, True, None, params)
    ok = origin_box_witnesses(build_clusters(config, r), config, R).size > 0
    return Verdict(True, bool(ok), path.to_list(), params)


def verify_discr2(config: PointConfig, theta: float, k: int, L: int, r: float) -> Verdict:
    """Continuum path to ``W_{L theta}`` at radius ``r < theta/(18k)`` implies a k-full lattice path."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not (0 < r < theta / (18 * k)):
        raise ValueError(f"constraint violated: r < theta/(18k) (r={r}, theta={theta}, k={k})")
    R = L * theta
    _check_box_inside(config, R)
    params = {"r": r, "theta": theta, "k": k, "L": L}
    if origin_box_witnesses(build_clusters(config, r), config, R).size == 0:
        return Verdict(False, True, None, params)
    path = find_k_full_lattice_path(occupancy(config, theta), k, L)
    return Verdict(True, path is not None, None if path is None else path.to_list(), params)
