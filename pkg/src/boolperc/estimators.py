"""Monte Carlo estimators: crossing curves, critical radius, holes, uniqueness, field minima.

Every estimator evaluates replicas ``0..n-1`` of a ``SamplerSpec`` and reduces
them in replica order, so results do not depend on the thread count.  Sweeps
over ``r`` reuse the same sampled configurations (common random numbers),
which makes every crossing statistic monotone in ``r`` replica by replica.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .boolean_graph import build_clusters, count_annulus_crossing_clusters, edge_to_edge_crossing
from .gaf import GafPolynomial, _RingEvaluator, evaluate_normalized_gaf
from .sampler import DEFAULT_BUFFER, SamplerSpec, sample
from .seeding import derive_rng, derive_seed

WILSON_Z = 1.959963984540054  # two-sided 95% normal quantile
# Poisson Boolean model: critical mean number of neighbours lambda*pi*(2r)^2 is about 4.51.
POISSON_CRITICAL_DEGREE = 4.51


def wilson_interval(n_hits: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = n_hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if n_hits == 0 else min(max(0.0, centre - half), p)
    hi = 1.0 if n_hits == n else max(min(1.0, centre + half), p)
    return lo, hi


@dataclass(frozen=True)
class MCEstimate:
    n_hits: int
    n_samples: int
    seed_lineage: dict = field(default_factory=dict)
    p_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        if self.n_samples < 1 or not 0 <= self.n_hits <= self.n_samples:
            raise ValueError(f"invalid counts: {self.n_hits}/{self.n_samples}")
        lo, hi = wilson_interval(self.n_hits, self.n_samples)
        object.__setattr__(self, "p_hat", self.n_hits / self.n_samples)
        object.__setattr__(self, "ci_low", lo)
        object.__setattr__(self, "ci_high", hi)

    @property
    def censored(self) -> bool:
        return self.n_hits == 0

    @property
    def upper_bound(self) -> float:
        """Rule-of-three 95% upper bound when no hits were seen, else the Wilson bound."""
        return 3.0 / self.n_samples if self.n_hits == 0 else self.ci_high

    def separated_below(self, other: "MCEstimate") -> bool:
        return self.ci_high < other.ci_low

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_samples": self.n_samples,
            "n_hits": self.n_hits,
            "censored": self.censored,
            "upper_bound": self.upper_bound,
            "seed_lineage": dict(self.seed_lineage),
        }


def _lineage(spec: SamplerSpec, n: int, **extra) -> dict:
    return {"master_seed": spec.master_seed, "process": spec.process, "replicas": [0, n], **extra}


def map_replicas(fn, n: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(n-1)]``, optionally on a thread pool; order is always by index."""
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def sample_configs(spec: SamplerSpec, n: int, threads: int = 1) -> list:
    return map_replicas(lambda i: sample(spec, i), n, threads)


# ---------------------------------------------------------------------------
# crossing and critical radius

def crossing_matrix(configs, r_values, axis="horizontal") -> np.ndarray:
    """Boolean ``(n_configs, n_r)`` array of edge-to-edge crossing indicators."""
    out = np.zeros((len(configs), len(r_values)), dtype=bool)
    for a, cfg in enumerate(configs):
        for b, r in enumerate(r_values):
            out[a, b] = edge_to_edge_crossing(build_clusters(cfg, r), cfg, axis)
    return out


def estimate_crossing_prob(spec: SamplerSpec, r: float, L: float, n: int,
                           threads: int = 1) -> MCEstimate:
    if n < 1:
        raise ValueError("n must be >= 1")
    spec_L = spec.with_half_width(L)

    def one(i):
        cfg = sample(spec_L, i)
        return edge_to_edge_crossing(build_clusters(cfg, r), cfg)

    hits = map_replicas(one, n, threads)
    return MCEstimate(int(sum(hits)), n, _lineage(spec_L, n, r=r, L=L))


def crossing_curve(spec: SamplerSpec, r_values, L: float, n: int, threads: int = 1):
    """Crossing estimates for every ``r`` from one shared set of ``n`` configurations."""
    spec_L = spec.with_half_width(L)
    configs = sample_configs(spec_L, n, threads)
    hits = crossing_matrix(configs, r_values)
    return [(float(r), MCEstimate(int(hits[:, b].sum()), n, _lineage(spec_L, n, r=float(r), L=L)))
            for b, r in enumerate(r_values)], hits


def initial_radius_guess(spec: SamplerSpec) -> float:
    return math.sqrt(POISSON_CRITICAL_DEGREE / (4.0 * math.pi * spec.point_intensity))


@dataclass(frozen=True)
class RcEstimate:
    r_hat: float
    bracket: tuple
    L: float
    target_prob: float
    status: str
    steps: list = field(default_factory=list)
    per_scale: list = field(default_factory=list)
    intensity: float = 1.0

    @property
    def mean_degree(self) -> float:
        """``lambda * pi * (2 r_hat)^2``, the expected neighbour count at ``r_hat``."""
        return self.intensity * math.pi * (2 * self.r_hat) ** 2

    def r_hat_at(self, L: float) -> float:
        for s in self.per_scale:
            if s["L"] == L:
                return s["r_hat"]
        raise KeyError(L)

    def to_dict(self) -> dict:
        return {
            "r_hat": self.r_hat,
            "bracket": list(self.bracket),
            "L": self.L,
            "target_prob": self.target_prob,
            "status": self.status,
            "mean_degree": self.mean_degree,
            "per_scale": self.per_scale,
            "steps": [{"r": r, **e.to_dict()} for r, e in self.steps],
        }


def _bisect_scale(configs, spec_L, lo, hi, target, tol, max_expand=30):
    n = len(configs)
    cache = {}

    def p(r):
        if r not in cache:
            hits = sum(edge_to_edge_crossing(build_clusters(c, r), c) for c in configs)
            cache[r] = MCEstimate(int(hits), n, _lineage(spec_L, n, r=r, L=spec_L.window.half_width))
        return cache[r].p_hat

    for _ in range(max_expand):
        if p(lo) < target:
            break
        lo /= 1.5
    for _ in range(max_expand):
        if p(hi) > target:
            break
        hi *= 1.5
    bracketed = p(lo) < target <= p(hi)
    while bracketed and hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if p(mid) < target:
            lo = mid
        else:
            hi = mid
    r_hat = 0.5 * (lo + hi)
    steps = sorted(cache.items())
    below = any(r < r_hat and e.ci_high < target for r, e in steps)
    above = any(r > r_hat and e.ci_low > target for r, e in steps)
    status = "ok" if bracketed and below and above else "inconclusive"
    return r_hat, (lo, hi), status, steps


def estimate_critical_radius(spec: SamplerSpec, L_schedule, n_per_step: int, tol: float,
                             target: float = 0.5, threads: int = 1, r0: float | None = None,
                             configs_by_L: dict | None = None) -> RcEstimate:
    """Bisection for ``P(crossing) = target`` at each ``L``, warm-started from the previous one.

    Each scale draws ``n_per_step`` configurations once and reuses them for
    every bisection step.  The final scale's result is reported; all scales
    are kept in ``per_scale``.
    """
    L_schedule = [float(L) for L in L_schedule]
    if not L_schedule or any(b <= a for a, b in zip(L_schedule, L_schedule[1:])):
        raise ValueError("L_schedule must be a non-empty increasing list")
    if not tol > 0:
        raise ValueError("tol must be positive")
    r_guess = initial_radius_guess(spec) if r0 is None else r0
    lo, hi = r_guess / 1.5, r_guess * 1.5
    per_scale, steps, status, bracket, r_hat = [], [], "inconclusive", (lo, hi), r_guess
    for idx, L in enumerate(L_schedule):
        spec_L = spec.with_half_width(L).with_seed(derive_seed(spec.master_seed, "rc", idx))
        if configs_by_L is not None and L in configs_by_L:
            configs = configs_by_L[L]
        else:
            configs = sample_configs(spec_L, n_per_step, threads)
        r_hat, bracket, status, steps = _bisect_scale(configs, spec_L, lo, hi, target, tol)
        per_scale.append({"L": L, "r_hat": r_hat, "bracket": list(bracket), "status": status,
                          "master_seed": spec_L.master_seed, "n": len(configs)})
        lo, hi = 0.9 * r_hat, 1.1 * r_hat
    return RcEstimate(r_hat, bracket, L_schedule[-1], target, status, steps, per_scale,
                      spec.point_intensity)


# ---------------------------------------------------------------------------
# holes and overcrowding

@dataclass(frozen=True)
class DiskRegion:
    R: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("disk radius must be >= 0")

    @property
    def area(self) -> float:
        return math.pi * self.R**2

    @property
    def bbox(self):
        cx, cy = self.center
        return cx - self.R, cx + self.R, cy - self.R, cy + self.R

    def cell_counts(self, points: np.ndarray) -> np.ndarray:
        if self.R == 0:
            return np.zeros(1, dtype=np.int64)
        d = np.hypot(points[:, 0] - self.center[0], points[:, 1] - self.center[1])
        return np.array([np.count_nonzero(d <= self.R)], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"kind": "disk", "R": self.R, "center": list(self.center)}


@dataclass(frozen=True)
class SquareChain:
    """A connected union of standard squares ``(i, j)`` of side ``theta``."""

    theta: float
    squares: tuple

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        sq = tuple((int(i), int(j)) for i, j in self.squares)
        if len(set(sq)) != len(sq):
            raise ValueError("squares must be distinct")
        if sq and not _connected8(sq):
            raise ValueError("squares must form an 8-connected union")
        object.__setattr__(self, "squares", sq)

    @classmethod
    def row(cls, theta: float, L: int) -> "SquareChain":
        """``1 x L`` chain ``(i, 0)`` for ``i = -(L//2) .. L - 1 - L//2``; nested in ``L``."""
        lo = -(L // 2)
        return cls(theta, tuple((i, 0) for i in range(lo, lo + L)))

    @property
    def area(self) -> float:
        return len(self.squares) * self.theta**2

    @property
    def bbox(self):
        if not self.squares:
            return 0.0, 0.0, 0.0, 0.0
        i = [s[0] for s in self.squares]
        j = [s[1] for s in self.squares]
        t = self.theta
        return min(i) * t, (max(i) + 1) * t, min(j) * t, (max(j) + 1) * t

    def cell_counts(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.squares), dtype=np.int64)
        if not self.squares or len(points) == 0:
            return out
        ij = np.floor(points / self.theta).astype(np.int64)
        index = {s: a for a, s in enumerate(self.squares)}
        for key in map(tuple, ij):
            a = index.get(key)
            if a is not None:
                out[a] += 1
        return out

    def to_dict(self) -> dict:
        return {"kind": "square_chain", "theta": self.theta, "squares": [list(s) for s in self.squares]}


def _connected8(squares) -> bool:
    todo = set(squares)
    stack = [squares[0]]
    todo.discard(squares[0])
    while stack:
        i, j = stack.pop()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                t = (i + di, j + dj)
                if t in todo:
                    todo.discard(t)
                    stack.append(t)
    return not todo


def _check_region(spec: SamplerSpec, region):
    x0, x1, y0, y1 = spec.window.bounds
    a, b, c, d = region.bbox
    if a < x0 or b > x1 or c < y0 or d > y1:
        raise ValueError(f"region {region.to_dict()} is not inside the sampling window "
                         f"{spec.window.to_dict()}")


def collect_region_counts(spec: SamplerSpec, regions, n: int, threads: int = 1) -> list:
    """Per-replica cell counts for several regions from one pass over the samples.

    Returns one ``(n, n_cells)`` integer array per region.
    """
    for region in regions:
        _check_region(spec, region)

    def one(i):
        pts = sample(spec, i).points
        return [region.cell_counts(pts) for region in regions]

    rows = map_replicas(one, n, threads)
    return [np.array([row[a] for row in rows]).reshape(n, -1) for a in range(len(regions))]


def hole_estimate_from_counts(counts: np.ndarray, lineage: dict) -> MCEstimate:
    return MCEstimate(int(np.count_nonzero(counts.sum(axis=1) == 0)), counts.shape[0], lineage)


def overcrowding_estimate_from_counts(counts: np.ndarray, k: int, lineage: dict) -> MCEstimate:
    return MCEstimate(int(np.count_nonzero((counts >= k).all(axis=1))), counts.shape[0], lineage)


def estimate_hole_probability(spec: SamplerSpec, region, n: int, threads: int = 1) -> MCEstimate:
    (counts,) = collect_region_counts(spec, [region], n, threads)
    return hole_estimate_from_counts(counts, _lineage(spec, n, region=region.to_dict()))


def estimate_overcrowding_probability(spec: SamplerSpec, region: SquareChain, k: int, n: int,
                                      threads: int = 1) -> MCEstimate:
    if k < 0:
        raise ValueError("k must be >= 0")
    (counts,) = collect_region_counts(spec, [region], n, threads)
    return overcrowding_estimate_from_counts(counts, k, _lineage(spec, n, region=region.to_dict(), k=k))


@dataclass(frozen=True)
class DecayFit:
    pairs: list
    slope: float
    intercept: float
    r_squared: float
    censored: list

    def to_dict(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs], "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared,
                "censored": list(self.censored)}


class InsufficientDataError(ValueError):
    pass


def fit_exponential_decay(pairs) -> DecayFit:
    """Least-squares fit of ``log p`` against scale; zero-hit scales are censored.

    ``pairs`` holds ``(scale, MCEstimate)`` or ``(scale, p)`` entries.
    """
    scales, probs, censored = [], [], []
    for scale, est in pairs:
        p = est.p_hat if isinstance(est, MCEstimate) else float(est)
        scales.append(float(scale))
        probs.append(p)
        censored.append(p <= 0.0)
    use = [i for i, c in enumerate(censored) if not c]
    if len(use) < 3:
        raise InsufficientDataError(
            f"need >= 3 uncensored pairs, got {len(use)} (censored scales: "
            f"{[scales[i] for i, c in enumerate(censored) if c]})")
    x = np.array([scales[i] for i in use])
    y = np.log([probs[i] for i in use])
    res = stats.linregress(x, y)
    r2 = float(res.rvalue**2) if np.ptp(y) > 0 else 1.0
    return DecayFit(list(zip(scales, probs)), float(res.slope), float(res.intercept), r2, censored)


# ---------------------------------------------------------------------------
# uniqueness

def estimate_uniqueness_curve(spec: SamplerSpec, r: float, L_list, n: int,
                              threads: int = 1) -> list:
    """``P(at least 2 clusters cross the annulus L/4 .. 3L/4)`` for each ``L``."""
    out = []
    for idx, L in enumerate(L_list):
        spec_L = spec.with_half_width(L).with_seed(derive_seed(spec.master_seed, "unique", idx))
        counts = map_replicas(
            lambda i: count_annulus_crossing_clusters(build_clusters(sample(spec_L, i), r), L / 4, 3 * L / 4),
            n, threads)
        hits = int(sum(c >= 2 for c in counts))
        out.append((float(L), MCEstimate(hits, n, _lineage(spec_L, n, r=r, L=L))))
    return out


# ---------------------------------------------------------------------------
# field minimum on circles

def draw_field_polynomial(master_seed: int, replica: int, degree: int) -> GafPolynomial:
    rng = derive_rng(master_seed, "fieldmin", replica)
    while True:
        g = rng.standard_normal((degree + 1, 2))
        xi = (g[:, 0] + 1j * g[:, 1]) / math.sqrt(2.0)
        if xi[-1] != 0:
            return GafPolynomial(xi)


def circle_minimum(poly: GafPolynomial, R: float, start_nodes: int = 256, max_nodes: int = 1 << 16,
                   threshold: float | None = None, polish: int = 3) -> float:
    """Minimum of ``|f*|`` on ``|z| = R``.

    Nodes double from ``start_nodes`` until the discrete minimum changes by
    less than 1%; the deepest few discrete minima are then refined with a
    bounded scalar search in the angle.  Stops early once the minimum is at
    or below ``threshold``.
    """
    ev = _RingEvaluator(poly)
    M = start_nodes
    prev = None
    while True:
        vals = np.abs(ev(R, M, scaled=False)[0])
        m = float(vals.min())
        if threshold is not None and m <= threshold:
            return m
        if prev is not None and abs(m - prev) <= 0.01 * prev or M >= max_nodes:
            break
        prev, M = m, 2 * M
    best = m
    step = 2 * math.pi / M
    left, right = np.roll(vals, 1), np.roll(vals, -1)
    local = np.flatnonzero((vals <= left) & (vals <= right))
    for idx in local[np.argsort(vals[local])[:polish]]:
        a = idx * step
        res = optimize.minimize_scalar(
            lambda t: abs(evaluate_normalized_gaf(poly, R * np.exp(1j * t))),
            bounds=(a - step, a + step), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
        if threshold is not None and best <= threshold:
            break
    return best


def estimate_field_min_tail(nu: float, R: float, n: int, master_seed: int = 0,
                            buffer: float = DEFAULT_BUFFER, degree: int | None = None,
                            threads: int = 1) -> MCEstimate:
    """``P(min_{|z|=R} |f*(z)| <= exp(-nu R^2))`` for the truncated GAF."""
    if not nu > 2:
        raise ValueError(f"nu must exceed 2, got {nu}")
    if not R > 1:
        raise ValueError(f"R must exceed 1, got {R}")
    deg = degree if degree is not None else int(math.ceil((R + buffer) ** 2))
    thr = math.exp(-nu * R * R)
    hits = map_replicas(
        lambda i: circle_minimum(draw_field_polynomial(master_seed, i, deg), R, threshold=thr) <= thr,
        n, threads)
    lineage = {"master_seed": master_seed, "process": "gaf", "replicas": [0, n],
               "nu": nu, "R": R, "degree": deg}
    return MCEstimate(int(sum(hits)), n, lineage)
