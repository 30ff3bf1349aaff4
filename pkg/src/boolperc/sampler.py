"""Samplers for the Poisson, Ginibre and GAF-zero point processes.

Each sampler is a pure function of ``(spec, replica)``.  The two repulsive
processes are sampled from their finite-``n`` versions (eigenvalues of an
``n x n`` Ginibre matrix, zeros of the degree-``n`` truncated GAF) with ``n``
large enough that the window sits ``buffer`` units inside the bulk disk of
radius ``sqrt(n)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .gaf import GafPolynomial, RootReconciliationError, find_polynomial_roots
from .pointconfig import PointConfig, SeedLineage, Window
from .seeding import derive_rng

log = logging.getLogger(__name__)

PROCESSES = ("poisson", "ginibre", "gaf")
DEFAULT_BUFFER = 5.0
MAX_ATTEMPTS = 8


@dataclass(frozen=True)
class SamplerSpec:
    process: str
    window: Window
    intensity: float = 1.0
    buffer: float = DEFAULT_BUFFER
    master_seed: int = 0

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"unknown process {self.process!r}; expected one of {PROCESSES}")
        if not self.intensity >= 0:
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")
        if not self.buffer >= 0:
            raise ValueError(f"buffer must be >= 0, got {self.buffer}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def order(self) -> int | None:
        """Matrix order / polynomial degree ``ceil((R_req + buffer)^2)``."""
        if self.process == "poisson":
            return None
        return int(math.ceil((self.window.circumradius + self.buffer) ** 2))

    @property
    def point_intensity(self) -> float:
        """Expected points per unit area in the bulk."""
        return self.intensity if self.process == "poisson" else 1.0 / math.pi

    def with_window(self, window: Window) -> "SamplerSpec":
        return replace(self, window=window)

    def with_half_width(self, half_width: float) -> "SamplerSpec":
        return replace(self, window=Window(half_width))

    def with_seed(self, master_seed: int) -> "SamplerSpec":
        return replace(self, master_seed=master_seed)

    def to_dict(self) -> dict:
        return {
            "process": self.process,
            "window": self.window.to_dict(),
            "intensity": self.intensity,
            "buffer": self.buffer,
            "master_seed": self.master_seed,
            "order": self.order,
        }


def _require_origin_window(spec: SamplerSpec):
    if not spec.window.centered_at_origin:
        raise ValueError(f"{spec.process} sampling needs a window centred at the origin")


def _lineage(spec, replica, attempt=0):
    return SeedLineage(spec.master_seed, int(replica), attempt)


def sample_poisson(spec: SamplerSpec, replica: int) -> PointConfig:
    if spec.intensity < 0:
        raise ValueError("intensity must be >= 0")
    rng = derive_rng(spec.master_seed, "poisson", replica)
    w = spec.window
    count = rng.poisson(spec.intensity * w.area)
    x0, x1, y0, y1 = w.bounds
    pts = np.column_stack([rng.uniform(x0, x1, count), rng.uniform(y0, y1, count)])
    return PointConfig(w, pts, "poisson", _lineage(spec, replica))


def ginibre_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n, 2))
    return (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2.0)


def ginibre_eigenvalues(n: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues of an ``n x n`` matrix of i.i.d. standard complex Gaussians."""
    return np.linalg.eigvals(ginibre_matrix(n, rng))


def _to_points(z: np.ndarray) -> np.ndarray:
    return np.column_stack([z.real, z.imag])


def sample_ginibre(spec: SamplerSpec, replica: int) -> PointConfig:
    _require_origin_window(spec)
    n = spec.order
    for attempt in range(MAX_ATTEMPTS):
        rng = derive_rng(spec.master_seed, "ginibre", replica, attempt)
        try:
            eig = ginibre_eigenvalues(n, rng)
        except np.linalg.LinAlgError as exc:
            log.warning("ginibre replica %d attempt %d: eigensolver failed (%s); resampling",
                        replica, attempt, exc)
            continue
        pts = _to_points(eig[spec.window.contains_complex(eig)])
        cfg = PointConfig(spec.window, pts, "ginibre", _lineage(spec, replica, attempt), n)
        if not cfg.has_distinct_points():
            log.warning("ginibre replica %d attempt %d: coincident eigenvalues; resampling",
                        replica, attempt)
            continue
        return cfg
    raise RuntimeError(f"ginibre replica {replica}: no valid draw in {MAX_ATTEMPTS} attempts")


def draw_gaf_polynomial(spec: SamplerSpec, replica: int, attempt: int = 0) -> GafPolynomial | None:
    """The truncated GAF behind ``sample_gaf_zeros(spec, replica)``; None if degenerate."""
    rng = derive_rng(spec.master_seed, "gaf", replica, attempt)
    n = spec.order
    g = rng.standard_normal((n + 1, 2))
    xi = (g[:, 0] + 1j * g[:, 1]) / math.sqrt(2.0)
    if xi[-1] == 0:
        return None
    return GafPolynomial(xi)


def sample_gaf_zeros(spec: SamplerSpec, replica: int) -> PointConfig:
    """Zeros of the degree-``n`` truncated GAF inside the window.

    Raises ``RootReconciliationError`` (with a diagnostic) when the roots
    cannot be certified; zeros are never silently dropped.
    """
    _require_origin_window(spec)
    for attempt in range(MAX_ATTEMPTS):
        poly = draw_gaf_polynomial(spec, replica, attempt)
        if poly is None:
            log.warning("gaf replica %d attempt %d: xi_n == 0; redrawing", replica, attempt)
            continue
        try:
            roots = find_polynomial_roots(poly, spec.window)
        except RootReconciliationError as exc:
            exc.diagnostic.update({"replica": int(replica), "attempt": attempt,
                                   "master_seed": spec.master_seed})
            raise
        cfg = PointConfig(spec.window, _to_points(roots), "gaf",
                          _lineage(spec, replica, attempt), poly.degree)
        if not cfg.has_distinct_points():
            log.warning("gaf replica %d attempt %d: coincident zeros; redrawing", replica, attempt)
            continue
        return cfg
    raise RuntimeError(f"gaf replica {replica}: no valid draw in {MAX_ATTEMPTS} attempts")


_SAMPLERS = {"poisson": sample_poisson, "ginibre": sample_ginibre, "gaf": sample_gaf_zeros}


def sample(spec: SamplerSpec, replica: int) -> PointConfig:
    return _SAMPLERS[spec.process](spec, replica)
