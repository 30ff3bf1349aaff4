"""Planar point configurations observed through a square window."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROCESS_TAGS = ("poisson", "ginibre", "gaf", "external")


@dataclass(frozen=True)
class Window:
    """Closed axis-aligned square ``center +/- half_width`` in each coordinate."""

    half_width: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def side(self) -> float:
        return 2.0 * self.half_width

    @property
    def area(self) -> float:
        return self.side**2

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        h = self.half_width
        return cx - h, cx + h, cy - h, cy + h

    @property
    def circumradius(self) -> float:
        """Largest distance from the origin to a point of the window."""
        cx, cy = self.center
        return math.hypot(abs(cx) + self.half_width, abs(cy) + self.half_width)

    @property
    def centered_at_origin(self) -> bool:
        return self.center == (0.0, 0.0)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        x0, x1, y0, y1 = self.bounds
        return (
            (pts[:, 0] >= x0 - tol)
            & (pts[:, 0] <= x1 + tol)
            & (pts[:, 1] >= y0 - tol)
            & (pts[:, 1] <= y1 + tol)
        )

    def contains_complex(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.contains(np.column_stack([z.real, z.imag]))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "half_width": self.half_width}

    @classmethod
    def from_dict(cls, d: dict) -> "Window":
        return cls(half_width=d["half_width"], center=tuple(d.get("center", (0.0, 0.0))))


@dataclass(frozen=True)
class SeedLineage:
    master_seed: int
    replica: int
    attempt: int = 0

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "replica": self.replica, "attempt": self.attempt}


@dataclass(frozen=True, eq=False)
class PointConfig:
    """A finite point configuration inside ``window``.

    ``points`` is an ``(N, 2)`` float array, read-only after construction.
    ``order`` is the matrix order / polynomial degree of the finite model the
    points came from (``None`` for Poisson and external data).
    """

    window: Window
    points: np.ndarray
    process_tag: str = "external"
    seed_lineage: SeedLineage | None = None
    order: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.process_tag not in PROCESS_TAGS:
            raise ValueError(f"unknown process tag {self.process_tag!r}")
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.all(self.window.contains(pts)):
            raise ValueError("every point must lie inside the closed window")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def has_distinct_points(self) -> bool:
        if len(self) < 2:
            return True
        return np.unique(self.points, axis=0).shape[0] == len(self)

    def metadata(self) -> dict:
        lineage = self.seed_lineage
        return {
            "process": self.process_tag,
            "window": self.window.to_dict(),
            "seed": None if lineage is None else lineage.master_seed,
            "replica": None if lineage is None else lineage.replica,
            "attempt": None if lineage is None else lineage.attempt,
            "n": self.order,
            "n_points": len(self),
        }


def atomic_write_text(path, text: str) -> None:
    """Write-temp-then-rename so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def points_to_csv_text(points) -> str:
    lines = ["x,y"]
    # repr() of a Python float is the shortest string that round-trips (<= 17 sig. digits)
    lines.extend(f"{float(x)!r},{float(y)!r}" for x, y in np.asarray(points, dtype=float).reshape(-1, 2))
    return "\n".join(lines) + "\n"


def write_point_config(config: PointConfig, csv_path) -> Path:
    """Write ``x,y`` CSV plus a sidecar ``.json`` with process/window/seed metadata."""
    csv_path = Path(csv_path)
    atomic_write_text(csv_path, points_to_csv_text(config.points))
    meta_path = csv_path.with_suffix(".json")
    atomic_write_text(meta_path, json.dumps(config.metadata(), indent=2, sort_keys=True) + "\n")
    return meta_path


def read_point_config(csv_path) -> PointConfig:
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["x", "y"]:
            raise ValueError(f"{csv_path}: expected header 'x,y', got {header}")
        pts = [(float(a), float(b)) for a, b in reader]
    meta_path = csv_path.with_suffix(".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        window = Window.from_dict(meta["window"])
        lineage = None
        if meta.get("seed") is not None:
            lineage = SeedLineage(meta["seed"], meta.get("replica") or 0, meta.get("attempt") or 0)
        return PointConfig(window, np.array(pts).reshape(-1, 2), meta.get("process", "external"),
                           lineage, meta.get("n"))
    arr = np.array(pts).reshape(-1, 2)
    half = float(np.max(np.abs(arr))) if len(arr) else 1.0
    return PointConfig(Window(max(half, 1e-12)), arr, "external")
