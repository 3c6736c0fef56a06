"""
Benchmark Metrics
Mode coverage and high-quality ratio on the Gaussian ring, KDE grids for
density plots, and the per-iteration metrics CSV.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, TextIO

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from ..engine.errors import ContractError
from .data import GaussianRingSpec

logger = logging.getLogger(__name__)


class ModeReport(BaseModel):
    """How many ring modes a batch of samples covers, and how tightly"""

    covered_modes: int = Field(ge=0)
    hq_ratio: float = Field(ge=0.0, le=1.0)
    per_mode_counts: List[int]
    n_samples: int
    min_count: int


def mode_coverage(
    samples: np.ndarray,
    spec: GaussianRingSpec,
    threshold_sigmas: float = 3.0,
    min_mode_fraction: float = 0.01,
) -> ModeReport:
    """
    Count high-quality samples per mode.

    A sample is high quality when its nearest center is within
    threshold_sigmas * sigma. A mode is covered when it holds at least
    max(1, ceil(min_mode_fraction * n)) high-quality samples.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 2 or len(samples) == 0:
        raise ContractError(f"Expected a non-empty (n, 2) sample array, got {samples.shape}")
    if threshold_sigmas <= 0:
        raise ContractError("threshold_sigmas must be positive")

    n = len(samples)
    distances = np.linalg.norm(samples[:, None, :] - spec.centers[None, :, :], axis=2)
    nearest = distances.argmin(axis=1)
    high_quality = distances[np.arange(n), nearest] <= threshold_sigmas * spec.sigma

    counts = np.bincount(nearest[high_quality], minlength=spec.n_modes)
    min_count = max(1, math.ceil(min_mode_fraction * n))
    return ModeReport(
        covered_modes=int(np.sum(counts >= min_count)),
        hq_ratio=float(high_quality.sum()) / n,
        per_mode_counts=[int(c) for c in counts],
        n_samples=n,
        min_count=min_count,
    )


@dataclass
class KdeGrid:
    """Gaussian KDE evaluated at cell centers; density is indexed [y, x]"""

    x: np.ndarray
    y: np.ndarray
    bandwidth: float
    extent: float
    density: np.ndarray

    @property
    def resolution(self) -> int:
        return len(self.x)

    @property
    def cell_area(self) -> float:
        return (2.0 * self.extent / self.resolution) ** 2

    def total_mass(self) -> float:
        return float(self.density.sum() * self.cell_area)

    def to_frame(self) -> pd.DataFrame:
        xx, yy = np.meshgrid(self.x, self.y)
        return pd.DataFrame({"x": xx.reshape(-1), "y": yy.reshape(-1), "density": self.density.reshape(-1)})


def kde_grid(
    samples: np.ndarray,
    resolution: int = 200,
    bandwidth: float = 0.1,
    extent: float = 2.5,
) -> KdeGrid:
    """
    Isotropic Gaussian KDE on a uniform grid over [-extent, extent]^2.

    The kernel is separable, so the grid is one (R x n) @ (n x R) product.
    The result is renormalized so that density * cell_area sums to 1 on the grid.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 2 or len(samples) == 0:
        raise ContractError(f"Expected a non-empty (n, 2) sample array, got {samples.shape}")
    if bandwidth <= 0 or resolution < 1:
        raise ContractError("bandwidth must be positive and resolution at least 1")

    edges = np.linspace(-extent, extent, resolution + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    scale = 2.0 * bandwidth * bandwidth
    kernel_x = np.exp(-((centers[:, None] - samples[None, :, 0]) ** 2) / scale)
    kernel_y = np.exp(-((centers[:, None] - samples[None, :, 1]) ** 2) / scale)
    density = kernel_y @ kernel_x.T / (len(samples) * np.pi * scale)

    grid = KdeGrid(x=centers, y=centers.copy(), bandwidth=bandwidth, extent=extent, density=density)
    mass = grid.total_mass()
    if mass > 0:
        grid.density = density / mass
    else:
        logger.warning("KDE grid holds no mass; samples lie outside the plotting window")
    return grid


def write_kde_csv(grid: KdeGrid, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid.to_frame().to_csv(path, index=False)
    return path


def read_kde_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


class MetricsRecord(BaseModel):
    """One metrics row, emitted after a generator iteration"""

    iteration: int = Field(ge=0)
    wall_clock: float = 0.0
    g_fitness: List[float]
    g_mutations: List[str]
    g_survivor_mutations: List[str]
    d_fitness: List[float]
    d_survivor_indices: List[int]
    covered_modes: int
    hq_ratio: float
    d_grad_norm_mean: float


def metrics_columns(n_generator_offspring: int, n_discriminator_offspring: int) -> List[str]:
    """Fixed column order of the metrics CSV"""
    return (
        ["iter", "t_wall_s"]
        + [f"g_fit_{i}" for i in range(1, n_generator_offspring + 1)]
        + [f"g_mut_{i}" for i in range(1, n_generator_offspring + 1)]
        + ["g_survivor_muts"]
        + [f"d_fit_{i}" for i in range(1, n_discriminator_offspring + 1)]
        + ["d_survivor_idx", "covered_modes", "hq_ratio", "d_grad_norm_mean"]
    )


class MemorySink:
    """Keeps emitted records in a list"""

    def __init__(self):
        self.records: List[MetricsRecord] = []

    def emit(self, record: MetricsRecord) -> None:
        self.records.append(record)

    def close(self) -> None:
        pass


class CsvMetricsSink:
    """
    Append-only metrics CSV with a fixed column schema.

    The header is written on open, so a run that emits nothing still
    leaves a valid (header-only) file. Every row is flushed immediately.
    """

    def __init__(self, path: Path, n_generator_offspring: int, n_discriminator_offspring: int):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.columns = metrics_columns(n_generator_offspring, n_discriminator_offspring)
        self.n_g = n_generator_offspring
        self.n_d = n_discriminator_offspring
        self._last_iteration: Optional[int] = None
        self._handle: Optional[TextIO] = self.path.open("w", newline="")
        pd.DataFrame(columns=self.columns).to_csv(self._handle, index=False)
        self._handle.flush()

    def emit(self, record: MetricsRecord) -> None:
        if self._handle is None:
            raise ContractError(f"Metrics sink {self.path} is closed")
        if self._last_iteration is not None and record.iteration <= self._last_iteration:
            raise ContractError(
                f"Metrics iterations must increase: {record.iteration} after {self._last_iteration}"
            )
        if len(record.g_fitness) != self.n_g or len(record.d_fitness) != self.n_d:
            raise ContractError("Metrics record does not match the sink's column schema")

        row = (
            [record.iteration, record.wall_clock]
            + list(record.g_fitness)
            + list(record.g_mutations)
            + ["|".join(record.g_survivor_mutations)]
            + list(record.d_fitness)
            + ["|".join(str(i) for i in record.d_survivor_indices)]
            + [record.covered_modes, record.hq_ratio, record.d_grad_norm_mean]
        )
        pd.DataFrame([row], columns=self.columns).to_csv(self._handle, header=False, index=False)
        self._handle.flush()
        self._last_iteration = record.iteration

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def read_metrics(path: Path) -> pd.DataFrame:
    """Parse a metrics CSV back with exact float round-tripping"""
    return pd.read_csv(path, float_precision="round_trip", dtype={"g_survivor_muts": str, "d_survivor_idx": str})
