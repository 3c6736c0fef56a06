"""
Benchmark Data
Samplers for the 8-Gaussian ring (real data) and the generator's uniform
noise prior, plus the splittable random stream every sampler draws from.
"""

import logging
import zlib
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..engine.errors import ContractError

logger = logging.getLogger(__name__)


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


class RngStream:
    """
    Deterministic random stream derived from (seed, label path).

    Child streams are derived with numpy's SeedSequence spawn keys, so a
    child's output depends only on the seed and its label path, never on
    how much the parent has been drawn from.
    """

    def __init__(self, seed: int, label: str = "root", path: Tuple[int, ...] = ()):
        self.seed = int(seed)
        self.label = label
        self.path = tuple(path)
        self.counter = 0
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}", self.path + (_label_key(label),))

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        self.counter += 1
        return self._generator.uniform(low, high, size)

    def normal(self, loc: float, scale: float, size) -> np.ndarray:
        self.counter += 1
        return self._generator.normal(loc, scale, size)

    def integers(self, low: int, high: int, size) -> np.ndarray:
        self.counter += 1
        return self._generator.integers(low, high, size)

    def state(self) -> Dict[str, Any]:
        """JSON-serializable snapshot, restorable with from_state()"""
        return {
            "seed": self.seed,
            "label": self.label,
            "path": list(self.path),
            "counter": self.counter,
            "bit_generator": self._generator.bit_generator.state,
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "RngStream":
        stream = cls(state["seed"], state["label"], tuple(state["path"]))
        stream.counter = state["counter"]
        stream._generator.bit_generator.state = state["bit_generator"]
        return stream

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r}, counter={self.counter})"


class GaussianRingSpec(BaseModel):
    """Mixture of n_modes isotropic Gaussians with centers evenly spaced on a circle"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_modes: int = Field(default=8, ge=1)
    radius: float = Field(default=2.0, gt=0.0)
    sigma: float = Field(default=0.02, gt=0.0)

    @property
    def centers(self) -> np.ndarray:
        angles = 2.0 * np.pi * np.arange(self.n_modes) / self.n_modes
        return self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


class NoiseSpec(BaseModel):
    """Generator noise prior: i.i.d. uniform entries on [low, high]"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: int = Field(default=256, gt=0)
    distribution: Literal["uniform"] = "uniform"
    low: float = -1.0
    high: float = 1.0


def _check_count(n: int) -> None:
    if n <= 0:
        raise ContractError(f"Sample count must be positive, got {n}")


def sample_real(spec: GaussianRingSpec, n: int, rng: RngStream) -> np.ndarray:
    """
    Draw n points from the ring mixture.

    Returns:
        np.ndarray: (n, 2) array; each row is a uniformly chosen center plus N(0, sigma^2 I)
    """
    _check_count(n)
    modes = rng.integers(0, spec.n_modes, n)
    offsets = rng.normal(0.0, spec.sigma, (n, 2))
    return spec.centers[modes] + offsets


def sample_noise(spec: NoiseSpec, n: int, rng: RngStream) -> np.ndarray:
    """Draw an (n, dim) batch of uniform noise"""
    _check_count(n)
    return rng.uniform(spec.low, spec.high, (n, spec.dim))


class BatchSampler:
    """
    Training-time batches, drawn from separate child streams.

    variation batches train offspring, evaluation batches score them, and
    the penalty stream draws gradient-penalty interpolation weights; keeping
    them apart means scoring never shifts the training data sequence.
    """

    def __init__(self, ring: GaussianRingSpec, noise: NoiseSpec, rng: RngStream):
        self.ring = ring
        self.noise = noise
        self.variation = rng.child("variation")
        self.evaluation = rng.child("evaluation")
        self.penalty = rng.child("gradient_penalty")

    def variation_batch(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """(real points, noise) for one variation step"""
        return sample_real(self.ring, n, self.variation), sample_noise(self.noise, n, self.variation)

    def variation_noise(self, n: int) -> np.ndarray:
        return sample_noise(self.noise, n, self.variation)

    def evaluation_batch(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """(real points, noise) shared by every offspring scored in one round"""
        return sample_real(self.ring, n, self.evaluation), sample_noise(self.noise, n, self.evaluation)

    def state(self) -> Dict[str, Any]:
        return {
            "variation": self.variation.state(),
            "evaluation": self.evaluation.state(),
            "gradient_penalty": self.penalty.state(),
        }

    def restore(self, state: Dict[str, Any]) -> None:
        """Continue every child stream from a state() snapshot"""
        self.variation = RngStream.from_state(state["variation"])
        self.evaluation = RngStream.from_state(state["evaluation"])
        self.penalty = RngStream.from_state(state["gradient_penalty"])


def write_batch_csv(batch: np.ndarray, path: Path, columns: Optional[Sequence[str]] = None) -> Path:
    """Dump a 2-D batch to CSV (full float precision)"""
    batch = np.asarray(batch)
    if columns is None:
        columns = [f"x{i}" for i in range(batch.shape[1])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(batch, columns=list(columns)).to_csv(path, index=False)
    logger.info(f"Wrote {len(batch)} rows to {path}")
    return path
