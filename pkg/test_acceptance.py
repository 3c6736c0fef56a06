"""
Desk-scale convergence runs on the 8-Gaussian ring.

Deselected by default; run with `pytest -m slow test_acceptance.py`.
Each run stops at the first metrics row with every mode covered.
"""

import statistics
from pathlib import Path
from typing import Dict, List, Optional

import pytest

from config import load_config
from src.benchmark.metrics import MetricsRecord
from src.workflows.cde_gan import train

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parent / "configs"
SEEDS = (0, 1, 2)
MIN_HQ_RATIO = 0.80
MAX_ITERATIONS = 100_000


class Converged(Exception):
    def __init__(self, iteration: int):
        super().__init__(f"converged at iteration {iteration}")
        self.iteration = iteration


class ConvergenceSink:
    """Stops training at the first record with all modes covered at high quality"""

    def __init__(self, n_modes: int):
        self.n_modes = n_modes

    def emit(self, record: MetricsRecord) -> None:
        if record.covered_modes == self.n_modes and record.hq_ratio >= MIN_HQ_RATIO:
            raise Converged(record.iteration)

    def close(self) -> None:
        pass


def iterations_to_converge(architecture: str, seed: int) -> Optional[int]:
    config = load_config(
        CONFIG_DIR / f"toy_{architecture}.toml",
        [f"train.seed={seed}", f"train.T={MAX_ITERATIONS}", "output.metrics_interval=250", "output.progress=false"],
    )
    try:
        train(config, sinks=[ConvergenceSink(config.ring.n_modes)])
    except Converged as e:
        return e.iteration
    return None


@pytest.fixture(scope="module")
def convergence() -> Dict[str, List[Optional[int]]]:
    runs = {arch: [iterations_to_converge(arch, seed) for seed in SEEDS] for arch in ("mlp3", "mlp4")}
    print(f"Iterations to 8/8 modes per seed {SEEDS}: {runs}")
    return runs


def _median(iterations: List[Optional[int]]) -> float:
    return statistics.median(float("inf") if i is None else i for i in iterations)


def test_mlp3_covers_every_mode_on_two_of_three_seeds(convergence):
    assert sum(i is not None for i in convergence["mlp3"]) >= 2, convergence["mlp3"]


def test_mlp4_covers_every_mode_on_two_of_three_seeds(convergence):
    assert sum(i is not None for i in convergence["mlp4"]) >= 2, convergence["mlp4"]


def test_mlp4_converges_no_slower_than_mlp3(convergence):
    assert _median(convergence["mlp4"]) <= 1.25 * _median(convergence["mlp3"]), convergence
