"""
Ring Benchmark Module
Samplers and diagnostics for the 8-Gaussian ring mode-coverage benchmark.
"""

from .data import GaussianRingSpec, NoiseSpec, RngStream, sample_noise, sample_real
from .metrics import CsvMetricsSink, KdeGrid, MemorySink, MetricsRecord, ModeReport
from .metrics import kde_grid, mode_coverage

__all__ = [
    'GaussianRingSpec',
    'NoiseSpec',
    'RngStream',
    'sample_noise',
    'sample_real',
    'CsvMetricsSink',
    'KdeGrid',
    'MemorySink',
    'MetricsRecord',
    'ModeReport',
    'kde_grid',
    'mode_coverage',
]
