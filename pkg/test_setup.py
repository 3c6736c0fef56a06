"""
Test script to verify the CDE-GAN toolkit setup.
Tests dependencies, configuration, agent initialization and a short training
run, then runs every test_*.py module in this directory.

Run with `python test_setup.py` or `pytest`.
"""

import importlib
import inspect
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pytest

from config import LOGGING_CONFIG, TRAIN_DEFAULTS, ExperimentConfig, load_config

TEST_MODULES = [
    "test_autodiff",
    "test_nets",
    "test_data",
    "test_objectives",
    "test_fitness",
    "test_evolution",
    "test_metrics",
    "test_cli",
]


def small_config(**train: Any) -> ExperimentConfig:
    """Tiny networks and batches so a full iteration runs in milliseconds"""
    train_section: Dict[str, Any] = {"T": 2, "B": 8}
    train_section.update(train)
    return ExperimentConfig.model_validate({
        "train": train_section,
        "noise": {"dim": 4},
        "model": {"hidden_units": 8},
        "evaluation": {"eval_samples": 64, "kde_resolution": 20},
        "output": {"progress": False, "metrics_interval": 1, "checkpoint_interval": 1000},
    })


def test_dependencies_importable():
    for name in ["numpy", "pandas", "pydantic", "dotenv", "tqdm"]:
        importlib.import_module(name)


def test_default_config_matches_documented_defaults():
    config = load_config()
    assert config.train.batch_size == TRAIN_DEFAULTS["B"] == 32
    assert config.train.d_steps == 3
    assert config.train.g_offspring == 3
    assert config.train.d_offspring == 2
    assert config.noise.dim == 256
    assert config.evaluation.eval_samples == 512
    assert LOGGING_CONFIG["backup_count"] == 5


def test_agents_initialize():
    from src.agents import DiscriminatorEvolver, GeneratorEvolver
    from src.benchmark.data import BatchSampler, RngStream

    config = small_config()
    sampler = BatchSampler(config.ring, config.noise, RngStream(0))
    assert DiscriminatorEvolver(config.train, sampler).name == "e_discriminators"
    assert GeneratorEvolver(config.train, sampler).name == "e_generators"


def test_module_run_records_each_parametrized_case(tmp_path):
    (tmp_path / "test_sample_cases.py").write_text(
        "import pytest\n\n"
        "@pytest.mark.parametrize('n', [1, 2, 3])\n"
        "def test_positive(n):\n"
        "    assert n > 0\n\n"
        "def test_broken():\n"
        "    assert 1 == 2\n"
    )
    tester = SetupTester()
    tester.test_modules(["test_sample_cases"], root=tmp_path)

    names = [r.name.split("::")[-1] for r in tester.results]
    assert names == ["test_positive[1]", "test_positive[2]", "test_positive[3]", "test_broken"]
    assert [r.name.split("::")[-1] for r in tester.failed] == ["test_broken"]
    assert "assert 1 == 2" in tester.failed[0].error


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    error: Optional[str] = None


class ResultCollector:
    """pytest plugin that turns test reports into CheckResults"""

    def __init__(self, tester: "SetupTester"):
        self.tester = tester

    def pytest_collectreport(self, report):
        if report.failed:
            self.tester.record(CheckResult(f"collect {report.nodeid}", False, 0.0, _failure_message(report)))

    def pytest_runtest_logreport(self, report):
        if report.when == "call" or report.failed:
            name = report.nodeid if report.when == "call" else f"{report.nodeid} ({report.when})"
            error = _failure_message(report) if report.failed else None
            self.tester.record(CheckResult(name, not report.failed, report.duration, error))


def _failure_message(report) -> str:
    crash = getattr(report.longrepr, "reprcrash", None)
    if crash is not None:
        return crash.message.strip().splitlines()[0]
    lines = report.longreprtext.strip().splitlines()
    return lines[-1] if lines else "failed"


class SetupTester:
    def __init__(self):
        self.results: List[CheckResult] = []

    @property
    def failed(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def print_header(self, message: str):
        print("\n" + "=" * 50)
        print(message)
        print("=" * 50)

    def record(self, result: CheckResult):
        status = "✓ PASSED" if result.passed else "✗ FAILED"
        print(f"{status} - {result.name} ({result.seconds:.2f}s)")
        if result.error:
            print(f"  Error: {result.error}")
        self.results.append(result)

    def run_check(self, name: str, check: Callable) -> None:
        started = time.perf_counter()
        error = None
        try:
            check()
        except Exception as e:
            error = f"{type(e).__name__}: {e}"
        self.record(CheckResult(name, error is None, time.perf_counter() - started, error))

    def test_setup_checks(self):
        """Test dependencies, configuration and agent initialization"""
        self.print_header("Testing Setup")
        module = sys.modules[__name__]
        for name, check in inspect.getmembers(module, inspect.isfunction):
            if name.startswith("test_") and check.__module__ == module.__name__ and not inspect.signature(check).parameters:
                self.run_check(name, check)

    def test_training_smoke(self):
        """Test a two-iteration training run end to end"""
        self.print_header("Testing Training Smoke Run")

        def smoke():
            from src.workflows.cde_gan import train

            population = train(small_config())
            assert population.iteration == 2

        self.run_check("two-iteration training run", smoke)

    def test_modules(self, modules: List[str], root: Optional[Path] = None):
        """Run every test module through pytest, one header per module"""
        root = Path(root) if root is not None else Path(__file__).resolve().parent
        for module_name in modules:
            self.print_header(f"Testing {module_name}")
            started = time.perf_counter()
            code = pytest.main(
                [str(root / f"{module_name}.py"), "-q", "-p", "no:cacheprovider"],
                plugins=[ResultCollector(self)],
            )
            if code not in (pytest.ExitCode.OK, pytest.ExitCode.TESTS_FAILED):
                self.record(CheckResult(module_name, False, time.perf_counter() - started, f"pytest exited with {code!r}"))

    def print_summary(self):
        """Counts, failures and the slowest checks"""
        self.print_header("Test Summary")
        print(f"Checks run: {len(self.results)}")
        print(f"Passed: {len(self.results) - len(self.failed)}")
        print(f"Failed: {len(self.failed)}")
        print(f"Total time: {sum(r.seconds for r in self.results):.1f}s")

        print("\nSlowest checks:")
        for result in sorted(self.results, key=lambda r: r.seconds, reverse=True)[:5]:
            print(f"- {result.name}: {result.seconds:.2f}s")

        if self.failed:
            print("\nFailed checks:")
            for result in self.failed:
                print(f"- {result.name}: {result.error}")


def main():
    tester = SetupTester()

    try:
        tester.test_setup_checks()
        tester.test_training_smoke()
        tester.test_modules(TEST_MODULES)

        tester.print_summary()

        sys.exit(1 if tester.failed else 0)

    except Exception as e:
        print(f"Error running tests: {str(e)}")
        sys.exit(1)


if __name__ == "__main__":
    main()
