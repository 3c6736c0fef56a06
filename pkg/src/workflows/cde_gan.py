"""
CDE-GAN Workflow
Coordinates the E-Discriminators and E-Generators agents through the outer
training loop: every generator iteration runs K discriminator evolution
rounds followed by one generator evolution round.
"""

import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from config import ExperimentConfig, TrainConfig
from ..agents import DiscriminatorEvolver, GeneratorEvolver, Individual, PopulationState, RoundResult
from ..agents.objectives import generate
from ..benchmark.data import BatchSampler, RngStream, sample_noise
from ..benchmark.metrics import MetricsRecord, ModeReport, mode_coverage
from ..engine.checkpoint import load_genome, read_manifest, save_genome, write_manifest
from ..engine.errors import CheckpointError, NumericalError, TrainingHalted
from ..engine.nets import AdamState, ParamSet, build_mlp, mlp_spec

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"
CHECKPOINT_DIR = "checkpoints"


@dataclass
class IterationTrace:
    """Loss and fitness values of one generator iteration"""

    iteration: int
    d_losses: List[List[float]] = field(default_factory=list)
    g_losses: List[float] = field(default_factory=list)
    d_fitness: List[float] = field(default_factory=list)
    g_fitness: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "d_losses": self.d_losses,
            "g_losses": self.g_losses,
            "d_fitness": self.d_fitness,
            "g_fitness": self.g_fitness,
        }


@contextmanager
def output_lock(out_dir: Path) -> Iterator[Path]:
    """
    Hold out_dir/.lock for the duration of a run

    Raises:
        FileExistsError: Another run is writing to the same directory
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        raise FileExistsError(f"Output directory {out_dir} is in use (remove {lock} if no run is active)") from e
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield lock
    finally:
        lock.unlink(missing_ok=True)


class CDEGANWorkflow:
    def __init__(
        self,
        config: Union[ExperimentConfig, TrainConfig],
        sinks: Sequence = (),
        out_dir: Optional[Path] = None,
    ):
        """
        Args:
            config: Full experiment config, or just the training section (other sections default)
            sinks: Metrics sinks, each with an emit(MetricsRecord) method
            out_dir (Path, optional): Checkpoint root; None disables checkpoints
        """
        if isinstance(config, TrainConfig):
            config = ExperimentConfig(train=config)
        self.name = "cde_gan"
        self.description = "Cooperative dual evolution of generator and discriminator subpopulations"
        self.config = config
        self.sinks = list(sinks)
        self.out_dir = Path(out_dir) if out_dir is not None else None

        self.rng = RngStream(config.train.seed)
        self.sampler = BatchSampler(config.ring, config.noise, self.rng)
        self.e_discriminators = DiscriminatorEvolver(config.train, self.sampler)
        self.e_generators = GeneratorEvolver(config.train, self.sampler)

        self.history: List[IterationTrace] = []
        self.last_checkpoint: Optional[Path] = None

    def _individual(self, genome: ParamSet) -> Individual:
        train = self.config.train
        optimizer = AdamState(genome, lr=train.adam_lr, beta1=train.adam_beta1, beta2=train.adam_beta2, eps=train.adam_eps)
        return Individual(genome=genome, optimizer=optimizer)

    def initialize(self) -> PopulationState:
        """Build J generator and I discriminator parents from their own init streams"""
        train, model = self.config.train, self.config.model
        g_spec = mlp_spec(model.architecture, "generator", noise_dim=self.config.noise.dim, hidden_units=model.hidden_units)
        d_spec = mlp_spec(model.architecture, "discriminator", hidden_units=model.hidden_units)

        g_parents = [self._individual(build_mlp(g_spec, self.rng.child(f"init/g/{j}"))) for j in range(train.g_parents)]
        d_parents = [self._individual(build_mlp(d_spec, self.rng.child(f"init/d/{i}"))) for i in range(train.d_parents)]
        logger.info(
            f"Initialized {train.g_parents} {model.architecture} generator(s) ({g_spec.num_parameters} params) "
            f"and {train.d_parents} discriminator(s) ({d_spec.num_parameters} params)"
        )
        return PopulationState(g_parents=g_parents, d_parents=d_parents, iteration=0, config=self.config.resolved())

    def run(self, population: Optional[PopulationState] = None) -> PopulationState:
        """
        Run the remaining iterations up to T

        Args:
            population (PopulationState, optional): Starting point; freshly initialized if omitted

        Returns:
            PopulationState: Final parents of both subpopulations

        Raises:
            TrainingHalted: A loss or fitness value went non-finite
        """
        population = population if population is not None else self.initialize()
        train, output = self.config.train, self.config.output
        start = time.perf_counter()
        show_progress = output.progress and sys.stderr.isatty()

        with tqdm(total=train.iterations, initial=population.iteration, desc="cde-gan", unit="iter", disable=not show_progress) as bar:
            for t in range(population.iteration + 1, train.iterations + 1):
                try:
                    population, d_round, g_round = self.iterate(population, t)
                except NumericalError as e:
                    logger.error(f"Non-finite value at iteration {t}: {e}", exc_info=True)
                    path = self.checkpoint(population) if self.out_dir is not None else None
                    raise TrainingHalted(t, str(path) if path else "", str(e)) from e

                if t % output.metrics_interval == 0:
                    self._emit(population, d_round, g_round, time.perf_counter() - start)
                if self.out_dir is not None and t % output.checkpoint_interval == 0:
                    self.checkpoint(population)
                bar.update(1)

        if self.out_dir is not None and (self.last_checkpoint is None or population.iteration % output.checkpoint_interval):
            self.checkpoint(population)
        return population

    def iterate(self, population: PopulationState, t: int) -> Tuple[PopulationState, RoundResult, RoundResult]:
        """
        One generator iteration: K E-Discriminators rounds, then one E-Generators round

        The input state is left untouched; a new state is returned.
        """
        trace = IterationTrace(iteration=t)
        state = PopulationState(
            g_parents=list(population.g_parents),
            d_parents=list(population.d_parents),
            iteration=population.iteration,
            config=population.config,
        )

        d_round = None
        for _ in range(self.config.train.d_steps):
            d_round = self.e_discriminators.evolve(state)
            state.d_parents = d_round.survivors
            trace.d_losses.append([o.variation_loss for o in d_round.offspring])

        g_round = self.e_generators.evolve(state)
        state.g_parents = g_round.survivors
        state.iteration = t

        trace.g_losses = [o.variation_loss for o in g_round.offspring]
        trace.d_fitness = d_round.fitness
        trace.g_fitness = g_round.fitness
        self.history.append(trace)
        return state, d_round, g_round

    def evaluate(self, population: PopulationState, label: Optional[str] = None) -> ModeReport:
        """Mode coverage of eval_samples points from the best generator parent"""
        evaluation = self.config.evaluation
        label = label or f"coverage/{population.iteration}"
        z = sample_noise(self.config.noise, evaluation.eval_samples, self.rng.child(label))
        best = population.g_parents[population.best_generator_index()].genome
        return mode_coverage(
            generate(best, z),
            self.config.ring,
            threshold_sigmas=evaluation.threshold_sigmas,
            min_mode_fraction=evaluation.min_mode_fraction,
        )

    def _emit(self, population: PopulationState, d_round: RoundResult, g_round: RoundResult, elapsed: float) -> None:
        report = self.evaluate(population)
        record = MetricsRecord(
            iteration=population.iteration,
            wall_clock=elapsed,
            g_fitness=g_round.fitness,
            g_mutations=[o.mutation for o in g_round.offspring],
            g_survivor_mutations=[o.mutation for o in g_round.survivors],
            d_fitness=d_round.fitness,
            d_survivor_indices=d_round.survivor_indices,
            covered_modes=report.covered_modes,
            hq_ratio=report.hq_ratio,
            d_grad_norm_mean=float(np.mean(d_round.grad_norms)),
        )
        for sink in self.sinks:
            sink.emit(record)
        logger.info(
            f"iter {population.iteration}: {report.covered_modes}/{self.config.ring.n_modes} modes, "
            f"hq_ratio {report.hq_ratio:.3f}, best F_G {max(g_round.fitness):.4f}"
        )

    def rng_state(self) -> Dict[str, Any]:
        return {"root": self.rng.state(), "batches": self.sampler.state()}

    def restore_rng(self, state: Dict[str, Any]) -> None:
        """Continue the run's streams from a checkpointed rng_state"""
        try:
            self.rng = RngStream.from_state(state["root"])
            self.sampler.restore(state["batches"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"Invalid rng_state: {e}") from e

    @classmethod
    def resume(
        cls,
        path: Path,
        sinks: Sequence = (),
        out_dir: Optional[Path] = None,
        iterations: Optional[int] = None,
    ) -> Tuple["CDEGANWorkflow", PopulationState]:
        """
        Rebuild a workflow and its population from a checkpoint

        Args:
            path (Path): Checkpoint directory or manifest file
            iterations (int, optional): New T; the checkpoint's own T if omitted

        Returns:
            tuple: (workflow with restored streams, population to pass to run())
        """
        population, manifest = load_checkpoint(path)
        try:
            config = ExperimentConfig.model_validate(manifest["config"])
        except ValueError as e:
            raise CheckpointError(f"Checkpoint config is invalid: {e}") from e
        if iterations is not None:
            config = config.model_copy(update={"train": config.train.model_copy(update={"iterations": iterations})})

        workflow = cls(config, sinks, out_dir)
        workflow.restore_rng(manifest.get("rng_state") or {})
        logger.info(f"Resuming from iteration {population.iteration} of {config.train.iterations}")
        return workflow, population

    def checkpoint(self, population: PopulationState) -> Path:
        """
        Write every parent's genome and optimizer state plus the run manifest

        Returns:
            Path: The checkpoint directory
        """
        if self.out_dir is None:
            raise CheckpointError("Checkpointing needs an output directory")
        directory = self.out_dir / CHECKPOINT_DIR / f"iter_{population.iteration:07d}"

        rng_state = self.rng_state()
        generators = []
        for j, parent in enumerate(population.g_parents):
            save_genome(directory / f"g_{j}.json", parent.genome, parent.optimizer, rng_state)
            generators.append({"file": f"g_{j}.json", "fitness": parent.fitness, "mutation": parent.mutation})
        discriminators = []
        for i, parent in enumerate(population.d_parents):
            save_genome(directory / f"d_{i}.json", parent.genome, parent.optimizer, rng_state)
            discriminators.append({"file": f"d_{i}.json", "fitness": parent.fitness, "mutation": parent.mutation})

        tail = self.config.output.fitness_history_tail
        write_manifest(directory, {
            "iteration": population.iteration,
            "config": self.config.resolved(),
            "rng_state": rng_state,
            "generators": generators,
            "discriminators": discriminators,
            "best_generator": population.best_generator_index(),
            "fitness_history": [trace.to_dict() for trace in self.history[-tail:]] if tail else [],
        })
        self.last_checkpoint = directory
        return directory


def load_checkpoint(path: Path) -> Tuple[PopulationState, Dict[str, Any]]:
    """
    Rebuild a population from a checkpoint directory or manifest file

    Returns:
        tuple: (population, manifest)

    Raises:
        CheckpointError: Missing files or an invalid manifest/genome
    """
    directory, manifest = read_manifest(path)

    def _load(entries: List[Dict[str, Any]]) -> List[Individual]:
        individuals = []
        for entry in entries:
            genome_path = directory / entry["file"]
            if not genome_path.exists():
                raise CheckpointError(f"Checkpoint references missing genome file {genome_path}")
            genome, optimizer, rng_state = load_genome(genome_path)
            if optimizer is None:
                raise CheckpointError(f"{genome_path}: no optimizer state")
            if rng_state is not None and rng_state != manifest.get("rng_state"):
                raise CheckpointError(f"{genome_path}: written by a different checkpoint than {directory}")
            individuals.append(Individual(genome, optimizer, mutation=entry.get("mutation", "init"), fitness=entry.get("fitness")))
        return individuals

    try:
        population = PopulationState(
            g_parents=_load(manifest["generators"]),
            d_parents=_load(manifest["discriminators"]),
            iteration=int(manifest["iteration"]),
            config=manifest["config"],
        )
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"Invalid checkpoint manifest in {directory}: {e}") from e
    if not population.g_parents:
        raise CheckpointError(f"Checkpoint {directory} holds no generators")
    return population, manifest


def sample_checkpoint(path: Path, n: int, seed: int) -> Tuple[np.ndarray, ExperimentConfig]:
    """
    Draw n points from a checkpoint's recorded best generator

    Returns:
        tuple: ((n, 2) samples, the experiment config stored with the checkpoint)
    """
    population, manifest = load_checkpoint(path)
    try:
        config = ExperimentConfig.model_validate(manifest["config"])
    except ValueError as e:
        raise CheckpointError(f"Checkpoint config is invalid: {e}") from e
    best = int(manifest["best_generator"])
    if not 0 <= best < len(population.g_parents):
        raise CheckpointError(f"best_generator {best} out of range")
    z = sample_noise(config.noise, n, RngStream(seed).child("checkpoint_samples"))
    return generate(population.g_parents[best].genome, z), config


def train(
    config: Union[ExperimentConfig, TrainConfig],
    sinks: Sequence = (),
    out_dir: Optional[Path] = None,
) -> PopulationState:
    """Run a full training loop and return the final population"""
    return CDEGANWorkflow(config, sinks, out_dir).run()
