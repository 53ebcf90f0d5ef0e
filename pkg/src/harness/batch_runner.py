"""Experiment matrix runner: simulate, train and evaluate architecture x seed grids.

Every run of a matrix reads the same dataset files from
``<output>/datasets``. Runs are independent, so ``workers > 1`` spreads them
over a process pool; each run stays single-threaded and fully seeded, and the
parent process is the only writer of the manifest.

Output layout::

    <output>/config.json                  resolved config echo
    <output>/manifest.json                run book
    <output>/datasets/{train,validation,test}.npz
    <output>/checkpoints/<arch>_seed<seed>.npz
    <output>/traces/<arch>_seed<seed>.json  per-epoch losses
    <output>/metrics/<arch>_seed<seed>.json per-run metrics
    <output>/metrics.csv                   all runs, one row per run x missing rate
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.core.errors import ArtifactError, error_payload
from src.core.events import EventBus, RunCompleted, RunFailed
from src.core.rng import RNG
from src.core.storage import read_json, write_json
from src.diffcore.layers import ParameterStore
from src.flow.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.flow.coupling import CouplingFlow, sample
from src.flow.standardize import Standardizer
from src.flow.trainer import train
from src.fusion.missingness import MissingnessMask, MultiSourceDataset, apply_missingness
from src.fusion.networks import SummaryNetwork, SummarySpec, build_summary_network, source_specs
from src.harness.config import ExperimentConfig, config_hash
from src.harness.manifest import EVALUATED, FAILED, TRAINED, RunManifest
from src.harness.telemetry import attach_matrix_logging, attach_run_logging
from src.metrics.aggregators import RunMetrics
from src.metrics.exporters import export_runs_to_csv
from src.metrics.metrics import contraction, mean_mmd, rmse, sbc_ece, sbc_ece_per_dimension
from src.simulators.datasets import load_datasets, save_datasets
from src.simulators.exp1 import analytic_posterior_exp1, simulate_exp1_batch
from src.simulators.exp2 import inject_missing, simulate_exp2_batch

logger = logging.getLogger(__name__)

# child-stream tags of the data seed
_TRAIN_DATA, _VALIDATION_DATA, _TEST_DATA, _TEST_MASKS, _REFERENCE_DRAWS = 0, 1, 2, 3, 4
# child-stream tag of a run seed
_POSTERIOR_DRAWS = 6

EVAL_CHUNK = 128

DATASET_SPLITS = ("train", "validation", "test")
SOURCE_KINDS = {"exp1": ("set", "series"), "exp2": ("set", "set")}


def run_name(architecture: str, seed: int) -> str:
    return f"{architecture}_seed{seed}"


@dataclass
class RunPaths:
    """Artifact locations under one output directory."""
    root: Path

    @property
    def config(self) -> Path:
        return self.root / "config.json"

    def dataset(self, split: str) -> Path:
        return self.root / "datasets" / f"{split}.npz"

    def checkpoint(self, architecture: str, seed: int) -> Path:
        return self.root / "checkpoints" / f"{run_name(architecture, seed)}.npz"

    def trace(self, architecture: str, seed: int) -> Path:
        return self.root / "traces" / f"{run_name(architecture, seed)}.json"

    def metrics(self, architecture: str, seed: int) -> Path:
        return self.root / "metrics" / f"{run_name(architecture, seed)}.json"

    @property
    def metrics_csv(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"


@dataclass
class RunOutcome:
    """What a worker hands back to the parent for manifest bookkeeping."""
    architecture: str
    seed: int
    stage: str
    ok: bool
    seconds: float = 0.0
    steps: int = 0
    path: Optional[str] = None
    error: Dict[str, Any] = field(default_factory=dict)


# ============================================================================
# MODEL CONSTRUCTION
# ============================================================================

def prior_moments(config: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and standard deviation of the parameter prior."""
    if config.experiment == "exp1":
        dim = config.simulation.exp1.dim
        return np.zeros(dim), np.ones(dim)
    return config.simulation.exp2.prior_moments()


def network_view(config: ExperimentConfig, data: MultiSourceDataset) -> MultiSourceDataset:
    """The dataset as the summary network sees it (mask columns appended for exp2)."""
    if config.experiment == "exp2":
        return apply_missingness(data, MissingnessMask.all_present(data, config.simulation.exp2.fill))
    return data


def build_models(config: ExperimentConfig, architecture: str,
                 data: MultiSourceDataset) -> Tuple[SummaryNetwork, CouplingFlow]:
    """Summary network and flow for one architecture, sized from ``data``."""
    net = config.network
    spec = SummarySpec(
        architecture=architecture,
        sources=source_specs(network_view(config, data), SOURCE_KINDS[config.experiment]),
        embed_dim=net.embedder.embed_dim,
        embedder_blocks=net.embedder.blocks,
        embed_attention=net.embedder.to_spec(),
        fusion_attention=net.fusion.to_spec(),
        condition_dim=0 if data.conditions is None else data.conditions.shape[1],
    )
    summary = build_summary_network(spec)
    flow = CouplingFlow(
        dim=data.theta.shape[1],
        cond_dim=summary.output_dim,
        blocks=net.flow.blocks,
        hidden=tuple(net.flow.hidden),
        clamp=net.flow.clamp,
        dropout_rate=net.flow.dropout,
    )
    return summary, flow


@dataclass
class MissingRateTransform:
    """Batch transform drawing a fresh missing rate per source and batch."""
    rate_range: Tuple[float, float]
    fill: float

    def __call__(self, batch: MultiSourceDataset, rng: RNG) -> MultiSourceDataset:
        return inject_missing(batch, self.rate_range, rng, self.fill)[0]


def batch_transform_for(config: ExperimentConfig) -> Optional[Callable[[MultiSourceDataset, RNG], MultiSourceDataset]]:
    if config.training_missing_rate is None:
        return None
    return MissingRateTransform(tuple(config.training_missing_rate), config.simulation.exp2.fill)


# ============================================================================
# SIMULATION
# ============================================================================

def dataset_echo(config: ExperimentConfig) -> Dict[str, Any]:
    """The config fields that determine the dataset files."""
    return {
        "experiment": config.experiment,
        "data_seed": config.simulation.data_seed,
        "simulator": config.simulator.model_dump(mode="json"),
        "train": config.train.budget,
        "validation": config.train.validation_size,
        "test": config.test.datasets,
    }


def simulate_datasets(config: ExperimentConfig, output_dir: Path, force: bool = False) -> Dict[str, Path]:
    """Write training, validation and test stacks; existing matching files are kept.

    Raises:
        ArtifactError: If the output directory cannot be written
    """
    paths = RunPaths(output_dir)
    echo = dataset_echo(config)
    rng = RNG(config.simulation.data_seed)
    simulate = simulate_exp1_batch if config.experiment == "exp1" else simulate_exp2_batch
    sizes = {"train": config.train.budget, "validation": config.train.validation_size, "test": config.test.datasets}
    tags = {"train": _TRAIN_DATA, "validation": _VALIDATION_DATA, "test": _TEST_DATA}

    written: Dict[str, Path] = {}
    for split in DATASET_SPLITS:
        if sizes[split] == 0:
            continue
        path = paths.dataset(split)
        if path.exists() and not force and _dataset_matches(path, echo):
            logger.info("Reusing %s datasets in %s", split, path)
            written[split] = path
            continue
        started = time.perf_counter()
        data = simulate(config.simulator, sizes[split], rng.stream(tags[split]))
        try:
            written[split] = save_datasets(path, data, config=echo, diagnostics={"split": split})
        except OSError as exc:
            raise ArtifactError("dataset", str(path), detail=f"cannot write: {exc}") from exc
        logger.info("Simulated %d %s datasets in %.1fs", sizes[split], split, time.perf_counter() - started)
        if data.diagnostics.get("resampled"):
            logger.info("Resampled %d capped DDM walks in the %s split", data.diagnostics["resampled"], split)
    return written


def dataset_diagnostics(paths: Dict[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Simulation diagnostics stored in each dataset file, keyed by split."""
    return {split: load_datasets(path)[1].get("diagnostics", {}) for split, path in paths.items()}


def _dataset_matches(path: Path, echo: Dict[str, Any]) -> bool:
    try:
        _, meta = load_datasets(path)
    except ArtifactError:
        return False
    return meta.get("config") == echo


def load_split(config: ExperimentConfig, output_dir: Path, split: str) -> MultiSourceDataset:
    """Load one split and check it was generated from this config.

    Raises:
        ArtifactError: If the file is missing or belongs to another config
    """
    path = RunPaths(output_dir).dataset(split)
    data, meta = load_datasets(path)
    if meta.get("config") != dataset_echo(config):
        raise ArtifactError("dataset", str(path), detail="generated with a different configuration; re-run simulate")
    return data


# ============================================================================
# TRAINING
# ============================================================================

def train_run(config_json: Dict[str, Any], output_dir: str, architecture: str, seed: int) -> RunOutcome:
    """Train one matrix entry. Top-level so process pools can pickle it."""
    config = ExperimentConfig.model_validate(config_json)
    paths = RunPaths(Path(output_dir))
    started = time.perf_counter()
    try:
        train_data = load_split(config, paths.root, "train")
        validation = load_split(config, paths.root, "validation") if config.train.validation_size else None
        summary, flow = build_models(config, architecture, train_data)
        mean, std = prior_moments(config)
        standardizer = Standardizer.fit(train_data, mean, std)

        bus = EventBus()
        attach_run_logging(bus, logger, architecture, seed)
        train_config = config.train.model_copy(update={"seed": seed})
        result = train(
            summary, flow,
            standardizer.transform_data(train_data),
            train_config,
            validation=None if validation is None else standardizer.transform_data(validation),
            batch_transform=batch_transform_for(config),
            event_bus=bus,
            run_id=run_name(architecture, seed),
        )
        extra = {"architecture": architecture, "seed": seed, "steps": result.steps,
                 "train_loss": result.train_loss, "val_loss": result.val_loss}
        checkpoint = save_checkpoint(paths.checkpoint(architecture, seed), Checkpoint(
            params=result.params,
            optimizer=result.optimizer,
            config=config_json,
            rng_state=RNG(seed).get_state(),
            standardizer=standardizer,
            extra=extra,
        ))
        write_json(paths.trace(architecture, seed), {**extra, "seconds": result.seconds})
    except Exception as exc:
        logger.debug("Training %s failed", run_name(architecture, seed), exc_info=True)
        return RunOutcome(architecture, seed, "train", ok=False, seconds=time.perf_counter() - started,
                          error=error_payload(exc))
    return RunOutcome(architecture, seed, "train", ok=True, seconds=result.seconds, steps=result.steps,
                      path=str(checkpoint))


# ============================================================================
# EVALUATION
# ============================================================================

def posterior_draws(summary: SummaryNetwork, flow: CouplingFlow, params: ParameterStore,
                    standardizer: Standardizer, data: MultiSourceDataset, count: int, rng: RNG) -> np.ndarray:
    """``(J, count, d)`` posterior draws in the original parameter space.

    ``data`` must already be standardized (and missingness-encoded).
    """
    chunks = []
    for i, start in enumerate(range(0, data.size, EVAL_CHUNK)):
        chunk = data.take(np.arange(start, min(start + EVAL_CHUNK, data.size)))
        cond = summary.embed(chunk, params)
        chunks.append(sample(flow, params, cond, count, rng.stream(i)))
    return standardizer.inverse_theta(np.concatenate(chunks, axis=0))


def reference_draws(config: ExperimentConfig, test: MultiSourceDataset, count: int) -> Optional[np.ndarray]:
    """Exact posterior draws for the MMD reference (exp1 only)."""
    if config.experiment != "exp1":
        return None
    limit = config.test.mmd_datasets or test.size
    posterior = analytic_posterior_exp1(test.sources[0].values[:limit], test.sources[1].values[:limit],
                                        config.simulation.exp1)
    return posterior.sample(count, RNG(config.simulation.data_seed).stream(_REFERENCE_DRAWS))


def evaluation_batch(config: ExperimentConfig, test: MultiSourceDataset, rate: Optional[float],
                     rate_index: int) -> MultiSourceDataset:
    """Test stack as the network sees it at one missing rate.

    Masks depend only on the data seed and the rate, so every architecture is
    evaluated on the same masked datasets.
    """
    if rate is None:
        return test
    rng = RNG(config.simulation.data_seed).stream(_TEST_MASKS, rate_index)
    return inject_missing(test, (rate, rate), rng, config.simulation.exp2.fill)[0]


def evaluate_run(config_json: Dict[str, Any], output_dir: str, architecture: str, seed: int,
                 seconds: Optional[float] = None) -> RunOutcome:
    """Evaluate one trained matrix entry on the test suite."""
    config = ExperimentConfig.model_validate(config_json)
    paths = RunPaths(Path(output_dir))
    started = time.perf_counter()
    try:
        checkpoint = load_checkpoint(paths.checkpoint(architecture, seed))
        test = load_split(config, paths.root, "test")
        summary, flow = build_models(config, architecture, test)
        standardizer = checkpoint.standardizer or Standardizer.identity(test, test.theta.shape[1])
        standardized = standardizer.transform_data(test)
        truths = test.theta
        _, prior_std = prior_moments(config)
        reference = reference_draws(config, test, config.test.draws)
        run_rng = RNG(seed).stream(_POSTERIOR_DRAWS)

        runs: List[RunMetrics] = []
        for rate_index, rate in enumerate(config.evaluation_missing_rates):
            batch = evaluation_batch(config, standardized, rate, rate_index)
            draws = posterior_draws(summary, flow, checkpoint.params, standardizer, batch, config.test.draws,
                                    run_rng.stream(rate_index))
            runs.append(RunMetrics(
                architecture=architecture,
                seed=seed,
                rmse=rmse(draws, truths),
                ece=sbc_ece(draws, truths),
                contraction=contraction(draws, prior_std ** 2),
                mmd=None if reference is None else mean_mmd(draws[:reference.shape[0]], reference),
                missing_rate=rate,
                seconds=seconds,
                ece_per_dimension=[float(v) for v in sbc_ece_per_dimension(draws, truths)],
            ))
        metrics_path = write_json(paths.metrics(architecture, seed), {"runs": [r.to_dict() for r in runs]})
    except Exception as exc:
        logger.debug("Evaluating %s failed", run_name(architecture, seed), exc_info=True)
        return RunOutcome(architecture, seed, "evaluate", ok=False, seconds=time.perf_counter() - started,
                          error=error_payload(exc))
    return RunOutcome(architecture, seed, "evaluate", ok=True, seconds=time.perf_counter() - started,
                      path=str(metrics_path))


def load_run_metrics(path: Path) -> List[RunMetrics]:
    payload = read_json(path, kind="metrics")
    return [RunMetrics(**run) for run in payload["runs"]]


# ============================================================================
# MATRIX
# ============================================================================

class ExperimentRunner:
    """Runs the architecture x seed matrix of one experiment config.

    Implements the harness contract:
    - All architectures consume the identical dataset files
    - One manifest entry per (architecture, seed); completed entries are skipped unless ``force``
    - A failed run is marked in the manifest and the matrix continues
    """

    def __init__(self, config: ExperimentConfig, force: bool = False, event_bus: Optional[EventBus] = None):
        self.config = config
        self.force = force
        self.paths = RunPaths(config.output_path)
        self.event_bus = event_bus or EventBus()
        if event_bus is None:
            attach_matrix_logging(self.event_bus, logger)
        self.manifest = RunManifest.open(self.paths.root, config_hash(config))
        self._config_json = config.model_dump(mode="json")

    @property
    def matrix(self) -> List[Tuple[str, int]]:
        return [(arch, seed) for arch in self.config.architectures for seed in self.config.seeds]

    def write_config(self) -> Path:
        return write_json(self.paths.config, {"config_hash": self.manifest.config_hash, "config": self._config_json})

    def simulate(self) -> Dict[str, Path]:
        """Write the dataset splits and record their diagnostics in the manifest."""
        self.write_config()
        written = simulate_datasets(self.config, self.paths.root, self.force)
        for split, diagnostics in dataset_diagnostics(written).items():
            self.manifest.record_dataset(split, diagnostics)
        return written

    def train(self) -> List[RunOutcome]:
        """Train every pending matrix entry.

        Raises:
            ArtifactError: If the dataset files are missing
        """
        load_split(self.config, self.paths.root, "train")
        self.write_config()
        pending = []
        for arch, seed in self.matrix:
            entry = self.manifest.get(arch, seed)
            if entry is not None and entry.trained and not self.force:
                logger.info("Skipping %s/%d (already %s)", arch, seed, entry.status)
                continue
            pending.append((arch, seed))
        outcomes = self._dispatch(train_run, pending)
        for outcome in outcomes:
            if outcome.ok:
                self.manifest.update(outcome.architecture, outcome.seed, status=TRAINED, checkpoint=outcome.path,
                                     seconds=outcome.seconds, steps=outcome.steps, metrics=None, error=None)
            else:
                self.manifest.update(outcome.architecture, outcome.seed, status=FAILED, error=outcome.error)
        return outcomes

    def evaluate(self) -> List[RunOutcome]:
        """Evaluate trained entries, then write the combined ``metrics.csv``.

        Raises:
            ArtifactError: If a requested entry has no checkpoint
        """
        pending = []
        for arch, seed in self.matrix:
            entry = self.manifest.get(arch, seed)
            if entry is not None and entry.status == FAILED:
                continue
            if entry is None or not entry.trained:
                raise ArtifactError("checkpoint", str(self.paths.checkpoint(arch, seed)),
                                    detail="run has not been trained")
            if entry.status == EVALUATED and not self.force:
                continue
            pending.append((arch, seed))
        outcomes = self._dispatch(evaluate_run, pending)
        for outcome in outcomes:
            if outcome.ok:
                self.manifest.update(outcome.architecture, outcome.seed, status=EVALUATED, metrics=outcome.path)
            else:
                self.manifest.update(outcome.architecture, outcome.seed, status=FAILED, error=outcome.error)
        self.export_metrics()
        return outcomes

    def collect_metrics(self) -> List[RunMetrics]:
        runs: List[RunMetrics] = []
        for arch, seed in self.matrix:
            entry = self.manifest.get(arch, seed)
            if entry is not None and entry.status == EVALUATED:
                runs.extend(load_run_metrics(self.paths.metrics(arch, seed)))
        return runs

    def export_metrics(self) -> Optional[Path]:
        runs = self.collect_metrics()
        if not runs:
            logger.warning("No evaluated runs; metrics.csv not written")
            return None
        return export_runs_to_csv(runs, str(self.paths.metrics_csv))

    def _dispatch(self, job: Callable[..., RunOutcome], pending: List[Tuple[str, int]]) -> List[RunOutcome]:
        outcomes: List[RunOutcome] = []
        output_dir = str(self.paths.root)

        def extra_args(arch: str, seed: int) -> Tuple[Any, ...]:
            if job is evaluate_run:
                entry = self.manifest.get(arch, seed)
                return (entry.seconds if entry is not None else None,)
            return ()

        if self.config.workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                futures = [pool.submit(job, self._config_json, output_dir, arch, seed, *extra_args(arch, seed))
                           for arch, seed in pending]
                for future in futures:
                    outcomes.append(self._report(future.result()))
        else:
            for arch, seed in pending:
                outcomes.append(self._report(job(self._config_json, output_dir, arch, seed, *extra_args(arch, seed))))
        return outcomes

    def _report(self, outcome: RunOutcome) -> RunOutcome:
        if outcome.ok:
            self.event_bus.dispatch(RunCompleted(outcome.architecture, outcome.seed, outcome.stage, outcome.seconds))
        else:
            self.event_bus.dispatch(RunFailed(outcome.architecture, outcome.seed, outcome.stage, outcome.error))
        return outcome
