"""End-to-end maximum-likelihood training of summary network and flow.

The objective per batch is ``mean(-log q(theta | s(D))) + gamma * sum ||W||^2``
and every parameter (summary network, fusion blocks, flow) is updated jointly
by one Adam optimizer on a cosine learning-rate schedule.
"""

import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import NonFiniteError, TrainingDivergedError
from src.core.events import EpochCompleted, EventBus, TrainingFinished, TrainingStarted
from src.core.rng import RNG
from src.diffcore.layers import ParameterStore, l2_penalty
from src.diffcore.optim import AdamState, adam_step, cosine_learning_rate
from src.diffcore.tensor import Graph, Tensor, add, affine, backward, reduce_mean
from src.flow.coupling import CouplingFlow
from src.fusion.missingness import MultiSourceDataset
from src.fusion.networks import SummaryNetwork

logger = logging.getLogger(__name__)

BatchTransform = Callable[[MultiSourceDataset, RNG], MultiSourceDataset]

# Child stream tags
_INIT_SUMMARY, _INIT_FLOW, _SHUFFLE, _TRANSFORM, _DROPOUT, _VALIDATION = range(6)

VALIDATION_CHUNK = 256


class TrainConfig(BaseModel):
    """Optimisation settings.

    ``budget`` is the number of training simulations K; the validation set
    is extra and sized by ``validation_fraction * budget``.
    """
    model_config = ConfigDict(extra="forbid")

    budget: int = Field(5000, ge=1)
    epochs: int = Field(30, ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    schedule: Literal["cosine", "constant"] = "cosine"
    l2_weight: float = Field(1e-4, ge=0)
    validation_fraction: float = Field(0.1, ge=0, lt=1)
    seed: int = 0

    @model_validator(mode="after")
    def _budget_covers_batch(self) -> "TrainConfig":
        if self.budget < self.batch_size:
            raise ValueError(f"budget ({self.budget}) must be >= batch_size ({self.batch_size})")
        return self

    @property
    def validation_size(self) -> int:
        return int(round(self.validation_fraction * self.budget))

    def steps_per_epoch(self, n: Optional[int] = None) -> int:
        return math.ceil((self.budget if n is None else n) / self.batch_size)

    def learning_rate_at(self, step: int, total_steps: int) -> float:
        if self.schedule == "constant":
            return self.learning_rate
        return cosine_learning_rate(step, total_steps, self.learning_rate)


@dataclass
class TrainResult:
    """Trained parameters plus the loss trace."""
    params: ParameterStore
    optimizer: AdamState
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    learning_rates: List[float] = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "seconds": self.seconds,
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "parameter_count": self.params.parameter_count(),
        }


def init_parameters(summary: SummaryNetwork, flow: CouplingFlow, seed: int) -> ParameterStore:
    """Deterministic initial parameters for a (summary network, flow) pair."""
    rng = RNG(seed)
    params = ParameterStore()
    summary.init_params(params, rng.stream(_INIT_SUMMARY))
    flow.init_params(params, rng.stream(_INIT_FLOW))
    return params


def negative_log_posterior(g: Graph, summary: SummaryNetwork, flow: CouplingFlow,
                           batch: MultiSourceDataset) -> Tensor:
    """Batch mean of ``-log q(theta | s(D))``."""
    if batch.theta is None:
        raise ValueError("Training batches need parameters")
    cond = summary(g, batch)
    return affine(reduce_mean(flow.log_prob(g, g.constant(batch.theta), cond)), -1.0)


def validation_loss(summary: SummaryNetwork, flow: CouplingFlow, params: ParameterStore,
                    data: MultiSourceDataset) -> float:
    """Evaluation-mode mean negative log posterior over ``data``."""
    total = 0.0
    for start in range(0, data.size, VALIDATION_CHUNK):
        chunk = data.take(np.arange(start, min(start + VALIDATION_CHUNK, data.size)))
        g = Graph(params)
        total += negative_log_posterior(g, summary, flow, chunk).item() * chunk.size
    return total / data.size


def _offending_block(exc: NonFiniteError) -> str:
    match = re.search(r"[\['](?P<name>[\w.]+)[\]']", f"{exc.op} {exc}")
    if not match:
        return exc.op
    # flow.block3.conditioner.out.kernel -> flow.block3
    return ".".join(match.group("name").split(".")[:2])


def train(
    summary: SummaryNetwork,
    flow: CouplingFlow,
    data: MultiSourceDataset,
    config: TrainConfig,
    validation: Optional[MultiSourceDataset] = None,
    params: Optional[ParameterStore] = None,
    batch_transform: Optional[BatchTransform] = None,
    event_bus: Optional[EventBus] = None,
    run_id: str = "",
) -> TrainResult:
    """Train summary network and flow jointly.

    Args:
        summary: Summary network producing the conditioning vector
        flow: Conditional coupling flow over (standardized) parameters
        data: Training datasets with ``theta``
        config: Optimisation settings
        validation: Held-out datasets; the epoch validation loss is NaN without them
        params: Initial parameters (fresh ones from ``config.seed`` if None)
        batch_transform: Applied to every batch before the forward pass
            (missing-data injection); the validation set is transformed once
        event_bus: Receives TrainingStarted / EpochCompleted / TrainingFinished
        run_id: Label carried by the events

    Returns:
        TrainResult with per-epoch training and validation loss

    Raises:
        TrainingDivergedError: If a loss, activation or gradient becomes non-finite
    """
    rng = RNG(config.seed)
    if params is None:
        params = init_parameters(summary, flow, config.seed)
    optimizer = AdamState.fresh(params)
    n = data.size
    steps_per_epoch = config.steps_per_epoch(n)
    total_steps = config.epochs * steps_per_epoch

    frozen_validation = validation
    if validation is not None and batch_transform is not None:
        frozen_validation = batch_transform(validation, rng.stream(_VALIDATION))

    result = TrainResult(params=params, optimizer=optimizer)
    if event_bus:
        event_bus.dispatch(TrainingStarted(run_id, config.epochs, steps_per_epoch, params.parameter_count()))
    logger.info("Training %s: %d datasets, %d epochs x %d steps, %d parameters",
                run_id or "model", n, config.epochs, steps_per_epoch, params.parameter_count())

    started = time.perf_counter()
    step = 0
    for epoch in range(config.epochs):
        order = rng.stream(_SHUFFLE, epoch).permutation(n)
        epoch_losses = []
        lr = config.learning_rate
        for b in range(steps_per_epoch):
            index = order[b * config.batch_size:(b + 1) * config.batch_size]
            batch = data.take(index)
            if batch_transform is not None:
                batch = batch_transform(batch, rng.stream(_TRANSFORM, epoch, b))
            lr = config.learning_rate_at(step, total_steps)
            try:
                loss, value = _train_step(summary, flow, params, optimizer, batch, config.l2_weight, lr,
                                          rng.stream(_DROPOUT, epoch, b))
            except NonFiniteError as exc:
                block = _offending_block(exc)
                logger.error("Training diverged at epoch %d batch %d (%s)", epoch + 1, b, block)
                raise TrainingDivergedError(epoch + 1, b, block, str(exc)) from exc
            epoch_losses.append(value)
            result.learning_rates.append(lr)
            step += 1

        train_loss = float(np.mean(epoch_losses))
        val_loss = float("nan")
        if frozen_validation is not None:
            try:
                val_loss = validation_loss(summary, flow, params, frozen_validation)
            except NonFiniteError as exc:
                raise TrainingDivergedError(epoch + 1, -1, _offending_block(exc), str(exc)) from exc
        result.train_loss.append(train_loss)
        result.val_loss.append(val_loss)
        logger.debug("epoch %d: train %.4f, val %.4f, lr %.3g", epoch + 1, train_loss, val_loss, lr)
        if event_bus:
            event_bus.dispatch(EpochCompleted(run_id, epoch + 1, train_loss, val_loss, lr))

    result.steps = step
    result.seconds = time.perf_counter() - started
    if event_bus:
        event_bus.dispatch(TrainingFinished(run_id, step, result.seconds))
    return result


def _train_step(summary: SummaryNetwork, flow: CouplingFlow, params: ParameterStore, optimizer: AdamState,
                batch: MultiSourceDataset, l2_weight: float, lr: float, rng: RNG) -> Tuple[Tensor, float]:
    g = Graph(params, training=True, rng=rng)
    loss = negative_log_posterior(g, summary, flow, batch)
    penalty = l2_penalty(g, l2_weight)
    objective = loss if penalty is None else add(loss, penalty)
    grads = backward(g, objective)
    adam_step(params, grads, optimizer, lr)
    return objective, loss.item()
