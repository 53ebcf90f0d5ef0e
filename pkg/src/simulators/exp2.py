"""Drift-diffusion choices plus a neural (CPP) proxy with per-trial entanglement.

    mu, sigma, alpha, tau, beta, eta ~ uniform priors
    v_n ~ N(mu, sigma)                      per-trial drift rate
    x_n ~ DDM(alpha, tau, v_n, beta)        signed reaction time
    y_n ~ N(v_n, eta)                       CPP slope

The per-trial drift ``v_n`` couples the two sources; ``mu`` and ``sigma``
are shared by both while ``alpha, tau, beta`` only reach X and ``eta`` only Y.
"""

from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.rng import RNG
from src.fusion.missingness import MISSING_FILL, MissingnessMask, MultiSourceDataset, SourceData, apply_missingness
from src.simulators.ddm import MAX_TIME, ddm_sample_batch

PARAMETER_NAMES = ("mu", "sigma", "alpha", "tau", "beta", "eta")

DEFAULT_BOUNDS: Dict[str, Tuple[float, float]] = {
    "mu": (0.1, 3.0),
    "sigma": (0.0, 2.0),
    "alpha": (0.5, 2.0),
    "tau": (0.1, 1.0),
    "beta": (0.1, 0.9),
    "eta": (0.0, 2.0),
}


class Exp2Config(BaseModel):
    """Settings of the decision-making model."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    trials: int = Field(200, ge=1)
    bounds: Dict[str, Tuple[float, float]] = Field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    missing_rate: Tuple[float, float] = (0.01, 0.10)
    fill: float = MISSING_FILL
    ddm_step: float = Field(1e-3, gt=0)
    max_time: float = Field(MAX_TIME, gt=0)

    @field_validator("bounds")
    @classmethod
    def _check_bounds(cls, value: Dict[str, Tuple[float, float]]) -> Dict[str, Tuple[float, float]]:
        missing = set(PARAMETER_NAMES) - set(value)
        if missing:
            raise ValueError(f"bounds missing for {sorted(missing)}")
        for name, (low, high) in value.items():
            if not low <= high:
                raise ValueError(f"bounds for '{name}' are inverted: ({low}, {high})")
        return value

    @field_validator("missing_rate")
    @classmethod
    def _check_rate(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 <= low <= high < 1.0:
            raise ValueError(f"missing_rate range must satisfy 0 <= low <= high < 1, got {value}")
        return value

    @property
    def parameter_names(self):
        return list(PARAMETER_NAMES)

    @property
    def low(self) -> np.ndarray:
        return np.array([self.bounds[name][0] for name in PARAMETER_NAMES])

    @property
    def high(self) -> np.ndarray:
        return np.array([self.bounds[name][1] for name in PARAMETER_NAMES])

    def prior_moments(self) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and standard deviation of the uniform prior."""
        return (self.low + self.high) / 2.0, (self.high - self.low) / np.sqrt(12.0)


class Exp2Draw(NamedTuple):
    theta: np.ndarray
    v: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    resampled: int


def sample_prior_exp2(config: Exp2Config, rng: RNG, count: Optional[int] = None) -> np.ndarray:
    size = None if count is None else (count, len(PARAMETER_NAMES))
    return rng.uniform(config.low, config.high, size=size)


def simulate_exp2(config: Exp2Config, rng: RNG, theta: Optional[np.ndarray] = None) -> Exp2Draw:
    """Ancestral draw of (theta, v, X, Y) with ``X`` the signed RTs and ``Y`` the CPP values."""
    if theta is None:
        theta = sample_prior_exp2(config, rng)
    theta = np.asarray(theta, dtype=np.float64)
    mu, sigma, alpha, tau, beta, eta = theta
    v = mu + sigma * rng.normal(size=config.trials)
    ddm = ddm_sample_batch(alpha, tau, v, beta, config.ddm_step, rng, config.max_time)
    Y = v + eta * rng.normal(size=config.trials)
    return Exp2Draw(theta, v, ddm.signed()[:, None], Y[:, None], ddm.resampled)


def simulate_exp2_batch(config: Exp2Config, count: int, rng: RNG) -> MultiSourceDataset:
    """``count`` complete datasets, dataset ``i`` drawn from the child stream ``i``.

    ``diagnostics["resampled"]`` counts the DDM walks redrawn after hitting the time cap.
    """
    draws = [simulate_exp2(config, rng.stream(i)) for i in range(count)]
    return MultiSourceDataset(
        sources=[SourceData("x", np.stack([d.X for d in draws])), SourceData("y", np.stack([d.Y for d in draws]))],
        theta=np.stack([d.theta for d in draws]),
        parameter_names=config.parameter_names,
        diagnostics={"resampled": sum(d.resampled for d in draws)},
    )


def inject_missing(data: MultiSourceDataset, rate_range: Tuple[float, float], rng: RNG,
                   fill: float = MISSING_FILL) -> Tuple[MultiSourceDataset, MissingnessMask]:
    """Draw one missing rate per source and mask rows independently.

    ``rho_x, rho_y ~ U(rate_range)`` once per call (one training batch), then
    every row is present with probability ``1 - rho``. Rows already absent in
    ``data`` stay absent. The result is encoded by ``apply_missingness``.
    """
    low, high = rate_range
    if not 0.0 <= low <= high < 1.0:
        raise ValueError(f"inject_missing: rate range must lie in [0, 1), got {rate_range}")
    masks = []
    for source in data.sources:
        rate = rng.uniform(low, high) if high > low else low
        present = rng.bernoulli(1.0 - rate, size=source.values.shape[:2])
        if source.presence is not None:
            present &= source.presence
        masks.append(present)
    mask = MissingnessMask(masks, fill)
    return apply_missingness(data, mask), mask
