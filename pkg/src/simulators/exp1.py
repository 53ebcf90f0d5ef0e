"""Conjugate Gaussian two-source model.

    theta ~ N(0, I_d)
    x_n ~ N(theta, I_d)                       n = 1..N   (set source)
    dy(t) = theta dt + sigma dW(t), y(0) = 0  on [0, T] (series source, M grid points)

Both sources depend on the same theta, and the posterior is Gaussian with a
closed form, which makes this the calibration oracle for the whole pipeline.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import ShapeError
from src.core.rng import RNG
from src.fusion.missingness import MultiSourceDataset, SourceData


class Exp1Config(BaseModel):
    """Settings of the conjugate model."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: int = Field(10, ge=1)
    n_rows: int = Field(5, ge=0)
    n_steps: int = Field(20, ge=2)
    sigma: float = Field(0.5, ge=0)
    horizon: float = Field(3.0, gt=0)

    @property
    def dt(self) -> float:
        return self.horizon / (self.n_steps - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps)

    @property
    def parameter_names(self):
        return [f"theta{i + 1}" for i in range(self.dim)]


class Exp1Draw(NamedTuple):
    theta: np.ndarray
    X: np.ndarray
    Y: np.ndarray


def simulate_exp1(config: Exp1Config, rng: RNG, theta: Optional[np.ndarray] = None) -> Exp1Draw:
    """Ancestral draw of (theta, X, Y); pass ``theta`` to simulate at a fixed parameter."""
    if theta is None:
        theta = rng.normal(size=config.dim)
    theta = np.asarray(theta, dtype=np.float64)
    X = theta + rng.normal(size=(config.n_rows, config.dim))
    increments = theta * config.dt + config.sigma * np.sqrt(config.dt) * rng.normal(size=(config.n_steps - 1, config.dim))
    Y = np.vstack([np.zeros((1, config.dim)), np.cumsum(increments, axis=0)])
    return Exp1Draw(theta, X, Y)


def simulate_exp1_batch(config: Exp1Config, count: int, rng: RNG) -> MultiSourceDataset:
    """``count`` datasets, dataset ``i`` drawn from the child stream ``i``."""
    draws = [simulate_exp1(config, rng.stream(i)) for i in range(count)]
    return MultiSourceDataset(
        sources=[
            SourceData("x", np.stack([d.X for d in draws])),
            SourceData("y", np.stack([d.Y for d in draws]), times=config.times),
        ],
        theta=np.stack([d.theta for d in draws]),
        parameter_names=config.parameter_names,
    )


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian posterior; leading axes index datasets."""
    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.precision = np.broadcast_to(np.asarray(self.precision, dtype=np.float64), self.mean.shape).copy()
        if np.any(self.precision <= 0):
            raise ValueError("GaussianPosterior precision must be positive")

    @property
    def variance(self) -> np.ndarray:
        return 1.0 / self.precision

    @property
    def covariance(self) -> np.ndarray:
        """Diagonal covariance matrix (or a stack of them)."""
        return self.variance[..., :, None] * np.eye(self.mean.shape[-1])

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def sample(self, count: int, rng: RNG) -> np.ndarray:
        """``count`` draws per dataset, shape ``(*batch, count, dim)``."""
        if count < 1:
            raise ValueError(f"sample: count must be >= 1, got {count}")
        shape = self.mean.shape[:-1] + (count, self.mean.shape[-1])
        z = rng.normal(size=shape)
        return self.mean[..., None, :] + self.sd[..., None, :] * z


def analytic_posterior_exp1(X: np.ndarray, Y: np.ndarray, config: Exp1Config) -> GaussianPosterior:
    """Exact posterior of the conjugate model.

    Per dimension, the precision is ``1 + N + T / sigma^2`` (the trajectory
    increments contribute ``dt / sigma^2`` each, which telescopes to
    ``T / sigma^2``) and the mean is
    ``(sum_n x_n + (y_M - y_1) / sigma^2) / precision``.
    Works on one dataset (N x d, M x d) or a stack (B x N x d, B x M x d).

    Raises:
        ShapeError: If X and Y disagree on the parameter dimension
        ValueError: If sigma is zero
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[-1] != Y.shape[-1] or X.shape[:-2] != Y.shape[:-2]:
        raise ShapeError("analytic_posterior_exp1", X.shape, Y.shape)
    if config.sigma <= 0:
        raise ValueError("analytic_posterior_exp1 needs sigma > 0")
    n = X.shape[-2]
    m = Y.shape[-2]
    observed_time = (m - 1) * config.dt if m > 1 else 0.0
    precision = 1.0 + n + observed_time / config.sigma ** 2
    drift_evidence = (Y[..., -1, :] - Y[..., 0, :]) / config.sigma ** 2 if m > 1 else 0.0
    mean = (X.sum(axis=-2) + drift_evidence) / precision
    return GaussianPosterior(mean, np.full(mean.shape, precision))
