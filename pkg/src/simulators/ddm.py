"""Wiener drift-diffusion first-passage sampling.

The walk starts at ``beta * alpha``, drifts with rate ``v`` under unit
diffusion and is absorbed at 0 (lower) or ``alpha`` (upper). Paths are
generated in vectorised chunks of Euler steps; between two grid points the
path is treated as a Brownian bridge, and a crossing that happens strictly
inside a step is detected with probability
``exp(-2 (a - x0)(a - x1) / dt)``. That removes the boundary overshoot bias
of a plain Euler walk.
"""

import math
from typing import NamedTuple, Tuple

import numpy as np

from src.core.rng import RNG

MAX_TIME = 10.0
# upper bound on (active trials x chunk steps) held in memory at once
CHUNK_ELEMENTS = 2_000_000
MAX_CHUNK_STEPS = 512
MAX_RESAMPLE_ROUNDS = 100


class DdmTrial(NamedTuple):
    rt: float
    upper: bool
    resampled: int


class DdmBatch(NamedTuple):
    rt: np.ndarray
    upper: np.ndarray
    resampled: int

    def signed(self) -> np.ndarray:
        """Signed reaction times: positive for upper, negative for lower responses."""
        return np.where(self.upper, self.rt, -self.rt)


def _check(alpha: float, beta: float, tau: float, step: float) -> None:
    if alpha <= 0:
        raise ValueError(f"DDM boundary separation must be > 0, got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"DDM starting point must be in (0, 1), got {beta}")
    if tau < 0:
        raise ValueError(f"DDM non-decision time must be >= 0, got {tau}")
    if step <= 0:
        raise ValueError(f"DDM Euler step must be > 0, got {step}")


def _walk(alpha: float, start: float, drift: np.ndarray, dt: float, max_time: float,
          rng: RNG) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First-passage times for one round of walks; ``done`` is False for capped walks."""
    m = drift.size
    x = np.full(m, start)
    t_hit = np.full(m, np.nan)
    upper = np.zeros(m, dtype=bool)
    done = np.zeros(m, dtype=bool)
    total_steps = int(math.ceil(max_time / dt))
    sqrt_dt = math.sqrt(dt)
    active = np.arange(m)
    k0 = 0
    while active.size and k0 < total_steps:
        k = min(MAX_CHUNK_STEPS, max(1, CHUNK_ELEMENTS // active.size), total_steps - k0)
        noise = rng.normal(size=(active.size, k))
        path = x[active, None] + np.cumsum(drift[active, None] * dt + sqrt_dt * noise, axis=1)
        prev = np.concatenate([x[active, None], path[:, :-1]], axis=1)
        above = path >= alpha
        below = path <= 0.0
        inside = ~(above | below)
        p_up = np.where(inside, np.exp(np.minimum(-2.0 * (alpha - prev) * (alpha - path) / dt, 0.0)), 0.0)
        p_low = np.where(inside, np.exp(np.minimum(-2.0 * prev * path / dt, 0.0)), 0.0)
        u = rng.random(size=(active.size, k))
        bridge_up = u < p_up
        bridge_low = ~bridge_up & (u < p_up + p_low)
        hit_up = above | bridge_up
        hit = hit_up | below | bridge_low

        finished = hit.any(axis=1)
        first = np.argmax(hit, axis=1)
        rows = np.flatnonzero(finished)
        idx = active[rows]
        t_hit[idx] = (k0 + first[rows] + 1) * dt
        upper[idx] = hit_up[rows, first[rows]]
        done[idx] = True

        still = ~finished
        x[active[still]] = path[still, -1]
        active = active[still]
        k0 += k
    return t_hit, upper, done


def ddm_sample_batch(alpha: float, tau: float, v: np.ndarray, beta: float, step: float, rng: RNG,
                     max_time: float = MAX_TIME) -> DdmBatch:
    """One trial per drift rate in ``v``.

    Walks that are not absorbed within ``max_time`` seconds are resampled;
    the number of resampled walks is returned for diagnostics.

    Raises:
        ValueError: For invalid parameters
        RuntimeError: If walks keep exceeding the time cap
    """
    _check(alpha, beta, tau, step)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    rt = np.empty(v.size)
    upper = np.zeros(v.size, dtype=bool)
    pending = np.arange(v.size)
    resampled = 0
    for _ in range(MAX_RESAMPLE_ROUNDS):
        if pending.size == 0:
            break
        t_hit, up, done = _walk(alpha, beta * alpha, v[pending], step, max_time, rng)
        rt[pending[done]] = tau + t_hit[done]
        upper[pending[done]] = up[done]
        pending = pending[~done]
        resampled += int(pending.size)
    else:
        if pending.size:
            raise RuntimeError(f"{pending.size} DDM walks exceeded {max_time}s in {MAX_RESAMPLE_ROUNDS} rounds")
    return DdmBatch(rt, upper, resampled)


def ddm_sample(alpha: float, tau: float, v: float, beta: float, step: float, rng: RNG,
               max_time: float = MAX_TIME) -> DdmTrial:
    """A single trial: reaction time (> tau) and whether the upper boundary was hit."""
    batch = ddm_sample_batch(alpha, tau, np.array([v]), beta, step, rng, max_time)
    return DdmTrial(float(batch.rt[0]), bool(batch.upper[0]), batch.resampled)


def wiener_upper_probability(alpha: float, beta: float, v: float) -> float:
    """Closed-form probability of absorption at the upper boundary."""
    if v == 0:
        return float(beta)
    return float(np.expm1(-2.0 * v * alpha * beta) / np.expm1(-2.0 * v * alpha))
