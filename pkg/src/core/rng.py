"""Deterministic RNG wrapper for all engine randomness.

This module provides a single, injectable RNG class. Every stochastic
function in the engine (simulators, dropout masks, batch shuffling, weight
initialisation, posterior sampling) takes an RNG argument; nothing touches
NumPy's global random state.
"""

from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]
Shape = Union[int, Tuple[int, ...], None]


class RNG:
    """Deterministic RNG wrapper for all engine randomness.

    Acts as a facade over ``numpy.random.Generator`` with explicit seeding
    and derivation of independent child streams.

    Examples:
        >>> rng = RNG(seed=42)
        >>> rng.normal(size=3)          # Deterministic draws
        >>> rng.bernoulli(0.9, size=5)  # Presence mask
        >>> child = rng.stream(7)       # Independent stream for dataset 7
    """

    def __init__(self, seed: Optional[int] = None, _key: Tuple[int, ...] = ()):
        """Initialize the RNG with an optional seed.

        Args:
            seed: Random seed for reproducible results. If None, uses
                  system entropy (non-deterministic).
        """
        self._seed = seed
        self._key = tuple(_key)
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=self._key)
        self._gen = np.random.Generator(np.random.PCG64(sequence))

    def stream(self, *key: int) -> "RNG":
        """Derive an independent child stream.

        The child depends only on the master seed and ``key``, never on how
        many numbers were drawn from this RNG, so datasets generated by
        different workers come out identical.

        Args:
            key: Non-negative integers (purpose tag, dataset index, ...)

        Returns:
            New RNG seeded from (seed, parent key + key)
        """
        if self._seed is None:
            raise ValueError("Child streams require a seeded RNG")
        return RNG(self._seed, _key=self._key + tuple(int(k) for k in key))

    def random(self, size: Shape = None) -> ArrayLike:
        """Return uniform floats in [0.0, 1.0)."""
        return self._gen.random(size)

    def normal(self, loc: ArrayLike = 0.0, scale: ArrayLike = 1.0, size: Shape = None) -> ArrayLike:
        """Return normal draws with the given location and scale."""
        return self._gen.normal(loc, scale, size)

    def uniform(self, low: ArrayLike = 0.0, high: ArrayLike = 1.0, size: Shape = None) -> ArrayLike:
        """Return uniform draws in [low, high)."""
        return self._gen.uniform(low, high, size)

    def bernoulli(self, p: ArrayLike, size: Shape = None) -> np.ndarray:
        """Return boolean draws that are True with probability ``p``.

        Examples:
            >>> rng = RNG(seed=1)
            >>> rng.bernoulli(0.9, size=4)  # presence mask, ~90% True
        """
        return self._gen.random(size) < p

    def integers(self, low: int, high: int, size: Shape = None) -> Any:
        """Return integers in [low, high)."""
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        """Return a random permutation of range(n)."""
        return self._gen.permutation(n)

    def choice(self, seq: Sequence[Any]) -> Any:
        """Return a random element from a non-empty sequence.

        Raises:
            IndexError: If sequence is empty
        """
        if len(seq) == 0:
            raise IndexError("Cannot choose from an empty sequence")
        return seq[int(self._gen.integers(0, len(seq)))]

    def get_state(self) -> Dict[str, Any]:
        """Return the bit-generator state as a JSON-safe dict."""
        state = self._gen.bit_generator.state
        return {
            "seed": self._seed,
            "key": list(self._key),
            "bit_generator": _jsonable(state),
        }

    def set_state(self, state: Dict[str, Any]) -> None:
        """Restore a state produced by ``get_state``."""
        self._gen.bit_generator.state = state["bit_generator"]

    @property
    def generator(self) -> np.random.Generator:
        """Underlying NumPy generator (for vectorised draws)."""
        return self._gen

    @property
    def seed(self) -> Optional[int]:
        """Get the seed used to initialize this RNG.

        Returns:
            The seed value, or None if initialized without a seed
        """
        return self._seed

    def __repr__(self) -> str:
        """Return a string representation of the RNG."""
        if self._key:
            return f"RNG(seed={self._seed}, key={self._key})"
        return f"RNG(seed={self._seed})"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, np.integer):
        return int(value)
    return value
