"""
Seeded random numbers for pyphsim

All samplers draw from a counter-based Philox stream so a seed reproduces
the same draws on every platform.
"""

from typing import Union

import numpy as np

SeedLike = Union[None, int, np.random.Generator]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """
    Return a Generator over the Philox bit generator.

    Args:
        seed: Integer seed, an existing Generator (returned unchanged) or None
            for the fixed default seed 0

    Returns:
        numpy Generator
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    if int(seed) < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))
