"""Seeded, counter-based random streams.

Every random draw in the lab comes from a Philox generator keyed by
``(seed, purpose, index...)``.  Philox is counter-based, so a substream for
trial ``t`` is independent of how many draws other trials made, and running
trials in any order (or in parallel) reproduces the sequential result.
"""

import logging
from enum import IntEnum

import numpy as np

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.Philox4x64-10"


class Purpose(IntEnum):
    MATRIX = 1
    NOISE = 2
    SIGNAL = 3
    PANEL = 4
    LIPSCHITZ = 5
    TRIAL = 6


def substream(seed: int, purpose: Purpose, *index: int) -> np.random.Generator:
    """
    Build the generator for one (seed, purpose, index...) key.

    Args:
        seed: Experiment seed (non-negative integer, up to 64 bits)
        purpose: What the stream is used for
        index: Further integer key components (trial number, panel slot, ...)

    Returns:
        A numpy Generator backed by Philox
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = (int(purpose),) + tuple(int(i) for i in index)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))


def describe() -> dict:
    return {"rng_algorithm": RNG_ALGORITHM, "numpy_version": np.__version__}
