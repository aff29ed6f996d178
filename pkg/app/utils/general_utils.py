from typing import Any

import numpy as np

from app.core.config import get_settings


def make_rng(seed: Any) -> np.random.Generator:
    """Generator driven by the configured bit generator (PCG64 by default)."""
    bit_generator = getattr(np.random, get_settings().RNG_BIT_GENERATOR)
    return np.random.Generator(bit_generator(seed))


def ratio_to_db(ratio: float) -> float:
    """10·log10(ratio), floored at ``NMSE_FLOOR_DB`` for exact matches."""
    floor = get_settings().NMSE_FLOOR_DB
    if ratio <= 0.0:
        return floor
    return max(10.0 * float(np.log10(ratio)), floor)


def frobenius_sq(matrix: np.ndarray) -> float:
    return float(np.sum(np.square(matrix)))
