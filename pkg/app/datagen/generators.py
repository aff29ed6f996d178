"""
Seeded synthetic data generators.

All generators draw from a caller-supplied ``numpy.random.Generator`` so a
(GenSpec, seed) pair always reproduces the same matrices.
"""

import math
from typing import Literal, Optional, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import get_settings
from app.core.exceptions import DataGenerationError
from app.utils.general_utils import frobenius_sq


class GenSpec(BaseModel):
    """
    Parameters of one synthetic instance.

    ``snr_db`` may be ``inf`` for noiseless data. ``per_column_sparsity``
    switches sparse codes from a Bernoulli rate to an exact count per column.
    """

    model_config = ConfigDict(frozen=True)

    seed: int = 0
    m: int = Field(default=20, ge=1)
    n: int = Field(default=5, ge=1)
    l: int = Field(default=20, ge=1)
    rho: float = Field(default=0.0, ge=0.0, le=1.0)
    sparsity: float = Field(default=0.1, ge=0.0, le=1.0)
    per_column_sparsity: Optional[int] = Field(default=None, ge=0)
    outlier_lo: float = Field(default_factory=lambda: get_settings().OUTLIER_LOW)
    outlier_hi: float = Field(default_factory=lambda: get_settings().OUTLIER_HIGH)
    snr_db: float = 60.0
    nu: float = Field(default=0.01, ge=0.0)
    common_support: bool = False

    @model_validator(mode="after")
    def _check_ranges(self) -> "GenSpec":
        if not self.outlier_lo < self.outlier_hi:
            raise ValueError(f"outlier_lo ({self.outlier_lo}) must be below outlier_hi ({self.outlier_hi})")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("snr_db must be finite or +inf")
        return self


def correlation_matrix(size: int, rho: float) -> np.ndarray:
    """Toeplitz matrix with entries ρ^|i−j|."""
    return scipy.linalg.toeplitz(rho ** np.arange(size, dtype=float))


def gen_correlated(m: int, n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """C_L·G·C_R with G i.i.d. N(0, 1) and C_L, C_R correlation matrices of sizes M and N."""
    if not 0.0 <= rho <= 1.0:
        raise DataGenerationError("gen_correlated", f"rho must lie in [0, 1], got {rho}")
    if m < 1 or n < 1:
        raise DataGenerationError("gen_correlated", f"invalid dimensions {(m, n)}")
    g = rng.standard_normal((m, n))
    if rho == 0.0:
        return g
    return correlation_matrix(m, rho) @ g @ correlation_matrix(n, rho)


def gen_sparse(
    n: int,
    l: int,
    level: float,
    rng: np.random.Generator,
    mode: Literal["rate", "per_column_count"] = "rate",
) -> np.ndarray:
    """
    Sparse N×L matrix with i.i.d. N(0, 1) nonzeros.

    In "rate" mode every entry is nonzero with probability ``level``; in
    "per_column_count" mode every column has exactly ``level`` nonzeros at
    uniformly chosen rows.
    """
    values = rng.standard_normal((n, l))
    if mode == "rate":
        if not 0.0 <= level <= 1.0:
            raise DataGenerationError("gen_sparse", f"rate must lie in [0, 1], got {level}")
        mask = rng.random((n, l)) < level
    elif mode == "per_column_count":
        count = int(level)
        if count != level or count < 0:
            raise DataGenerationError("gen_sparse", f"count must be a non-negative integer, got {level}")
        if count > n:
            raise DataGenerationError("gen_sparse", f"count {count} exceeds column length {n}")
        ranks = np.argsort(rng.random((n, l)), axis=0)
        mask = ranks < count
    else:
        raise DataGenerationError("gen_sparse", f"unknown mode {mode!r}")
    return np.where(mask, values, 0.0)


def gen_outliers(
    m: int, l: int, rate: float, lo: float, hi: float, rng: np.random.Generator
) -> np.ndarray:
    """Outlier field: Bernoulli(rate) support, Uniform[lo, hi] values."""
    if not lo < hi:
        raise DataGenerationError("gen_outliers", f"empty interval [{lo}, {hi}]")
    if not 0.0 <= rate <= 1.0:
        raise DataGenerationError("gen_outliers", f"rate must lie in [0, 1], got {rate}")
    mask = rng.random((m, l)) < rate
    values = rng.uniform(lo, hi, size=(m, l))
    return np.where(mask, values, 0.0)


def noise_variance(Z: np.ndarray, snr_db: float) -> float:
    """σ² = ‖Z‖²_F / (M·L·10^{snr/10})."""
    if snr_db == math.inf:
        return 0.0
    energy = frobenius_sq(Z)
    if energy == 0.0:
        raise DataGenerationError("add_noise", "signal is zero, SNR is undefined")
    return energy / (Z.size * 10.0 ** (snr_db / 10.0))


def add_noise(Z: np.ndarray, snr_db: float, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """
    Y = Z + W with W i.i.d. N(0, σ²) calibrated to ``snr_db``.

    Returns:
        Tuple of Y and the true noise variance (0 for infinite SNR)
    """
    Z = np.asarray(Z, dtype=float)
    sigma2 = noise_variance(Z, snr_db)
    if sigma2 == 0.0:
        return Z.copy(), 0.0
    return Z + math.sqrt(sigma2) * rng.standard_normal(Z.shape), sigma2
