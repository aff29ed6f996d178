"""Per-application synthetic instances built from the generators."""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import DataGenerationError
from app.core.logging_config import get_logger
from app.datagen.generators import (
    GenSpec,
    add_noise,
    gen_correlated,
    gen_outliers,
    gen_sparse,
    noise_variance,
)
from app.utils.general_utils import make_rng

logger = get_logger(__name__)


@dataclass
class Instance:
    """
    Ground truth and observation of one synthetic problem.

    ``Z`` is the noiseless signal the metrics compare against (the low-rank
    part for RPCA). For the linear-model instance ``H`` is the measurement
    matrix and ``X``, ``Y`` are vectors.
    """

    application: str
    Y: np.ndarray
    Z: np.ndarray
    H: np.ndarray
    X: np.ndarray
    noise_variance: float
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def noise_precision(self) -> float:
        return np.inf if self.noise_variance == 0.0 else 1.0 / self.noise_variance


def _sparsity_count(spec: GenSpec) -> int:
    if spec.per_column_sparsity is not None:
        count = spec.per_column_sparsity
    else:
        count = int(round(get_settings().DL_SPARSITY_FRACTION * spec.n))
    if count > spec.n:
        raise DataGenerationError("sparse code", f"count {count} exceeds n={spec.n}")
    return count


def _factorization(application: str, spec: GenSpec, H: np.ndarray, X: np.ndarray, rng, **extras) -> Instance:
    Z = H @ X
    Y, sigma2 = add_noise(Z, spec.snr_db, rng)
    return Instance(application, Y, Z, H, X, sigma2, dict(extras))


def _rpca(spec: GenSpec, rng: np.random.Generator) -> Instance:
    A = gen_correlated(spec.m, spec.n, spec.rho, rng)
    B = gen_correlated(spec.n, spec.l, spec.rho, rng)
    Z = A @ B
    E = gen_outliers(spec.m, spec.l, spec.sparsity, spec.outlier_lo, spec.outlier_hi, rng)
    # noise is calibrated on the low-rank part
    sigma2 = noise_variance(Z, spec.snr_db)
    W = np.sqrt(sigma2) * rng.standard_normal(Z.shape) if sigma2 > 0.0 else np.zeros_like(Z)
    return Instance("rpca", Z + E + W, Z, A, B, sigma2, {"E": E})


def _dl(spec: GenSpec, rng: np.random.Generator) -> Instance:
    H = gen_correlated(spec.m, spec.n, spec.rho, rng)
    X = gen_sparse(spec.n, spec.l, _sparsity_count(spec), rng, mode="per_column_count")
    return _factorization("dl", spec, H, X, rng)


def _csmu(spec: GenSpec, rng: np.random.Generator) -> Instance:
    h_bar = gen_correlated(spec.m, spec.n, spec.rho, rng)
    perturbation = np.sqrt(spec.nu) * gen_correlated(spec.m, spec.n, spec.rho, rng)
    count = _sparsity_count(spec)
    if spec.common_support:
        rows = rng.permutation(spec.n)[:count]
        X = np.zeros((spec.n, spec.l))
        X[rows] = rng.standard_normal((count, spec.l))
    else:
        X = gen_sparse(spec.n, spec.l, count, rng, mode="per_column_count")
    return _factorization("csmu", spec, h_bar + perturbation, X, rng, h_bar=h_bar)


def _nmf(spec: GenSpec, rng: np.random.Generator) -> Instance:
    H = np.abs(gen_correlated(spec.m, spec.n, spec.rho, rng))
    X = np.abs(gen_correlated(spec.n, spec.l, spec.rho, rng))
    return _factorization("nmf", spec, H, X, rng)


def _sparse_mf(spec: GenSpec, rng: np.random.Generator) -> Instance:
    H = gen_sparse(spec.m, spec.n, spec.sparsity, rng)
    X = gen_sparse(spec.n, spec.l, spec.sparsity, rng)
    return _factorization("sparse_mf", spec, H, X, rng)


def _sparse_nmf(spec: GenSpec, rng: np.random.Generator) -> Instance:
    H = np.abs(gen_sparse(spec.m, spec.n, spec.sparsity, rng))
    X = np.abs(gen_sparse(spec.n, spec.l, spec.sparsity, rng))
    return _factorization("sparse_nmf", spec, H, X, rng)


def _uamp(spec: GenSpec, rng: np.random.Generator) -> Instance:
    A = rng.standard_normal((spec.m, spec.n)) / np.sqrt(spec.m)
    if spec.per_column_sparsity is not None:
        count = spec.per_column_sparsity
    else:
        count = int(round(spec.sparsity * spec.n))
    x = gen_sparse(spec.n, 1, min(count, spec.n), rng, mode="per_column_count")[:, 0]
    z = A @ x
    y, sigma2 = add_noise(z, spec.snr_db, rng)
    return Instance("uamp", y, z, A, x, sigma2)


GENERATORS: Dict[str, Callable[[GenSpec, np.random.Generator], Instance]] = {
    "rpca": _rpca,
    "dl": _dl,
    "csmu": _csmu,
    "nmf": _nmf,
    "sparse_mf": _sparse_mf,
    "sparse_nmf": _sparse_nmf,
    "uamp": _uamp,
}


def generate_instance(
    application: str, spec: GenSpec, rng: Optional[np.random.Generator] = None
) -> Instance:
    """
    Draw one instance of ``application`` from ``spec``.

    Args:
        application: One of the registered application names
        spec: Dimensions, correlation, sparsity and SNR
        rng: Random source; defaults to one seeded with ``spec.seed``

    Returns:
        Instance: Observation and ground truth
    """
    generator = GENERATORS.get(application)
    if generator is None:
        raise DataGenerationError(application, f"unknown application, expected one of {sorted(GENERATORS)}")
    rng = rng if rng is not None else make_rng(spec.seed)
    logger.debug(
        f"Generating {application} instance",
        extra={"seed": spec.seed, "m": spec.m, "n": spec.n, "l": spec.l},
    )
    return generator(spec, rng)
