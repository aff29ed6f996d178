"""
Gaussian-family denoisers: fixed Gaussian, learned-variance Gaussian,
hierarchical Gaussian-Gamma (sparse Bayesian learning) and known entries.
"""

from typing import Optional, Tuple

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import (
    DimensionMismatchError,
    InvalidHyperParameterError,
)
from app.core.logging_config import get_logger
from app.denoisers.base import (
    DenoisedField,
    DenoiserKind,
    EntryDenoiser,
    PseudoObservationField,
    broadcast_parameter,
)

logger = get_logger(__name__)


def _gaussian_product(
    q: np.ndarray, v: np.ndarray, mean: np.ndarray, variance: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    # infinite prior variance is a flat prior; zero variance pins the entry
    flat = np.isinf(variance)
    finite_var = np.where(flat, 0.0, variance)
    denom = finite_var + v
    means = np.where(flat, q, (finite_var * q + v * mean) / denom)
    variances = np.where(flat, v, finite_var * v / denom)
    return means, variances


class GaussianDenoiser(EntryDenoiser):
    """Prior N(mean, variance); ``variance`` may be 0 (known) or inf (flat)."""

    kind = DenoiserKind.GAUSSIAN

    def __init__(self, shape: Tuple[int, ...], mean=0.0, variance=1.0):
        super().__init__(shape)
        self.mean = broadcast_parameter("gaussian mean", mean, self.shape)
        self.variance = broadcast_parameter("gaussian variance", variance, self.shape)
        if np.any(self.variance < 0.0) or np.any(np.isnan(self.variance)):
            raise InvalidHyperParameterError("variance", "must be >= 0")

    @classmethod
    def flat(cls, shape: Tuple[int, ...]) -> "GaussianDenoiser":
        """Improper uniform prior: the posterior equals the pseudo-observation."""
        return cls(shape, mean=0.0, variance=np.inf)

    def _posterior(self, q, v):
        return _gaussian_product(q, v, self.mean, self.variance)

    def gaussian_prior(self):
        with np.errstate(divide="ignore"):
            precision = 1.0 / self.variance
        return self.mean.copy(), precision


def update_alpha(
    upper_field: PseudoObservationField, alpha_prev: float
) -> Tuple[float, DenoisedField]:
    """
    Denoise a block under N(0, alpha_prev) and re-estimate the prior variance.

    The refreshed variance is the mean posterior second moment of the block,
    sum(Ξ' + |X̂'|²) / (number of entries), floored at ``VARIANCE_FLOOR``.

    Args:
        upper_field: Pseudo-observations of the block
        alpha_prev: Prior variance used for this denoising pass

    Returns:
        Tuple of the new variance and the denoised block
    """
    if not alpha_prev > 0.0:
        raise InvalidHyperParameterError("alpha", f"must be > 0, got {alpha_prev}")
    if upper_field.q_values.size == 0:
        raise DimensionMismatchError("learned-variance block", "(>= 1 entries)", upper_field.shape)

    means, variances = _gaussian_product(
        upper_field.q_values, upper_field.v_values, 0.0, np.asarray(alpha_prev, dtype=float)
    )
    denoised = DenoisedField(means, variances)
    return _refresh_alpha(denoised), denoised


def _refresh_alpha(denoised: DenoisedField) -> float:
    second_moment = float(np.mean(denoised.variances + denoised.means**2))
    return max(second_moment, get_settings().VARIANCE_FLOOR)


class LearnedVarianceGaussianDenoiser(GaussianDenoiser):
    """Zero-mean Gaussian prior whose variance α is learned by VI."""

    kind = DenoiserKind.LEARNED_GAUSSIAN

    def __init__(self, shape: Tuple[int, ...], alpha: Optional[float] = None):
        alpha = get_settings().ALPHA_INIT if alpha is None else float(alpha)
        if not alpha > 0.0:
            raise InvalidHyperParameterError("alpha", f"must be > 0, got {alpha}")
        super().__init__(shape, mean=0.0, variance=alpha)
        self.alpha = alpha
        self._initial_alpha = alpha

    def learn(self, field: PseudoObservationField, denoised: DenoisedField) -> None:
        self.alpha = _refresh_alpha(denoised)
        self.variance.fill(self.alpha)

    def reset(self) -> None:
        self.alpha = self._initial_alpha
        self.variance.fill(self.alpha)


def update_gamma(
    field: DenoisedField,
    epsilon: float,
    eta: float,
    row_shared: bool = False,
) -> np.ndarray:
    """
    Precision update of the hierarchical Gaussian-Gamma prior.

    Computes γ̂ = (1 + 2ε) / (2η + Ξ + |x̂|²) element-wise. With ``row_shared``
    the statistic Ξ + |x̂|² is averaged along each row and one precision is
    broadcast across the row (columns sharing a common support).

    The result is clamped to [GAMMA_FLOOR, GAMMA_CEILING]. With ε = η = 0 an
    entry of zero energy (x̂ = 0, Ξ = 0) has an unbounded precision, so it
    gets GAMMA_CEILING, the clamp value on that side.

    Args:
        field: Current posterior means and variances
        epsilon: Gamma shape parameter ε >= 0
        eta: Gamma scale parameter η >= 0
        row_shared: Share one precision per row

    Returns:
        np.ndarray: Precision matrix with the shape of ``field``
    """
    if epsilon < 0.0:
        raise InvalidHyperParameterError("epsilon", f"must be >= 0, got {epsilon}")
    if eta < 0.0:
        raise InvalidHyperParameterError("eta", f"must be >= 0, got {eta}")
    if np.any(field.variances < 0.0):
        raise InvalidHyperParameterError("variances", "posterior variances must be >= 0")

    settings = get_settings()
    energy = field.variances + np.abs(field.means) ** 2
    if row_shared and energy.ndim == 2:
        energy = np.broadcast_to(energy.mean(axis=1, keepdims=True), energy.shape)

    with np.errstate(divide="ignore"):
        gamma = (1.0 + 2.0 * epsilon) / (2.0 * eta + energy)
    gamma = np.nan_to_num(gamma, nan=settings.GAMMA_CEILING, posinf=settings.GAMMA_CEILING)
    return np.clip(gamma, settings.GAMMA_FLOOR, settings.GAMMA_CEILING)


class GaussianGammaDenoiser(EntryDenoiser):
    """
    Sparsity-promoting prior N(x; 0, 1/γ), γ ~ Ga(ε, η).

    The posterior uses the current precision estimate Γ̂; ``learn`` refreshes
    Γ̂ from the posterior it produced.
    """

    kind = DenoiserKind.GAUSSIAN_GAMMA

    def __init__(
        self,
        shape: Tuple[int, ...],
        epsilon: Optional[float] = None,
        eta: Optional[float] = None,
        gamma=None,
        row_shared: bool = False,
    ):
        super().__init__(shape)
        settings = get_settings()
        self.epsilon = settings.GAMMA_EPSILON if epsilon is None else float(epsilon)
        self.eta = settings.GAMMA_ETA if eta is None else float(eta)
        if self.epsilon < 0.0:
            raise InvalidHyperParameterError("epsilon", f"must be >= 0, got {self.epsilon}")
        if self.eta < 0.0:
            raise InvalidHyperParameterError("eta", f"must be >= 0, got {self.eta}")
        gamma = settings.GAMMA_INIT if gamma is None else gamma
        self.gamma = broadcast_parameter("gamma", gamma, self.shape)
        if np.any(self.gamma < 0.0) or not np.all(np.isfinite(self.gamma)):
            raise InvalidHyperParameterError("gamma", "precisions must be finite and >= 0")
        self.row_shared = row_shared
        self._initial_gamma = self.gamma.copy()

    def _posterior(self, q, v):
        shrink = 1.0 + self.gamma * v
        return q / shrink, v / shrink

    def gaussian_prior(self):
        return np.zeros(self.shape), self.gamma.copy()

    def learn(self, field: PseudoObservationField, denoised: DenoisedField) -> None:
        self.gamma = update_gamma(denoised, self.epsilon, self.eta, self.row_shared)

    def reset(self) -> None:
        self.gamma = self._initial_gamma.copy()


class KnownEntriesDenoiser(EntryDenoiser):
    """
    Zero-variance prior pinning masked entries to known values.

    Unmasked entries are handled by ``fallback`` (flat prior by default).
    """

    kind = DenoiserKind.KNOWN_ENTRIES

    def __init__(
        self,
        shape: Tuple[int, ...],
        values,
        mask=None,
        fallback: Optional[EntryDenoiser] = None,
    ):
        super().__init__(shape)
        self.values = broadcast_parameter("known values", values, self.shape)
        if mask is None:
            mask = np.ones(self.shape, dtype=bool)
        mask = np.asarray(mask)
        if mask.dtype != bool:
            raise InvalidHyperParameterError("mask", f"must be boolean, got {mask.dtype}")
        if mask.shape != self.shape:
            raise DimensionMismatchError("known-entries mask", self.shape, mask.shape)
        self.mask = mask
        self.fallback = fallback or GaussianDenoiser.flat(self.shape)
        if self.fallback.shape != self.shape:
            raise DimensionMismatchError("known-entries fallback", self.shape, self.fallback.shape)

    def _posterior(self, q, v):
        means, variances = self.fallback._posterior(q, v)
        means = np.where(self.mask, self.values, means)
        variances = np.where(self.mask, 0.0, variances)
        return means, variances

    def gaussian_prior(self):
        prior = self.fallback.gaussian_prior()
        if prior is None:
            return None
        means, precisions = prior
        return np.where(self.mask, self.values, means), np.where(self.mask, np.inf, precisions)

    def learn(self, field: PseudoObservationField, denoised: DenoisedField) -> None:
        self.fallback.learn(field, denoised)

    def reset(self) -> None:
        self.fallback.reset()
