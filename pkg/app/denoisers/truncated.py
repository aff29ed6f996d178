"""
Non-negative priors: rectified (truncated) Gaussian and the non-negative
Bernoulli-Gaussian spike-and-slab mixture.

Both reduce to the first two moments of a Gaussian N(μ, s) restricted to
x >= 0. The moments are computed from the inverse Mills ratio through the
scaled complementary error function; far in the lower tail they switch to a
continued-fraction form that avoids the cancellation in 1 - h(h - a).
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import erfcx, log_ndtr, logsumexp

from app.core.config import get_settings
from app.core.exceptions import InvalidHyperParameterError
from app.core.logging_config import get_logger
from app.denoisers.base import (
    DenoisedField,
    DenoiserKind,
    EntryDenoiser,
    PseudoObservationField,
    broadcast_parameter,
)

logger = get_logger(__name__)

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def _tail_fractions(a: np.ndarray, depth: int) -> Tuple[np.ndarray, np.ndarray]:
    # T_k = a + k / T_{k+1}, evaluated bottom-up; returns (T_2, T_3)
    t_next = a.copy()
    t_three = t_next
    for k in range(depth, 1, -1):
        if k == 2:
            t_three = t_next
        t_next = a + k / t_next
    return t_next, t_three


def truncated_normal_moments(
    mu: np.ndarray, s: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and variance of N(mu, s) conditioned on x >= 0.

    Args:
        mu: Location of the untruncated Gaussian
        s: Variance of the untruncated Gaussian (> 0)

    Returns:
        Tuple of the truncated mean and variance, element-wise
    """
    settings = get_settings()
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(s, dtype=float)
    root_s = np.sqrt(s)
    a = -mu / root_s

    tail = a > settings.TRUNCATION_ASYMPTOTIC_Z
    a_body = np.where(tail, 0.0, a)
    with np.errstate(over="ignore"):
        h = _SQRT_2_OVER_PI / erfcx(a_body / np.sqrt(2.0))
    body_mean = mu + root_s * h
    body_var = s * (1.0 - h * (h - a_body))

    if not np.any(tail):
        return body_mean, np.maximum(body_var, 0.0)

    a_tail = np.where(tail, a, settings.TRUNCATION_ASYMPTOTIC_Z + 1.0)
    t_two, t_three = _tail_fractions(a_tail, settings.CONTINUED_FRACTION_DEPTH)
    tail_mean = root_s / t_two
    tail_var = s * (2.0 * t_two - t_three) / (t_three * t_two**2)

    means = np.where(tail, tail_mean, body_mean)
    variances = np.where(tail, tail_var, body_var)
    return means, np.maximum(variances, 0.0)


def _validate_location_scale(theta: np.ndarray, phi: np.ndarray) -> None:
    if not np.all(np.isfinite(theta)):
        raise InvalidHyperParameterError("theta", "must be finite")
    if np.any(phi <= 0.0) or not np.all(np.isfinite(phi)):
        raise InvalidHyperParameterError("phi", "must be finite and > 0")


def _slab_posterior(q, v, theta, phi):
    s = phi * v / (phi + v)
    mu = (phi * q + v * theta) / (phi + v)
    return mu, s


class NonNegativeGaussianDenoiser(EntryDenoiser):
    """Prior N+(θ, φ): Gaussian N(θ, φ) truncated to x >= 0."""

    kind = DenoiserKind.NON_NEGATIVE_GAUSSIAN

    def __init__(self, shape: Tuple[int, ...], theta=0.0, phi=1.0):
        super().__init__(shape)
        self.theta = broadcast_parameter("theta", theta, self.shape)
        self.phi = broadcast_parameter("phi", phi, self.shape)
        _validate_location_scale(self.theta, self.phi)

    def _posterior(self, q, v):
        mu, s = _slab_posterior(q, v, self.theta, self.phi)
        return truncated_normal_moments(mu, s)


def _log_normal_pdf(x, mean, variance):
    return -0.5 * (np.log(2.0 * np.pi * variance) + (x - mean) ** 2 / variance)


def denoise_bernoulli_gaussian_nonneg(
    delta,
    theta,
    phi,
    field: PseudoObservationField,
) -> Tuple[DenoisedField, np.ndarray]:
    """
    Posterior moments under (1 - δ)·δ_0 + δ·N+(θ, φ).

    Responsibilities of the slab are formed in the log domain from the two
    marginal likelihoods of q: N(q; 0, v) for the spike and
    N(q; θ, φ + v)·Φ(μ/√s)/Φ(θ/√φ) for the normalized truncated slab.

    Args:
        delta: Slab weight (sparsity rate), scalar or array in [0, 1]
        theta: Slab location
        phi: Slab scale (> 0)
        field: Pseudo-observations

    Returns:
        Tuple of the denoised field and the slab responsibilities
    """
    q, v = field.q_values, field.v_values
    delta = np.broadcast_to(np.asarray(delta, dtype=float), q.shape)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), q.shape)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), q.shape)
    if np.any((delta < 0.0) | (delta > 1.0)):
        raise InvalidHyperParameterError("delta", "must lie in [0, 1]")
    _validate_location_scale(theta, phi)

    mu, s = _slab_posterior(q, v, theta, phi)
    slab_mean, slab_var = truncated_normal_moments(mu, s)

    with np.errstate(divide="ignore"):
        log_slab = (
            np.log(delta)
            + _log_normal_pdf(q, theta, phi + v)
            + log_ndtr(mu / np.sqrt(s))
            - log_ndtr(theta / np.sqrt(phi))
        )
        log_spike = np.log1p(-delta) + _log_normal_pdf(q, 0.0, v)
    log_evidence = logsumexp(np.stack([log_slab, log_spike]), axis=0)
    responsibility = np.exp(log_slab - log_evidence)
    spike_weight = np.exp(log_spike - log_evidence)

    means = responsibility * slab_mean
    variances = responsibility * slab_var + responsibility * spike_weight * slab_mean**2
    return DenoisedField(means, np.maximum(variances, 0.0)), responsibility


class BernoulliGaussianNonNegDenoiser(EntryDenoiser):
    """
    Non-negative spike-and-slab prior.

    With ``learn_rate`` the sparsity rate δ is refreshed after every pass as
    the mean slab responsibility, clipped away from 0 and 1.
    """

    kind = DenoiserKind.BERNOULLI_GAUSSIAN_NON_NEGATIVE

    def __init__(
        self,
        shape: Tuple[int, ...],
        delta: float = 0.5,
        theta=0.0,
        phi=1.0,
        learn_rate: bool = False,
    ):
        super().__init__(shape)
        if not 0.0 < delta < 1.0:
            raise InvalidHyperParameterError("delta", f"must lie in (0, 1), got {delta}")
        self.delta = float(delta)
        self.theta = broadcast_parameter("theta", theta, self.shape)
        self.phi = broadcast_parameter("phi", phi, self.shape)
        _validate_location_scale(self.theta, self.phi)
        self.learn_rate = learn_rate
        self._initial_delta = self.delta
        self._responsibility: Optional[np.ndarray] = None

    def _posterior(self, q, v):
        denoised, self._responsibility = denoise_bernoulli_gaussian_nonneg(
            self.delta, self.theta, self.phi, PseudoObservationField(q, v)
        )
        return denoised.means, denoised.variances

    def learn(self, field: PseudoObservationField, denoised: DenoisedField) -> None:
        if not self.learn_rate or self._responsibility is None:
            return
        clip = get_settings().SPARSITY_RATE_CLIP
        self.delta = float(np.clip(self._responsibility.mean(), clip, 1.0 - clip))
        logger.debug("Bernoulli-Gaussian sparsity rate refreshed", extra={"delta": self.delta})

    def reset(self) -> None:
        self.delta = self._initial_delta
        self._responsibility = None
