"""
Entry-wise denoiser interface.

A denoiser maps a field of scalar Gaussian pseudo-observations q = x + w,
w ~ N(0, v), to the posterior mean and variance of every entry under a
separable prior. Priors with learnable hyper-parameters refresh them in
``learn`` once per iteration, after the field has been denoised.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError, InvalidPseudoObservationError


class DenoiserKind(str, Enum):
    """
    Enumeration of the supported prior families.

    The value doubles as the registry key of ``DenoiserFactory``.
    """

    GAUSSIAN = "gaussian"
    LEARNED_GAUSSIAN = "learned_gaussian"
    GAUSSIAN_GAMMA = "gaussian_gamma"
    NON_NEGATIVE_GAUSSIAN = "non_negative_gaussian"
    KNOWN_ENTRIES = "known_entries"
    BERNOULLI_GAUSSIAN_NON_NEGATIVE = "bernoulli_gaussian_non_negative"
    BLOCK_COMPOSITE = "block_composite"


def take_block(values: np.ndarray, axis: str, start: int, stop: int) -> np.ndarray:
    """Slice a row range (``axis="rows"``) or column range (``axis="columns"``)."""
    if axis == "rows":
        return values[start:stop]
    return values[:, start:stop]


@dataclass(frozen=True)
class PseudoObservationField:
    """Pseudo-observation means and variances (Q and V_Q)."""

    q_values: np.ndarray
    v_values: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q_values, dtype=float)
        v = np.asarray(self.v_values, dtype=float)
        if v.shape != q.shape:
            # scalar variances (UAMPv2) are broadcast to the field
            try:
                v = np.broadcast_to(v, q.shape)
            except ValueError as e:
                raise DimensionMismatchError("pseudo-observation variances", q.shape, v.shape) from e
        if not np.all(np.isfinite(q)):
            raise InvalidPseudoObservationError("non-finite pseudo-observation means")
        if not np.all(np.isfinite(v)):
            raise InvalidPseudoObservationError("non-finite pseudo-observation variances")
        if np.any(v <= 0.0):
            raise InvalidPseudoObservationError("pseudo-observation variances must be > 0")
        object.__setattr__(self, "q_values", q)
        object.__setattr__(self, "v_values", v)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.q_values.shape

    def block(self, axis: str, start: int, stop: int) -> "PseudoObservationField":
        return PseudoObservationField(
            take_block(self.q_values, axis, start, stop),
            take_block(self.v_values, axis, start, stop),
        )


@dataclass(frozen=True)
class DenoisedField:
    """Posterior means and variances (X̂ and Ξ_X, or Ĥ and Ξ_H)."""

    means: np.ndarray
    variances: np.ndarray

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.means.shape

    def block(self, axis: str, start: int, stop: int) -> "DenoisedField":
        return DenoisedField(
            take_block(self.means, axis, start, stop),
            take_block(self.variances, axis, start, stop),
        )


class EntryDenoiser(ABC):
    """
    Abstract base class for separable priors.

    Subclasses implement ``_posterior``; hyper-parameter learning and reset
    are optional hooks that default to no-ops.
    """

    kind: DenoiserKind

    def __init__(self, shape: Tuple[int, ...]):
        self.shape = tuple(int(d) for d in shape)

    def denoise(self, field: PseudoObservationField) -> DenoisedField:
        """
        Posterior mean and variance of every entry of ``field``.

        Args:
            field: Pseudo-observations with the denoiser's shape

        Returns:
            DenoisedField: Entry-wise posterior moments

        Raises:
            DimensionMismatchError: If the field shape differs from the prior shape
        """
        if field.shape != self.shape:
            raise DimensionMismatchError(f"{self.kind.value} field", self.shape, field.shape)
        means, variances = self._posterior(field.q_values, field.v_values)
        return DenoisedField(means, np.maximum(variances, 0.0))

    @abstractmethod
    def _posterior(self, q: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Element-wise posterior moments for validated arrays of the prior's shape."""
        pass

    def gaussian_prior(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """
        Conditionally Gaussian form of the prior, if it has one.

        Returns:
            Tuple of prior means and precisions (0 = flat, inf = pinned),
            or None for priors that are not Gaussian given their
            hyper-parameters
        """
        return None

    def learn(self, field: PseudoObservationField, denoised: DenoisedField) -> None:
        """Refresh hyper-parameters from the latest posterior (barrier step)."""
        return None

    def reset(self) -> None:
        """Restore the hyper-parameters the denoiser was constructed with."""
        return None

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.shape})"


def broadcast_parameter(name: str, value, shape: Tuple[int, ...]) -> np.ndarray:
    """Broadcast a scalar or array hyper-parameter to ``shape`` as a writable copy."""
    array = np.asarray(value, dtype=float)
    try:
        return np.array(np.broadcast_to(array, shape), dtype=float)
    except ValueError as e:
        raise DimensionMismatchError(name, shape, array.shape) from e


def denoise(denoiser: EntryDenoiser, field: PseudoObservationField) -> DenoisedField:
    """Functional form of ``EntryDenoiser.denoise``."""
    return denoiser.denoise(field)
