"""
Denoiser factory.

Maps a ``DenoiserKind`` (or its string value) to the implementing class so
application builders and configuration files can name priors declaratively.
"""

from typing import Dict, Tuple, Type, Union

from app.core.exceptions import InvalidHyperParameterError
from app.core.logging_config import get_logger
from app.denoisers.base import DenoiserKind, EntryDenoiser
from app.denoisers.composite import BlockCompositeDenoiser
from app.denoisers.gaussian import (
    GaussianDenoiser,
    GaussianGammaDenoiser,
    KnownEntriesDenoiser,
    LearnedVarianceGaussianDenoiser,
)
from app.denoisers.truncated import (
    BernoulliGaussianNonNegDenoiser,
    NonNegativeGaussianDenoiser,
)

logger = get_logger(__name__)


class DenoiserFactory:
    """
    Factory class for creating denoiser instances.

    New prior families can be plugged in with ``register_kind``.
    """

    _registry: Dict[str, Type[EntryDenoiser]] = {
        DenoiserKind.GAUSSIAN.value: GaussianDenoiser,
        DenoiserKind.LEARNED_GAUSSIAN.value: LearnedVarianceGaussianDenoiser,
        DenoiserKind.GAUSSIAN_GAMMA.value: GaussianGammaDenoiser,
        DenoiserKind.NON_NEGATIVE_GAUSSIAN.value: NonNegativeGaussianDenoiser,
        DenoiserKind.KNOWN_ENTRIES.value: KnownEntriesDenoiser,
        DenoiserKind.BERNOULLI_GAUSSIAN_NON_NEGATIVE.value: BernoulliGaussianNonNegDenoiser,
        DenoiserKind.BLOCK_COMPOSITE.value: BlockCompositeDenoiser,
    }

    @classmethod
    def register_kind(cls, kind: str, denoiser_class: Type[EntryDenoiser]) -> None:
        """
        Register a new prior family with the factory.

        Args:
            kind: String identifier for the prior
            denoiser_class: The denoiser implementation class
        """
        cls._registry[str(getattr(kind, "value", kind))] = denoiser_class
        logger.info(f"Registered denoiser kind '{kind}' with factory")

    @classmethod
    def create(
        cls, kind: Union[str, DenoiserKind], shape: Tuple[int, ...], **params
    ) -> EntryDenoiser:
        """
        Instantiate the denoiser registered under ``kind``.

        Args:
            kind: Registered prior family
            shape: Shape of the matrix the prior is placed on
            **params: Hyper-parameters forwarded to the constructor

        Returns:
            EntryDenoiser: The configured denoiser

        Raises:
            InvalidHyperParameterError: If the kind is unknown
        """
        key = str(getattr(kind, "value", kind))
        denoiser_class = cls._registry.get(key)
        if denoiser_class is None:
            raise InvalidHyperParameterError(
                "kind", f"unknown denoiser kind '{key}', expected one of {sorted(cls._registry)}"
            )
        return denoiser_class(shape, **params)

    @classmethod
    def kinds(cls) -> Tuple[str, ...]:
        return tuple(sorted(cls._registry))
