from app.denoisers.base import (
    DenoisedField,
    DenoiserKind,
    EntryDenoiser,
    PseudoObservationField,
    denoise,
)
from app.denoisers.composite import Block, BlockCompositeDenoiser
from app.denoisers.factory import DenoiserFactory
from app.denoisers.gaussian import (
    GaussianDenoiser,
    GaussianGammaDenoiser,
    KnownEntriesDenoiser,
    LearnedVarianceGaussianDenoiser,
    update_alpha,
    update_gamma,
)
from app.denoisers.truncated import (
    BernoulliGaussianNonNegDenoiser,
    NonNegativeGaussianDenoiser,
    denoise_bernoulli_gaussian_nonneg,
    truncated_normal_moments,
)

__all__ = [
    "Block",
    "BlockCompositeDenoiser",
    "BernoulliGaussianNonNegDenoiser",
    "DenoisedField",
    "DenoiserFactory",
    "DenoiserKind",
    "EntryDenoiser",
    "GaussianDenoiser",
    "GaussianGammaDenoiser",
    "KnownEntriesDenoiser",
    "LearnedVarianceGaussianDenoiser",
    "NonNegativeGaussianDenoiser",
    "PseudoObservationField",
    "denoise",
    "denoise_bernoulli_gaussian_nonneg",
    "truncated_normal_moments",
    "update_alpha",
    "update_gamma",
]
