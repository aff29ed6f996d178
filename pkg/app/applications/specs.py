"""
Application specifications.

One pydantic model per application, discriminated by ``application`` so an
experiment configuration can carry any of them in a single field.
"""

from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import get_settings


class _Spec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    m: int = Field(ge=1)
    l: int = Field(ge=1)


class _GammaSpec(_Spec):
    epsilon: float = Field(default_factory=lambda: get_settings().GAMMA_EPSILON, ge=0.0)
    eta: float = Field(default_factory=lambda: get_settings().GAMMA_ETA, ge=0.0)


class RpcaSpec(_GammaSpec):
    """Y = AB + E + W with rank-N AB and sparse outliers E."""

    application: Literal["rpca"] = "rpca"
    rank: int = Field(ge=1)
    outlier_rate: float = Field(default=0.1, ge=0.0, le=1.0)
    alpha_init: float = Field(default_factory=lambda: get_settings().ALPHA_INIT, gt=0.0)


class DlSpec(_GammaSpec):
    """Dictionary learning Y = HX + W with a sparse code X."""

    application: Literal["dl"] = "dl"
    n: int = Field(ge=1)
    per_column_sparsity: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_sparsity(self) -> "DlSpec":
        if self.per_column_sparsity is not None and self.per_column_sparsity > self.n:
            raise ValueError(f"per_column_sparsity {self.per_column_sparsity} exceeds n={self.n}")
        return self

    @property
    def sparsity_count(self) -> int:
        if self.per_column_sparsity is not None:
            return self.per_column_sparsity
        return int(round(get_settings().DL_SPARSITY_FRACTION * self.n))


class CsmuSpec(_GammaSpec):
    """Compressive sensing with H = H̄ + H', H' ~ N(0, ν)."""

    application: Literal["csmu"] = "csmu"
    n: int = Field(ge=1)
    nu: float = Field(default=0.01, ge=0.0)
    common_support: bool = False
    h_bar: Optional[np.ndarray] = None


class NmfSpec(_Spec):
    """Non-negative factorization with N+(θ, φ) priors on both factors."""

    application: Literal["nmf"] = "nmf"
    n: int = Field(ge=1)
    theta: float = 0.0
    phi: float = Field(default=1.0, gt=0.0)


class SparseMfSpec(_GammaSpec):
    """Sparse H and sparse X, both with Gaussian-Gamma priors."""

    application: Literal["sparse_mf"] = "sparse_mf"
    n: int = Field(ge=1)
    sparsity: float = Field(default=0.2, ge=0.0, le=1.0)


class SparseNmfSpec(_Spec):
    """Sparse non-negative factors with Bernoulli-N+ priors."""

    application: Literal["sparse_nmf"] = "sparse_nmf"
    n: int = Field(ge=1)
    sparsity: float = Field(default=0.2, ge=0.0, le=1.0)
    theta: float = 0.0
    phi: float = Field(default=1.0, gt=0.0)
    learn_sparsity: bool = False


ApplicationSpec = Annotated[
    Union[RpcaSpec, DlSpec, CsmuSpec, NmfSpec, SparseMfSpec, SparseNmfSpec],
    Field(discriminator="application"),
]

APPLICATIONS = ("rpca", "dl", "csmu", "nmf", "sparse_mf", "sparse_nmf", "uamp")
