"""
Problem, options and result types of the matrix-factorization engine.

A problem is Y = HX + W with Y of size M×L, H of size M×N and X of size N×L,
entry-wise priors on H and X and i.i.d. Gaussian noise of unknown precision.
"""

from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.config import get_settings
from app.core.exceptions import DimensionMismatchError, InvalidHyperParameterError
from app.denoisers.base import EntryDenoiser


def _setting(name: str):
    return lambda: getattr(get_settings(), name)


class SolverOptions(BaseModel):
    """
    Iteration control of ``solve``.

    Attributes:
        tol: Convergence threshold on the relative change of X̂ and Ĥ
        max_iters: Iteration cap per attempt
        restarts: Additional attempts from a seeded Gaussian Ĥ
        seed: Seed of the restart perturbations
        h_init: Initial Ĥ of the first attempt ("ones" or "random")
        noise_precision: Known λ; when set, the λ̂ update is skipped
    """

    model_config = ConfigDict(frozen=True)

    tol: float = Field(default_factory=_setting("SOLVER_TOL"), gt=0.0)
    max_iters: int = Field(default_factory=_setting("SOLVER_MAX_ITERS"), ge=1)
    restarts: int = Field(default_factory=_setting("SOLVER_RESTARTS"), ge=0)
    seed: int = 0
    h_init: Literal["ones", "random"] = "ones"
    noise_precision: Optional[float] = Field(default=None, gt=0.0)


@dataclass(frozen=True)
class MatrixNormalBelief:
    """
    MN(mean, diag(row_cov), diag(col_cov)); vectorizes to N(vec(mean), V ⊗ U).

    q(X) carries row_cov = U_X and col_cov = 1; q(H) carries row_cov = 1 and
    col_cov = V_H.
    """

    mean: np.ndarray
    row_cov: np.ndarray
    col_cov: np.ndarray

    def __post_init__(self):
        rows, cols = np.shape(self.mean)
        if np.shape(self.row_cov) != (rows,):
            raise DimensionMismatchError("belief row covariance", (rows,), np.shape(self.row_cov))
        if np.shape(self.col_cov) != (cols,):
            raise DimensionMismatchError("belief column covariance", (cols,), np.shape(self.col_cov))


@dataclass
class FactorizationProblem:
    """Observation Y, inner dimension N and the priors placed on H and X."""

    Y: np.ndarray
    n_inner: int
    h_prior: EntryDenoiser
    x_prior: EntryDenoiser
    options: SolverOptions = field(default_factory=SolverOptions)
    name: str = "factorization"

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim != 2:
            raise DimensionMismatchError("observation Y", "(M, L)", self.Y.shape)
        if self.n_inner < 1:
            raise InvalidHyperParameterError("n_inner", f"must be >= 1, got {self.n_inner}")
        m, l = self.Y.shape
        if self.h_prior.shape != (m, self.n_inner):
            raise DimensionMismatchError("H prior", (m, self.n_inner), self.h_prior.shape)
        if self.x_prior.shape != (self.n_inner, l):
            raise DimensionMismatchError("X prior", (self.n_inner, l), self.x_prior.shape)

    @property
    def dims(self) -> Tuple[int, int, int]:
        m, l = self.Y.shape
        return m, self.n_inner, l


@dataclass(frozen=True)
class IterationRecord:
    """Diagnostics of one engine iteration."""

    iteration: int
    lambda_hat: float
    residual: float
    delta: float


@dataclass(frozen=True)
class SolveResult:
    """
    Final beliefs of the best attempt.

    ``residual`` is ‖Y − ĤX̂‖²_F; ``trace`` holds the iterations of the
    returned attempt only.
    """

    H_hat: np.ndarray
    X_hat: np.ndarray
    Xi_H: np.ndarray
    Xi_X: np.ndarray
    U_X: np.ndarray
    V_H: np.ndarray
    lambda_hat: float
    residual: float
    iterations: int
    converged: bool
    attempt: int
    trace: List[IterationRecord]
