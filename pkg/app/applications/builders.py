"""
Problem builders: encode each application as a FactorizationProblem.

Builders are pure functions of (spec, Y); they only choose priors and block
structure, the engine does the rest.
"""

from typing import Callable, Dict, Optional

import numpy as np

from app.applications.specs import (
    CsmuSpec,
    DlSpec,
    NmfSpec,
    RpcaSpec,
    SparseMfSpec,
    SparseNmfSpec,
)
from app.core.config import get_settings
from app.core.exceptions import ProblemBuildError
from app.core.logging_config import get_logger
from app.denoisers.base import DenoiserKind
from app.denoisers.composite import Block, BlockCompositeDenoiser
from app.denoisers.factory import DenoiserFactory
from app.solvers.problem import FactorizationProblem, SolverOptions

logger = get_logger(__name__)


def _check_observation(application: str, spec, Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (spec.m, spec.l):
        raise ProblemBuildError(application, f"Y has shape {Y.shape}, spec expects {(spec.m, spec.l)}")
    if not np.all(np.isfinite(Y)):
        raise ProblemBuildError(application, "Y contains non-finite entries")
    return Y


def _check_inner(application: str, n_inner: int) -> None:
    limit = get_settings().MAX_INNER_DIMENSION
    if n_inner > limit:
        raise ProblemBuildError(application, f"inner dimension {n_inner} exceeds MAX_INNER_DIMENSION={limit}")


def build_rpca(
    spec: RpcaSpec,
    Y: np.ndarray,
    options: Optional[SolverOptions] = None,
    include_outliers: bool = True,
) -> FactorizationProblem:
    """
    RPCA as Y = [A, I]·[B; E] + W.

    H columns 0..N-1 get N(0, 1), columns N..N+M-1 are pinned to I_M. X rows
    0..N-1 get a zero-mean Gaussian with learned variance α, rows N..N+M-1 a
    Gaussian-Gamma prior. With ``include_outliers=False`` the problem is the
    plain rank-N factorization with the same low-rank priors.
    """
    Y = _check_observation("rpca", spec, Y)
    m, l, n = spec.m, spec.l, spec.rank
    low_rank_h = DenoiserFactory.create(DenoiserKind.GAUSSIAN, (m, n), mean=0.0, variance=1.0)
    low_rank_x = DenoiserFactory.create(DenoiserKind.LEARNED_GAUSSIAN, (n, l), alpha=spec.alpha_init)

    if not include_outliers:
        _check_inner("rpca", n)
        return FactorizationProblem(Y, n, low_rank_h, low_rank_x, options or SolverOptions(), name="rpca")

    n_inner = n + m
    _check_inner("rpca", n_inner)
    h_prior = BlockCompositeDenoiser(
        (m, n_inner),
        "columns",
        [
            Block(0, n, low_rank_h),
            Block(n, n_inner, DenoiserFactory.create(DenoiserKind.KNOWN_ENTRIES, (m, m), values=np.eye(m))),
        ],
    )
    x_prior = BlockCompositeDenoiser(
        (n_inner, l),
        "rows",
        [
            Block(0, n, low_rank_x),
            Block(
                n,
                n_inner,
                DenoiserFactory.create(DenoiserKind.GAUSSIAN_GAMMA, (m, l), epsilon=spec.epsilon, eta=spec.eta),
            ),
        ],
    )
    return FactorizationProblem(Y, n_inner, h_prior, x_prior, options or SolverOptions(), name="rpca")


def build_dl(spec: DlSpec, Y: np.ndarray, options: Optional[SolverOptions] = None) -> FactorizationProblem:
    """Gaussian dictionary, Gaussian-Gamma code."""
    Y = _check_observation("dl", spec, Y)
    _check_inner("dl", spec.n)
    h_prior = DenoiserFactory.create(DenoiserKind.GAUSSIAN, (spec.m, spec.n), mean=0.0, variance=1.0)
    x_prior = DenoiserFactory.create(
        DenoiserKind.GAUSSIAN_GAMMA, (spec.n, spec.l), epsilon=spec.epsilon, eta=spec.eta
    )
    return FactorizationProblem(Y, spec.n, h_prior, x_prior, options or SolverOptions(), name="dl")


def build_csmu(spec: CsmuSpec, Y: np.ndarray, options: Optional[SolverOptions] = None) -> FactorizationProblem:
    """
    N(H̄, ν) on every entry of H, Gaussian-Gamma on X.

    ``common_support`` shares one precision per row of X.
    """
    Y = _check_observation("csmu", spec, Y)
    if spec.h_bar is None:
        raise ProblemBuildError("csmu", "the known matrix H̄ is required")
    h_bar = np.asarray(spec.h_bar, dtype=float)
    if h_bar.shape != (spec.m, spec.n):
        raise ProblemBuildError("csmu", f"H̄ has shape {h_bar.shape}, expected {(spec.m, spec.n)}")
    _check_inner("csmu", spec.n)
    h_prior = DenoiserFactory.create(DenoiserKind.GAUSSIAN, (spec.m, spec.n), mean=h_bar, variance=spec.nu)
    x_prior = DenoiserFactory.create(
        DenoiserKind.GAUSSIAN_GAMMA,
        (spec.n, spec.l),
        epsilon=spec.epsilon,
        eta=spec.eta,
        row_shared=spec.common_support,
    )
    return FactorizationProblem(Y, spec.n, h_prior, x_prior, options or SolverOptions(), name="csmu")


def build_nmf(spec: NmfSpec, Y: np.ndarray, options: Optional[SolverOptions] = None) -> FactorizationProblem:
    """N+(θ, φ) on both factors."""
    Y = _check_observation("nmf", spec, Y)
    _check_inner("nmf", spec.n)
    h_prior = DenoiserFactory.create(
        DenoiserKind.NON_NEGATIVE_GAUSSIAN, (spec.m, spec.n), theta=spec.theta, phi=spec.phi
    )
    x_prior = DenoiserFactory.create(
        DenoiserKind.NON_NEGATIVE_GAUSSIAN, (spec.n, spec.l), theta=spec.theta, phi=spec.phi
    )
    return FactorizationProblem(Y, spec.n, h_prior, x_prior, options or SolverOptions(), name="nmf")


def build_sparse_mf(
    spec: SparseMfSpec, Y: np.ndarray, options: Optional[SolverOptions] = None
) -> FactorizationProblem:
    """Gaussian-Gamma on both factors."""
    Y = _check_observation("sparse_mf", spec, Y)
    _check_inner("sparse_mf", spec.n)
    h_prior = DenoiserFactory.create(
        DenoiserKind.GAUSSIAN_GAMMA, (spec.m, spec.n), epsilon=spec.epsilon, eta=spec.eta
    )
    x_prior = DenoiserFactory.create(
        DenoiserKind.GAUSSIAN_GAMMA, (spec.n, spec.l), epsilon=spec.epsilon, eta=spec.eta
    )
    return FactorizationProblem(Y, spec.n, h_prior, x_prior, options or SolverOptions(), name="sparse_mf")


def build_sparse_nmf(
    spec: SparseNmfSpec, Y: np.ndarray, options: Optional[SolverOptions] = None
) -> FactorizationProblem:
    """
    Non-negative Bernoulli-Gaussian on both factors.

    The configured sparsity is clipped into the open unit interval.
    """
    Y = _check_observation("sparse_nmf", spec, Y)
    _check_inner("sparse_nmf", spec.n)
    clip = get_settings().SPARSITY_RATE_CLIP
    delta = float(np.clip(spec.sparsity, clip, 1.0 - clip))
    params = dict(delta=delta, theta=spec.theta, phi=spec.phi, learn_rate=spec.learn_sparsity)
    h_prior = DenoiserFactory.create(DenoiserKind.BERNOULLI_GAUSSIAN_NON_NEGATIVE, (spec.m, spec.n), **params)
    x_prior = DenoiserFactory.create(DenoiserKind.BERNOULLI_GAUSSIAN_NON_NEGATIVE, (spec.n, spec.l), **params)
    return FactorizationProblem(Y, spec.n, h_prior, x_prior, options or SolverOptions(), name="sparse_nmf")


BUILDERS: Dict[str, Callable[..., FactorizationProblem]] = {
    "rpca": build_rpca,
    "dl": build_dl,
    "csmu": build_csmu,
    "nmf": build_nmf,
    "sparse_mf": build_sparse_mf,
    "sparse_nmf": build_sparse_nmf,
}


def build_problem(spec, Y: np.ndarray, options: Optional[SolverOptions] = None) -> FactorizationProblem:
    """Dispatch on ``spec.application``."""
    builder = BUILDERS.get(spec.application)
    if builder is None:
        raise ProblemBuildError(spec.application, "no builder registered")
    logger.debug(f"Building {spec.application} problem", extra={"m": spec.m, "l": spec.l})
    return builder(spec, Y, options)
