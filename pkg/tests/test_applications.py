import numpy as np
import pytest
from pydantic import ValidationError

from app.applications.builders import build_problem, build_rpca
from app.applications.metrics import rpca_low_rank, rpca_outliers
from app.applications.specs import CsmuSpec, DlSpec, NmfSpec, RpcaSpec, SparseMfSpec, SparseNmfSpec
from app.core.config import Settings
from app.core.exceptions import ProblemBuildError
from app.datagen.generators import GenSpec
from app.datagen.instances import generate_instance
from app.denoisers import (
    BernoulliGaussianNonNegDenoiser,
    BlockCompositeDenoiser,
    GaussianDenoiser,
    GaussianGammaDenoiser,
    KnownEntriesDenoiser,
    LearnedVarianceGaussianDenoiser,
    NonNegativeGaussianDenoiser,
    PseudoObservationField,
)
from app.solvers.engine import solve
from app.solvers.problem import SolverOptions
from app.utils.general_utils import frobenius_sq


def test_rpca_block_structure(rng):
    Y = rng.standard_normal((4, 4))
    problem = build_rpca(RpcaSpec(m=4, l=4, rank=2), Y)

    assert problem.n_inner == 6
    assert problem.h_prior.shape == (4, 6) and problem.x_prior.shape == (6, 4)
    assert isinstance(problem.h_prior, BlockCompositeDenoiser)
    left, right = problem.h_prior.blocks
    assert isinstance(left.denoiser, GaussianDenoiser)
    assert isinstance(right.denoiser, KnownEntriesDenoiser)
    upper, lower = problem.x_prior.blocks
    assert isinstance(upper.denoiser, LearnedVarianceGaussianDenoiser)
    assert isinstance(lower.denoiser, GaussianGammaDenoiser)

    field = PseudoObservationField(rng.standard_normal((4, 6)), np.ones((4, 6)))
    denoised = problem.h_prior.denoise(field)
    assert np.array_equal(denoised.means[:, 2:], np.eye(4))
    assert np.all(denoised.variances[:, 2:] == 0.0)


def test_rpca_without_outlier_block(rng):
    problem = build_rpca(RpcaSpec(m=5, l=3, rank=2), rng.standard_normal((5, 3)), include_outliers=False)
    assert problem.n_inner == 2
    assert isinstance(problem.x_prior, LearnedVarianceGaussianDenoiser)


def test_csmu_uses_known_mean_and_perturbation_variance(rng):
    h_bar = rng.standard_normal((4, 3))
    spec = CsmuSpec(m=4, n=3, l=5, nu=0.01, h_bar=h_bar, common_support=True)
    problem = build_problem(spec, rng.standard_normal((4, 5)))
    assert np.array_equal(problem.h_prior.mean, h_bar)
    assert np.all(problem.h_prior.variance == 0.01)
    assert problem.x_prior.row_shared


def test_csmu_requires_known_matrix(rng):
    with pytest.raises(ProblemBuildError):
        build_problem(CsmuSpec(m=4, n=3, l=5), rng.standard_normal((4, 5)))
    with pytest.raises(ProblemBuildError):
        build_problem(CsmuSpec(m=4, n=3, l=5, h_bar=np.ones((3, 3))), rng.standard_normal((4, 5)))


@pytest.mark.parametrize(
    "spec, h_type, x_type",
    [
        (DlSpec(m=4, n=3, l=5), GaussianDenoiser, GaussianGammaDenoiser),
        (NmfSpec(m=4, n=3, l=5), NonNegativeGaussianDenoiser, NonNegativeGaussianDenoiser),
        (SparseMfSpec(m=4, n=3, l=5), GaussianGammaDenoiser, GaussianGammaDenoiser),
        (SparseNmfSpec(m=4, n=3, l=5), BernoulliGaussianNonNegDenoiser, BernoulliGaussianNonNegDenoiser),
    ],
)
def test_builders_assign_priors(rng, spec, h_type, x_type):
    problem = build_problem(spec, rng.standard_normal((4, 5)))
    assert type(problem.h_prior) is h_type
    assert type(problem.x_prior) is x_type
    assert problem.dims == (4, 3, 5)
    assert problem.name == spec.application


def test_sparse_nmf_clips_degenerate_rate(rng):
    problem = build_problem(SparseNmfSpec(m=4, n=3, l=5, sparsity=1.0), rng.random((4, 5)))
    assert 0.0 < problem.x_prior.delta < 1.0


def test_observation_shape_is_checked(rng):
    with pytest.raises(ProblemBuildError):
        build_problem(DlSpec(m=4, n=3, l=5), rng.standard_normal((5, 4)))


def test_inner_dimension_budget(rng, monkeypatch):
    monkeypatch.setattr("app.applications.builders.get_settings", lambda: Settings(MAX_INNER_DIMENSION=5))
    with pytest.raises(ProblemBuildError):
        build_rpca(RpcaSpec(m=4, l=4, rank=2), rng.standard_normal((4, 4)))


def test_spec_validation():
    with pytest.raises(ValidationError):
        DlSpec(m=4, n=3, l=5, per_column_sparsity=4)
    with pytest.raises(ValidationError):
        RpcaSpec(m=0, l=4, rank=1)
    assert DlSpec(m=4, n=10, l=5).sparsity_count == 2


def test_builders_are_pure(rng):
    Y = rng.standard_normal((4, 5))
    spec = SparseMfSpec(m=4, n=3, l=5)
    first, second = build_problem(spec, Y), build_problem(spec, Y)
    assert np.array_equal(first.Y, second.Y)
    assert np.array_equal(first.x_prior.gamma, second.x_prior.gamma)
    assert first.x_prior is not second.x_prior


def _outlier_free_rpca(seed):
    gen = GenSpec(seed=seed, m=30, n=3, l=30, sparsity=0.0, snr_db=np.inf)
    instance = generate_instance("rpca", gen)
    spec = RpcaSpec(m=30, l=30, rank=3)
    options = SolverOptions(seed=seed)
    full = solve(build_rpca(spec, instance.Y, options))
    pure = solve(build_rpca(spec, instance.Y, options, include_outliers=False))
    return instance.Z, full, pure


@pytest.mark.xfail(
    reason="noiseless fits tie at the residual floor and the ones-start attempt can keep part of Z in the outlier block",
    strict=False,
)
def test_rpca_without_outliers_leaves_outlier_block_empty():
    empty = 0
    for seed in range(10):
        Z, full, _ = _outlier_free_rpca(seed)
        empty += frobenius_sq(rpca_outliers(full.X_hat, 3)) <= 1e-6 * frobenius_sq(Z)
    assert empty >= 8


@pytest.mark.xfail(
    reason="same residual tie as the outlier-block check",
    strict=False,
)
def test_rpca_without_outliers_matches_low_rank_build():
    matched = 0
    for seed in range(10):
        Z, full, pure = _outlier_free_rpca(seed)
        full_error = frobenius_sq(Z - rpca_low_rank(full.H_hat, full.X_hat, 3)) / frobenius_sq(Z)
        pure_error = frobenius_sq(Z - pure.H_hat @ pure.X_hat) / frobenius_sq(Z)
        matched += abs(full_error - pure_error) <= 1e-4
    assert matched >= 8
