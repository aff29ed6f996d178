import math

import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, InvalidHyperParameterError, InvalidPseudoObservationError
from app.denoisers import (
    BernoulliGaussianNonNegDenoiser,
    Block,
    BlockCompositeDenoiser,
    DenoisedField,
    DenoiserFactory,
    DenoiserKind,
    GaussianDenoiser,
    GaussianGammaDenoiser,
    KnownEntriesDenoiser,
    LearnedVarianceGaussianDenoiser,
    NonNegativeGaussianDenoiser,
    PseudoObservationField,
    denoise_bernoulli_gaussian_nonneg,
    truncated_normal_moments,
    update_alpha,
    update_gamma,
)
from app.services.oracle_service import (
    bernoulli_nonneg_prior,
    check_denoisers,
    gaussian_prior,
    nonneg_gaussian_prior,
    quadrature_moments,
)

SAMPLE_POINTS = [(-10.0, 1e-3), (-3.0, 0.5), (0.0, 1.0), (0.7, 10.0), (4.0, 1e3), (10.0, 1e-2)]


def _field(points):
    q = np.array([p[0] for p in points])
    v = np.array([p[1] for p in points])
    return PseudoObservationField(q, v)


def test_gaussian_posterior_closed_form():
    field = _field(SAMPLE_POINTS)
    denoised = GaussianDenoiser(field.shape, mean=0.3, variance=2.0).denoise(field)
    q, v = field.q_values, field.v_values
    assert np.allclose(denoised.means, (2.0 * q + 0.3 * v) / (2.0 + v))
    assert np.allclose(denoised.variances, 2.0 * v / (2.0 + v))


def test_flat_and_pinned_gaussians():
    field = _field(SAMPLE_POINTS)
    flat = GaussianDenoiser.flat(field.shape).denoise(field)
    assert np.array_equal(flat.means, field.q_values)
    assert np.array_equal(flat.variances, field.v_values)

    pinned = GaussianDenoiser(field.shape, mean=2.5, variance=0.0).denoise(field)
    assert np.allclose(pinned.means, 2.5)
    assert np.all(pinned.variances == 0.0)


@pytest.mark.parametrize(
    "make, prior",
    [
        (lambda shape: GaussianDenoiser(shape, mean=0.3, variance=2.0), gaussian_prior(0.3, 2.0)),
        (lambda shape: GaussianGammaDenoiser(shape, gamma=4.0), gaussian_prior(0.0, 0.25)),
        (lambda shape: NonNegativeGaussianDenoiser(shape, theta=0.5, phi=1.5), nonneg_gaussian_prior(0.5, 1.5)),
        (
            lambda shape: BernoulliGaussianNonNegDenoiser(shape, delta=0.3, theta=0.2, phi=2.0),
            bernoulli_nonneg_prior(0.3, 0.2, 2.0),
        ),
    ],
)
def test_posterior_matches_quadrature(make, prior):
    field = _field(SAMPLE_POINTS)
    denoised = make(field.shape).denoise(field)
    for index, (q, v) in enumerate(SAMPLE_POINTS):
        mean, variance = quadrature_moments(prior, q, v)
        assert denoised.means[index] == pytest.approx(mean, rel=1e-6, abs=1e-6 * math.sqrt(variance))
        assert denoised.variances[index] == pytest.approx(variance, rel=1e-6)


@pytest.mark.slow
def test_full_quadrature_grid():
    checks = check_denoisers()
    assert all(check.passed for check in checks), [c.line() for c in checks if not c.passed]


def test_truncated_moments_at_zero_location():
    mean, var = truncated_normal_moments(np.array([0.0]), np.array([1.0]))
    assert mean[0] == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-12)
    assert var[0] == pytest.approx(1.0 - 2.0 / math.pi, rel=1e-12)


def test_truncated_moments_branches_agree_at_switch():
    mu = np.array([-6.0 + 1e-7, -6.0 - 1e-7])
    mean, var = truncated_normal_moments(mu, np.ones(2))
    assert mean[0] == pytest.approx(mean[1], rel=1e-6)
    assert var[0] == pytest.approx(var[1], rel=1e-5)


def test_truncated_moments_deep_tail_are_positive_and_finite():
    mean, var = truncated_normal_moments(np.array([-40.0, -1e3]), np.array([1.0, 1.0]))
    assert np.all(np.isfinite(mean)) and np.all(mean > 0.0)
    assert np.all(np.isfinite(var)) and np.all(var > 0.0)
    # mean ≈ 1/|μ| far in the tail
    assert mean[1] == pytest.approx(1e-3, rel=1e-5)


def test_bernoulli_gaussian_extreme_rates():
    field = _field(SAMPLE_POINTS)
    spike, responsibility = denoise_bernoulli_gaussian_nonneg(0.0, 0.0, 1.0, field)
    assert np.all(spike.means == 0.0) and np.all(spike.variances == 0.0)
    assert np.all(responsibility == 0.0)

    slab, responsibility = denoise_bernoulli_gaussian_nonneg(1.0, 0.0, 1.0, field)
    reference = NonNegativeGaussianDenoiser(field.shape).denoise(field)
    assert np.allclose(slab.means, reference.means, rtol=1e-12)
    assert np.allclose(slab.variances, reference.variances, rtol=1e-12)
    assert np.all(responsibility == 1.0)


def test_bernoulli_gaussian_rejects_invalid_rate():
    with pytest.raises(InvalidHyperParameterError):
        BernoulliGaussianNonNegDenoiser((2,), delta=1.0)
    with pytest.raises(InvalidHyperParameterError):
        denoise_bernoulli_gaussian_nonneg(1.5, 0.0, 1.0, _field(SAMPLE_POINTS))


def test_bernoulli_gaussian_learns_rate_and_resets():
    field = _field(SAMPLE_POINTS)
    denoiser = BernoulliGaussianNonNegDenoiser(field.shape, delta=0.5, learn_rate=True)
    denoised = denoiser.denoise(field)
    _, responsibility = denoise_bernoulli_gaussian_nonneg(0.5, 0.0, 1.0, field)
    denoiser.learn(field, denoised)
    assert denoiser.delta == pytest.approx(float(responsibility.mean()))
    denoiser.reset()
    assert denoiser.delta == 0.5


def test_update_gamma_elementwise_and_row_shared():
    denoised = DenoisedField(np.array([[1.0, 0.0], [2.0, 1.0]]), np.array([[1.0, 1.0], [0.0, 1.0]]))
    gamma = update_gamma(denoised, epsilon=0.5, eta=0.5, row_shared=False)
    assert np.allclose(gamma, 2.0 / (1.0 + np.array([[2.0, 1.0], [4.0, 2.0]])))

    shared = update_gamma(denoised, epsilon=0.0, eta=0.0, row_shared=True)
    assert np.allclose(shared, [[1.0 / 1.5, 1.0 / 1.5], [1.0 / 3.0, 1.0 / 3.0]])


def test_update_gamma_zero_energy_hits_ceiling(monkeypatch):
    monkeypatch.setenv("GAMMA_CEILING", "1e8")
    from app.core.config import get_settings

    get_settings.cache_clear()
    denoised = DenoisedField(np.zeros((1, 2)), np.zeros((1, 2)))
    gamma = update_gamma(denoised, epsilon=0.0, eta=0.0)
    assert np.all(gamma == 1e8)


def test_update_gamma_is_monotone_in_energy(rng):
    means = rng.standard_normal((4, 6))
    variances = rng.uniform(0.0, 2.0, size=(4, 6))
    base = update_gamma(DenoisedField(means, variances), epsilon=0.3, eta=0.1)
    for extra in (1e-6, 0.5, 10.0):
        grown = update_gamma(DenoisedField(means, variances + extra), epsilon=0.3, eta=0.1)
        assert np.all(grown <= base)
    scaled = update_gamma(DenoisedField(2.0 * means, variances), epsilon=0.3, eta=0.1)
    assert np.all(scaled <= base)


@pytest.mark.parametrize(
    "make",
    [
        lambda shape: GaussianDenoiser(shape, variance=2.0),
        lambda shape: GaussianGammaDenoiser(shape, gamma=4.0),
        lambda shape: LearnedVarianceGaussianDenoiser(shape, alpha=0.5),
    ],
)
def test_zero_mean_gaussians_are_odd_in_q(make):
    field = _field(SAMPLE_POINTS)
    mirrored = PseudoObservationField(-field.q_values, field.v_values)
    denoiser = make(field.shape)
    direct = denoiser.denoise(field)
    flipped = denoiser.denoise(mirrored)
    assert np.array_equal(flipped.means, -direct.means)
    assert np.array_equal(flipped.variances, direct.variances)


def test_known_entries_ignore_pseudo_observations_when_masked(rng):
    mask = np.array([[True, False, True]])
    denoiser = KnownEntriesDenoiser((1, 3), values=np.array([[1.0, 2.0, 3.0]]), mask=mask)
    first = denoiser.denoise(PseudoObservationField(rng.standard_normal((1, 3)), np.ones((1, 3))))
    second = denoiser.denoise(PseudoObservationField(rng.standard_normal((1, 3)), np.full((1, 3), 7.0)))
    assert np.array_equal(first.means[mask], second.means[mask])
    assert np.array_equal(first.variances[mask], [0.0, 0.0])


def test_gaussian_prior_hooks():
    mean, precision = GaussianDenoiser((1, 3), mean=0.5, variance=np.array([[0.25, 0.0, np.inf]])).gaussian_prior()
    assert np.array_equal(mean, np.full((1, 3), 0.5))
    assert np.array_equal(precision, [[4.0, np.inf, 0.0]])

    _, precision = GaussianGammaDenoiser((2, 2), gamma=3.0).gaussian_prior()
    assert np.all(precision == 3.0)

    mask = np.array([[True, False]])
    mean, precision = KnownEntriesDenoiser((1, 2), values=np.array([[2.0, 9.0]]), mask=mask).gaussian_prior()
    assert np.array_equal(mean, [[2.0, 0.0]])
    assert np.array_equal(precision, [[np.inf, 0.0]])

    assert NonNegativeGaussianDenoiser((2, 2)).gaussian_prior() is None
    assert BernoulliGaussianNonNegDenoiser((2, 2), delta=0.3).gaussian_prior() is None
    truncated_fallback = KnownEntriesDenoiser(
        (1, 2), values=1.0, mask=mask, fallback=NonNegativeGaussianDenoiser((1, 2))
    )
    assert truncated_fallback.gaussian_prior() is None


def test_composite_gaussian_prior_concatenates_or_declines():
    left = GaussianDenoiser((3, 1), mean=1.0, variance=0.5)
    right = GaussianGammaDenoiser((3, 2), gamma=2.0)
    composite = BlockCompositeDenoiser((3, 3), "columns", [Block(0, 1, left), Block(1, 3, right)])
    mean, precision = composite.gaussian_prior()
    assert np.array_equal(mean, [[1.0, 0.0, 0.0]] * 3)
    assert np.array_equal(precision, [[2.0, 2.0, 2.0]] * 3)

    mixed = BlockCompositeDenoiser(
        (3, 3), "columns", [Block(0, 1, left), Block(1, 3, NonNegativeGaussianDenoiser((3, 2)))]
    )
    assert mixed.gaussian_prior() is None


def test_gaussian_gamma_learns_precision():
    field = _field(SAMPLE_POINTS)
    denoiser = GaussianGammaDenoiser(field.shape, epsilon=0.0, eta=0.0, gamma=1.0)
    denoised = denoiser.denoise(field)
    denoiser.learn(field, denoised)
    assert np.allclose(denoiser.gamma, update_gamma(denoised, 0.0, 0.0))
    denoiser.reset()
    assert np.all(denoiser.gamma == 1.0)


def test_update_alpha_is_mean_second_moment():
    field = PseudoObservationField(np.array([[1.0, -2.0], [0.5, 3.0]]), np.full((2, 2), 0.5))
    alpha, denoised = update_alpha(field, 2.0)
    reference = GaussianDenoiser(field.shape, mean=0.0, variance=2.0).denoise(field)
    assert np.allclose(denoised.means, reference.means)
    assert alpha == pytest.approx(float(np.mean(reference.variances + reference.means**2)))


def test_learned_variance_gaussian_tracks_alpha():
    field = PseudoObservationField(np.array([[3.0, -3.0]]), np.array([[0.1, 0.1]]))
    denoiser = LearnedVarianceGaussianDenoiser(field.shape, alpha=1.0)
    expected_alpha, _ = update_alpha(field, 1.0)
    denoiser.learn(field, denoiser.denoise(field))
    assert denoiser.alpha == pytest.approx(expected_alpha)
    assert np.all(denoiser.variance == denoiser.alpha)
    denoiser.reset()
    assert denoiser.alpha == 1.0


def test_known_entries_with_partial_mask():
    field = PseudoObservationField(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((2, 2)))
    mask = np.array([[True, False], [False, True]])
    denoised = KnownEntriesDenoiser(field.shape, values=np.eye(2), mask=mask).denoise(field)
    assert np.array_equal(denoised.means, [[1.0, 2.0], [3.0, 1.0]])
    assert np.array_equal(denoised.variances, [[0.0, 1.0], [1.0, 0.0]])


def test_known_entries_rejects_non_boolean_mask():
    with pytest.raises(InvalidHyperParameterError):
        KnownEntriesDenoiser((2, 2), values=0.0, mask=np.ones((2, 2)))


def test_composite_concatenates_blocks(rng):
    q = rng.standard_normal((3, 5))
    field = PseudoObservationField(q, np.full(q.shape, 0.2))
    left = GaussianDenoiser((3, 2), variance=1.0)
    right = NonNegativeGaussianDenoiser((3, 3))
    composite = BlockCompositeDenoiser(q.shape, "columns", [Block(0, 2, left), Block(2, 5, right)])
    denoised = composite.denoise(field)
    assert np.array_equal(denoised.means[:, :2], left.denoise(field.block("columns", 0, 2)).means)
    assert np.array_equal(denoised.means[:, 2:], right.denoise(field.block("columns", 2, 5)).means)


@pytest.mark.parametrize(
    "blocks",
    [
        [Block(0, 1, GaussianDenoiser((1, 2))), Block(2, 3, GaussianDenoiser((1, 2)))],
        [Block(0, 2, GaussianDenoiser((2, 2))), Block(1, 3, GaussianDenoiser((2, 2)))],
        [Block(0, 2, GaussianDenoiser((2, 2)))],
    ],
)
def test_composite_rejects_bad_partitions(blocks):
    with pytest.raises(InvalidHyperParameterError):
        BlockCompositeDenoiser((3, 2), "rows", blocks)


def test_composite_rejects_mis_shaped_block():
    with pytest.raises(DimensionMismatchError):
        BlockCompositeDenoiser((3, 2), "rows", [Block(0, 3, GaussianDenoiser((3, 3)))])


def test_field_validation():
    with pytest.raises(InvalidPseudoObservationError):
        PseudoObservationField(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(InvalidPseudoObservationError):
        PseudoObservationField(np.array([np.nan, 0.0]), np.ones(2))
    with pytest.raises(DimensionMismatchError):
        GaussianDenoiser((3,)).denoise(PseudoObservationField(np.zeros(2), np.ones(2)))


def test_field_broadcasts_scalar_variance():
    field = PseudoObservationField(np.zeros((2, 3)), 0.5)
    assert field.v_values.shape == (2, 3)


def test_factory_creates_registered_kinds():
    denoiser = DenoiserFactory.create(DenoiserKind.GAUSSIAN_GAMMA, (2, 3), epsilon=0.1, eta=0.2)
    assert isinstance(denoiser, GaussianGammaDenoiser)
    assert denoiser.shape == (2, 3)
    assert "non_negative_gaussian" in DenoiserFactory.kinds()


def test_factory_rejects_unknown_kind():
    with pytest.raises(InvalidHyperParameterError):
        DenoiserFactory.create("laplace", (2, 2))
