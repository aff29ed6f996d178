import numpy as np
import pytest

from app.applications.metrics import nmse_x
from app.core.exceptions import DimensionMismatchError, DivergenceError
from app.datagen.generators import GenSpec
from app.datagen.instances import generate_instance
from app.denoisers import GaussianDenoiser, GaussianGammaDenoiser
from app.solvers.uamp import UampState, relative_change, solve_uamp, uamp_iterate, unitary_transform


def test_unitary_transform_preserves_the_model(rng):
    A = rng.standard_normal((5, 3))
    x = rng.standard_normal(3)
    y = A @ x + 0.1 * rng.standard_normal(5)
    r, phi, lambda_vec = unitary_transform(y, A)

    assert r.shape == (5,) and phi.shape == (5, 3) and lambda_vec.shape == (5,)
    assert np.linalg.norm(r) == pytest.approx(np.linalg.norm(y))
    assert np.allclose(phi.T @ phi, A.T @ A)
    # residuals are rotated, not changed
    assert np.linalg.norm(r - phi @ x) == pytest.approx(np.linalg.norm(y - A @ x))
    assert np.all(np.diff(lambda_vec[:3]) <= 0.0)
    assert np.all(lambda_vec[3:] == 0.0)
    assert np.allclose(lambda_vec, np.sum(phi**2, axis=1))


def test_unitary_transform_rejects_mismatched_observation(rng):
    with pytest.raises(DimensionMismatchError):
        unitary_transform(np.zeros(4), rng.standard_normal((5, 3)))


def test_relative_change_edge_cases():
    assert relative_change(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_change(np.ones(3), np.zeros(3)) == np.inf
    assert relative_change(np.array([3.0, 4.0]), np.array([0.0, 4.0])) == pytest.approx(3.0 / 4.0)


def test_gaussian_prior_reaches_posterior_mean(rng):
    m, n, beta = 30, 20, 50.0
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    x = rng.standard_normal(n)
    y = A @ x + rng.standard_normal(m) / np.sqrt(beta)

    result = solve_uamp(y, A, beta, GaussianDenoiser((n,), variance=1.0), tol=1e-12, max_iters=500)
    posterior_mean = np.linalg.solve(beta * A.T @ A + np.eye(n), beta * A.T @ y)
    assert result.converged
    assert np.allclose(result.x_est, posterior_mean, atol=1e-6)


def test_variants_agree_with_uniform_singular_values(rng):
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    A = 2.0 * q
    y = rng.standard_normal(8)

    first = solve_uamp(y, A, 4.0, GaussianDenoiser((8,), variance=1.0), variant="v1", tol=1e-12)
    second = solve_uamp(y, A, 4.0, GaussianDenoiser((8,), variance=1.0), variant="v2", tol=1e-12)
    assert np.allclose(first.x_est, second.x_est, atol=1e-10)


def test_v2_keeps_scalar_variance(rng):
    A = rng.standard_normal((6, 4))
    r, phi, lambda_vec = unitary_transform(rng.standard_normal(6), A)
    state = UampState.initial(phi, lambda_vec, variant="v2")
    nxt = uamp_iterate(state, r, phi, 10.0, GaussianDenoiser((4,)))
    assert np.ndim(nxt.tau_x) == 0
    assert nxt.iteration == 1


def test_noiseless_precision_is_accepted(rng):
    A = rng.standard_normal((6, 4))
    y = A @ rng.standard_normal(4)
    result = solve_uamp(y, A, np.inf, GaussianDenoiser((4,), variance=1.0), max_iters=50)
    assert np.all(np.isfinite(result.x_est))


def test_zero_operator_diverges():
    A = np.zeros((3, 2))
    with pytest.raises(DivergenceError):
        solve_uamp(np.zeros(3), A, 1.0, GaussianDenoiser((2,)))


@pytest.mark.slow
def test_sparse_recovery_with_learned_precisions():
    spec = GenSpec(seed=3, m=32, n=64, per_column_sparsity=4, snr_db=50.0)
    instance = generate_instance("uamp", spec)
    result = solve_uamp(
        instance.Y,
        instance.H,
        instance.noise_precision,
        GaussianGammaDenoiser((64,), epsilon=0.0, eta=0.0),
        max_iters=100,
    )
    assert nmse_x(instance.X, result.x_est) <= -35.0
