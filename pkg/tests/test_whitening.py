import numpy as np
import pytest

from app.core.exceptions import DegenerateModelError, DimensionMismatchError
from app.services.oracle_service import check_propositions, kronecker_h_message, kronecker_x_message
from app.solvers.problem import MatrixNormalBelief
from app.solvers.whitening import build_whitened_h_model, build_whitened_x_model


def _x_belief(rng, m, n):
    return MatrixNormalBelief(rng.standard_normal((m, n)), np.ones(m), rng.uniform(0.1, 2.0, size=n))


def _h_belief(rng, n, l):
    return MatrixNormalBelief(rng.standard_normal((n, l)), rng.uniform(0.1, 2.0, size=n), np.ones(l))


def test_x_model_reproduces_message(rng):
    q_H = _x_belief(rng, 4, 3)
    Y = rng.standard_normal((4, 5))
    model = build_whitened_x_model(q_H, Y)

    W = q_H.mean.T @ q_H.mean + 4 * np.diag(q_H.col_cov)
    assert np.allclose(model.Phi.T @ model.Phi, W, rtol=1e-10, atol=1e-12)
    assert np.allclose(np.linalg.inv(model.Phi.T @ model.Phi), np.linalg.inv(W), rtol=1e-9)
    assert np.allclose(model.Phi.T @ model.R, q_H.mean.T @ Y, rtol=1e-10, atol=1e-12)
    assert model.R.shape == (3, 5)


def test_h_model_reproduces_message(rng):
    q_X = _h_belief(rng, 3, 6)
    Y = rng.standard_normal((4, 6))
    model = build_whitened_h_model(q_X, Y)

    W = q_X.mean @ q_X.mean.T + 6 * np.diag(q_X.row_cov)
    assert np.allclose(model.Phi.T @ model.Phi, W, rtol=1e-10, atol=1e-12)
    assert np.allclose(model.Phi.T @ model.R, q_X.mean @ Y.T, rtol=1e-10, atol=1e-12)
    assert model.R.shape == (3, 4)


def test_x_model_matches_kronecker_form(rng):
    q_H = _x_belief(rng, 3, 2)
    Y = rng.standard_normal((3, 2))
    model = build_whitened_x_model(q_H, Y)
    mean, covariance = kronecker_x_message(q_H.mean, q_H.col_cov, Y)

    gram = model.Phi.T @ model.Phi
    assert np.allclose(np.linalg.solve(gram, model.Phi.T @ model.R), mean, rtol=1e-10, atol=1e-12)
    assert np.allclose(np.kron(np.eye(2), np.linalg.inv(gram)), covariance, rtol=1e-10, atol=1e-12)


def test_h_model_matches_kronecker_form(rng):
    q_X = _h_belief(rng, 2, 3)
    Y = rng.standard_normal((2, 3))
    model = build_whitened_h_model(q_X, Y)
    mean, covariance = kronecker_h_message(q_X.mean, q_X.row_cov, Y)

    gram = model.Phi.T @ model.Phi
    assert np.allclose(np.linalg.solve(gram, model.Phi.T @ model.R), mean, rtol=1e-10, atol=1e-12)
    assert np.allclose(np.kron(np.eye(2), np.linalg.inv(gram)), covariance, rtol=1e-10, atol=1e-12)


def test_rank_deficient_model_is_clamped():
    q_H = MatrixNormalBelief(np.ones((4, 3)), np.ones(4), np.zeros(3))
    model = build_whitened_x_model(q_H, np.ones((4, 2)))
    assert np.all(model.D > 0.0)
    assert model.D.min() == pytest.approx(model.D.max() * 1e-12)
    assert np.all(np.isfinite(model.R))


def test_zero_model_is_degenerate():
    q_H = MatrixNormalBelief(np.zeros((3, 2)), np.ones(3), np.zeros(2))
    with pytest.raises(DegenerateModelError):
        build_whitened_x_model(q_H, np.ones((3, 2)))


def test_observation_shape_is_checked(rng):
    with pytest.raises(DimensionMismatchError):
        build_whitened_x_model(_x_belief(rng, 4, 2), np.ones((3, 2)))


def test_proposition_suite_passes():
    checks = check_propositions(instances=50, samples=20_000, seed=7)
    assert all(check.passed for check in checks), [c.line() for c in checks if not c.passed]
