"""
UAMP-MF engine.

Each iteration whitens the message to X into the pseudo-model R_X = Φ_X X +
noise and refreshes q(X) on it, projects q(X) to a matrix normal with
row-shared variances, repeats the same on Hᵀ, then refreshes the noise
precision λ̂ = ML/C.

The refresh on a pseudo-model depends on the prior. Priors that are Gaussian
given their hyper-parameters (fixed, learned-variance, Gaussian-Gamma, known
entries and block concatenations of these) get the exact Gaussian posterior
of every column. Other priors get one row-wise sweep of the scalar channel
q_k = (ΦᵀR − Σ_{i≠k} (ΦᵀΦ)_{ki} x̂_i)_k / (ΦᵀΦ)_{kk}, v_k = 1/(λ̂ (ΦᵀΦ)_{kk}).
Neither keeps state between outer iterations, so a change of the whitening
basis carries nothing over.
"""

from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import (
    DegenerateModelError,
    DivergenceError,
    InvalidPseudoObservationError,
)
from app.core.logging_config import get_logger
from app.denoisers.base import DenoisedField, EntryDenoiser, PseudoObservationField
from app.solvers.problem import (
    FactorizationProblem,
    IterationRecord,
    MatrixNormalBelief,
    SolveResult,
    SolverOptions,
)
from app.solvers.uamp import relative_change
from app.solvers.whitening import (
    WhitenedModel,
    build_whitened_h_model,
    build_whitened_x_model,
)
from app.utils.general_utils import frobenius_sq, make_rng

logger = get_logger(__name__)

_RECOVERABLE = (DivergenceError, DegenerateModelError, InvalidPseudoObservationError)


@dataclass(frozen=True)
class EngineState:
    """Iterate of the engine; every matrix has the orientation of its factor."""

    H_hat: np.ndarray
    X_hat: np.ndarray
    Xi_H: np.ndarray
    Xi_X: np.ndarray
    U_X: np.ndarray
    V_H: np.ndarray
    lambda_hat: float
    iteration: int = 0

    @classmethod
    def initial(cls, dims: Tuple[int, int, int], H_init: np.ndarray) -> "EngineState":
        m, n, l = dims
        return cls(
            H_hat=np.asarray(H_init, dtype=float),
            X_hat=np.zeros((n, l)),
            Xi_H=np.ones((m, n)),
            Xi_X=np.ones((n, l)),
            U_X=np.ones(n),
            V_H=np.ones(n),
            lambda_hat=get_settings().LAMBDA_INIT,
        )

    @property
    def q_X(self) -> MatrixNormalBelief:
        return MatrixNormalBelief(self.X_hat, self.U_X, np.ones(self.X_hat.shape[1]))

    @property
    def q_H(self) -> MatrixNormalBelief:
        return MatrixNormalBelief(self.H_hat, np.ones(self.H_hat.shape[0]), self.V_H)


IterationCallback = Callable[[int, EngineState], None]


def gaussian_posterior(
    model: WhitenedModel,
    lambda_hat: float,
    means: np.ndarray,
    precisions: np.ndarray,
    stage: str = "gaussian_posterior",
    iteration: int = 0,
) -> Tuple[PseudoObservationField, DenoisedField]:
    """
    Exact posterior of R = ΦX + N(0, I/λ̂) under independent N(means, 1/precisions).

    Columns are independent given the model. Zero precision is a flat prior;
    infinite precision pins the entry to its mean, and the remaining entries
    of the column are solved conditioned on it. Columns sharing a pinning
    pattern are solved as one batch.

    The returned field is the scalar channel each free entry sees once its own
    prior is divided out of the posterior: τ = 1/Ξ − precision, floored at
    λ̂·min eig(ΦᵀΦ). Pinned entries get (x̂, 1).

    Args:
        model: Whitened pseudo-model, unknown of shape (N, K)
        lambda_hat: Noise precision of the pseudo-model
        means: Prior means, (N, K)
        precisions: Prior precisions, (N, K)

    Returns:
        Tuple of the scalar-channel field and the posterior means and variances

    Raises:
        DivergenceError: If a system is singular or the posterior is non-finite
    """
    gram = model.Phi.T @ model.Phi
    data = model.Phi.T @ model.R
    n, k = data.shape
    pinned = np.isinf(precisions)
    free_precisions = np.where(pinned, 0.0, precisions)
    means = np.asarray(means, dtype=float)

    x_hat = np.where(pinned, means, 0.0)
    xi = np.zeros((n, k))
    patterns, inverse = np.unique(pinned.T, axis=0, return_inverse=True)
    inverse = np.reshape(inverse, -1)
    for index, pattern in enumerate(patterns):
        free = ~pattern
        size = int(free.sum())
        if size == 0:
            continue
        cols = np.flatnonzero(inverse == index)
        prec = free_precisions[np.ix_(free, cols)]
        rhs = lambda_hat * data[np.ix_(free, cols)] + prec * means[np.ix_(free, cols)]
        if pattern.any():
            rhs -= lambda_hat * gram[np.ix_(free, pattern)] @ means[np.ix_(pattern, cols)]

        diag = np.arange(size)
        system = np.repeat((lambda_hat * gram[np.ix_(free, free)])[None], cols.size, axis=0)
        system[:, diag, diag] += prec.T
        scale = 1.0 / np.sqrt(system[:, diag, diag])
        scaling = scale[:, :, None] * scale[:, None, :]
        try:
            cov = np.linalg.inv(system * scaling) * scaling
        except np.linalg.LinAlgError as e:
            raise DivergenceError(stage, iteration, f"singular posterior precision: {e}") from e
        x_hat[np.ix_(free, cols)] = np.einsum("cij,jc->ic", cov, rhs)
        xi[np.ix_(free, cols)] = cov[:, diag, diag].T

    if not (np.all(np.isfinite(x_hat)) and np.all(np.isfinite(xi))):
        raise DivergenceError(stage, iteration, "non-finite posterior")
    xi = np.maximum(xi, 0.0)

    floor = lambda_hat * float(np.min(model.D))
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(pinned, 1.0, np.maximum(1.0 / xi - free_precisions, floor))
    v = 1.0 / gain
    q = np.where(pinned, x_hat, x_hat + v * free_precisions * (x_hat - means))
    return PseudoObservationField(q, v), DenoisedField(x_hat, xi)


def scalar_channel_sweep(
    model: WhitenedModel,
    estimate: np.ndarray,
    lambda_hat: float,
    denoise: Callable[[PseudoObservationField], DenoisedField],
) -> PseudoObservationField:
    """
    One row-wise pass of the scalar channel over the pseudo-model.

    Row k sees q_k = x̂_k + (ΦᵀR − ΦᵀΦ X̂)_k / (ΦᵀΦ)_{kk} with variance
    1/(λ̂ (ΦᵀΦ)_{kk}) and is replaced by its denoised row before row k+1.

    Returns:
        PseudoObservationField: Field of the last pass; denoising it
        reproduces every row of the sweep
    """
    gram = model.Phi.T @ model.Phi
    data = model.Phi.T @ model.R
    diag = np.diag(gram)
    x_hat = np.array(estimate, dtype=float)
    q = x_hat.copy()
    v = np.repeat((1.0 / (lambda_hat * diag))[:, None], x_hat.shape[1], axis=1)
    for k in range(x_hat.shape[0]):
        q[k] = x_hat[k] + (data[k] - gram[k] @ x_hat) / diag[k]
        x_hat[k] = denoise(PseudoObservationField(q, v)).means[k]
    return PseudoObservationField(q, v)


def _refresh(
    model: WhitenedModel,
    estimate: np.ndarray,
    lambda_hat: float,
    denoiser: EntryDenoiser,
    transposed: bool,
    stage: str,
    iteration: int,
) -> DenoisedField:
    # model and estimate address the unknown as N×K; a transposed denoiser is shaped K×N
    def orient(values: np.ndarray) -> np.ndarray:
        return values.T if transposed else values

    prior = denoiser.gaussian_prior()
    if prior is not None:
        means, precisions = prior
        field, denoised = gaussian_posterior(model, lambda_hat, orient(means), orient(precisions), stage, iteration)
        field = PseudoObservationField(orient(field.q_values), orient(field.v_values))
        denoised = DenoisedField(orient(denoised.means), orient(denoised.variances))
    else:

        def denoise(field: PseudoObservationField) -> DenoisedField:
            out = denoiser.denoise(PseudoObservationField(orient(field.q_values), orient(field.v_values)))
            return DenoisedField(orient(out.means), orient(out.variances))

        swept = scalar_channel_sweep(model, estimate, lambda_hat, denoise)
        field = PseudoObservationField(orient(swept.q_values), orient(swept.v_values))
        denoised = denoiser.denoise(field)

    denoiser.learn(field, denoised)
    return denoised


def update_x(state: EngineState, model: WhitenedModel, x_denoiser: EntryDenoiser) -> EngineState:
    """
    Refresh q(X) on the X-side pseudo-model and project it.

    Args:
        state: Current iterate
        model: Whitened X-side model from ``build_whitened_x_model``
        x_denoiser: Prior on X

    Returns:
        EngineState: Iterate with refreshed X̂, Ξ_X and U_X = row means of Ξ_X

    Raises:
        DivergenceError: On singular systems or non-finite posteriors
    """
    denoised = _refresh(
        model, state.X_hat, state.lambda_hat, x_denoiser, False, "update_x", state.iteration + 1
    )
    return replace(
        state,
        X_hat=denoised.means,
        Xi_X=denoised.variances,
        U_X=denoised.variances.mean(axis=1),
    )


def update_h(state: EngineState, model: WhitenedModel, h_denoiser: EntryDenoiser) -> EngineState:
    """
    Refresh q(H) on the Hᵀ-side pseudo-model and project it.

    ``h_denoiser`` is shaped like H; V_H = column means of Ξ_H.
    """
    denoised = _refresh(
        model, state.H_hat.T, state.lambda_hat, h_denoiser, True, "update_h", state.iteration + 1
    )
    return replace(
        state,
        H_hat=denoised.means,
        Xi_H=denoised.variances,
        V_H=denoised.variances.mean(axis=0),
    )


def expected_residual(Y: np.ndarray, state: EngineState) -> float:
    """
    E‖Y − HX‖²_F under q(H) q(X):

    ‖Y − ĤX̂‖² + M·Tr(X̂X̂ᵀV_H) + L·Tr(U_XĤᵀĤ) + ML·Tr(U_X V_H).
    """
    m, l = Y.shape
    fit = frobenius_sq(Y - state.H_hat @ state.X_hat)
    x_rows = np.sum(state.X_hat**2, axis=1)
    h_cols = np.sum(state.H_hat**2, axis=0)
    return (
        fit
        + m * float(x_rows @ state.V_H)
        + l * float(state.U_X @ h_cols)
        + m * l * float(state.U_X @ state.V_H)
    )


def update_lambda(Y: np.ndarray, state: EngineState) -> float:
    """
    Noise precision λ̂ = ML / C, with C floored at RESIDUAL_FLOOR_RATIO·‖Y‖²_F.

    Raises:
        DivergenceError: If C is negative or non-finite
    """
    m, l = Y.shape
    c = expected_residual(Y, state)
    if not np.isfinite(c) or c < 0.0:
        raise DivergenceError("update_lambda", state.iteration, f"invalid expected residual {c}")
    floor = get_settings().RESIDUAL_FLOOR_RATIO * max(frobenius_sq(Y), np.finfo(float).tiny)
    return m * l / max(c, floor)


def _check_finite(state: EngineState, residual: float, iteration: int) -> None:
    checks = (
        ("H_hat", state.H_hat),
        ("X_hat", state.X_hat),
        ("Xi_H", state.Xi_H),
        ("Xi_X", state.Xi_X),
        ("U_X", state.U_X),
        ("V_H", state.V_H),
        ("lambda_hat", state.lambda_hat),
        ("residual", residual),
    )
    for name, value in checks:
        if not np.all(np.isfinite(value)):
            raise DivergenceError("solve", iteration, f"non-finite {name}")
    if not state.lambda_hat > 0.0:
        raise DivergenceError("solve", iteration, f"non-positive lambda_hat {state.lambda_hat}")


def _initial_h(
    problem: FactorizationProblem, options: SolverOptions, attempt: int, rng: np.random.Generator
) -> np.ndarray:
    m, n, _ = problem.dims
    if attempt == 0 and options.h_init == "ones":
        H_init = np.ones((m, n))
    else:
        H_init = rng.standard_normal((m, n))
    prior = problem.h_prior.gaussian_prior()
    if prior is not None:
        means, precisions = prior
        H_init = np.where(np.isinf(precisions), means, H_init)
    return H_init


@dataclass
class _Attempt:
    state: EngineState
    trace: List[IterationRecord]
    converged: bool
    residual: float


def _run_attempt(
    problem: FactorizationProblem,
    options: SolverOptions,
    H_init: np.ndarray,
    attempt: int,
    callback: Optional[IterationCallback] = None,
) -> _Attempt:
    Y = problem.Y
    data_energy = max(frobenius_sq(Y), np.finfo(float).tiny)
    problem.h_prior.reset()
    problem.x_prior.reset()

    state = EngineState.initial(problem.dims, H_init)
    if options.noise_precision is not None:
        state = replace(state, lambda_hat=options.noise_precision)

    trace: List[IterationRecord] = []
    converged = False
    for iteration in range(1, options.max_iters + 1):
        try:
            nxt = update_x(state, build_whitened_x_model(state.q_H, Y), problem.x_prior)
            nxt = update_h(nxt, build_whitened_h_model(nxt.q_X, Y), problem.h_prior)
            if options.noise_precision is None:
                nxt = replace(nxt, lambda_hat=update_lambda(Y, nxt))
            residual = frobenius_sq(Y - nxt.H_hat @ nxt.X_hat)
            _check_finite(nxt, residual, iteration)
        except _RECOVERABLE as e:
            logger.warning(
                f"Attempt {attempt} diverged: {e.message}",
                extra={"attempt": attempt, "iteration": iteration},
            )
            break

        if iteration == 1:
            delta = np.inf
        else:
            delta = max(
                relative_change(nxt.X_hat, state.X_hat),
                relative_change(nxt.H_hat, state.H_hat),
            )
        state = replace(nxt, iteration=iteration)
        trace.append(
            IterationRecord(
                iteration=iteration,
                lambda_hat=float(state.lambda_hat),
                residual=residual / data_energy,
                delta=float(delta),
            )
        )
        logger.debug(
            "UAMP-MF iteration",
            extra={
                "attempt": attempt,
                "iteration": iteration,
                "lambda_hat": state.lambda_hat,
                "residual": residual / data_energy,
                "delta": delta,
            },
        )
        if callback is not None:
            callback(attempt, state)
        if delta < options.tol:
            converged = True
            break

    residual = frobenius_sq(Y - state.H_hat @ state.X_hat)
    return _Attempt(state=state, trace=trace, converged=converged, residual=residual)


def solve(
    problem: FactorizationProblem,
    options: Optional[SolverOptions] = None,
    callback: Optional[IterationCallback] = None,
) -> SolveResult:
    """
    Run UAMP-MF with restarts and return the attempt with the smallest residual.

    The first attempt starts from the all-ones Ĥ (or a seeded Gaussian Ĥ when
    ``h_init="random"``); each of the ``restarts`` further attempts starts
    from a seeded Gaussian Ĥ. Entries the H prior pins start at their known
    values. Prior hyper-parameters are reset per attempt. An attempt that
    produces a non-finite or degenerate iterate keeps its last finite iterate
    and is flagged as not converged, so a later attempt can replace it.

    Args:
        problem: Observation and priors
        options: Overrides ``problem.options``
        callback: Called as ``callback(attempt, state)`` after every accepted iteration

    Returns:
        SolveResult: Beliefs, λ̂ and trace of the best attempt
    """
    options = options or problem.options
    rng = make_rng(options.seed)
    m, n, l = problem.dims
    logger.info(
        f"Solving {problem.name} problem",
        extra={"m": m, "n": n, "l": l, "restarts": options.restarts},
    )

    best: Optional[_Attempt] = None
    best_index = 0
    for attempt in range(options.restarts + 1):
        H_init = _initial_h(problem, options, attempt, rng)
        outcome = _run_attempt(problem, options, H_init, attempt, callback)
        logger.info(
            f"Attempt {attempt} finished",
            extra={
                "attempt": attempt,
                "iterations": outcome.state.iteration,
                "converged": outcome.converged,
                "residual": outcome.residual,
            },
        )
        if best is None or outcome.residual < best.residual:
            best, best_index = outcome, attempt

    state = best.state
    return SolveResult(
        H_hat=state.H_hat,
        X_hat=state.X_hat,
        Xi_H=state.Xi_H,
        Xi_X=state.Xi_X,
        U_X=state.U_X,
        V_H=state.V_H,
        lambda_hat=float(state.lambda_hat),
        residual=best.residual,
        iterations=state.iteration,
        converged=best.converged,
        attempt=best_index,
        trace=best.trace,
    )
