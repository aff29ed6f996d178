"""
Unitary approximate message passing for y = Ax + w, w ~ N(0, β⁻¹I).

The model is first rotated by the left singular vectors of A, giving
r = Φx + w' with Φ = ΛV. Two variants are supported: "v1" tracks one variance
per entry, "v2" tracks scalar variances through λ = ΛΛᵀ1.
"""

from dataclasses import dataclass, replace
from typing import Literal, Optional, Tuple

import numpy as np
import scipy.linalg

from app.core.config import get_settings
from app.core.exceptions import DimensionMismatchError, DivergenceError
from app.core.logging_config import get_logger
from app.denoisers.base import EntryDenoiser, PseudoObservationField

logger = get_logger(__name__)

Variant = Literal["v1", "v2"]


@dataclass(frozen=True)
class UampState:
    """
    Iterate of the UAMP recursion.

    ``tau_x`` is a vector for v1 and a 0-d array for v2.
    """

    x_est: np.ndarray
    tau_x: np.ndarray
    s: np.ndarray
    lambda_vec: np.ndarray
    variant: Variant = "v1"
    iteration: int = 0

    @classmethod
    def initial(
        cls, phi: np.ndarray, lambda_vec: np.ndarray, variant: Variant = "v1"
    ) -> "UampState":
        m, n = phi.shape
        tau0 = get_settings().UAMP_TAU_INIT
        tau_x = np.full(n, tau0) if variant == "v1" else np.asarray(tau0, dtype=float)
        return cls(
            x_est=np.zeros(n),
            tau_x=tau_x,
            s=np.zeros(m),
            lambda_vec=np.asarray(lambda_vec, dtype=float),
            variant=variant,
        )


@dataclass(frozen=True)
class UampResult:
    state: UampState
    iterations: int
    converged: bool

    @property
    def x_est(self) -> np.ndarray:
        return self.state.x_est


def unitary_transform(
    y: np.ndarray, A: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rotate y = Ax + w by the left singular vectors of A.

    Args:
        y: Observation vector of length M
        A: Measurement matrix, M×N

    Returns:
        Tuple (r, Φ, λ) with r = Uᵀy, Φ = ΛV and λ = ΛΛᵀ1 (length M, singular
        values in descending order, zero-padded when M > N)

    Raises:
        DimensionMismatchError: If y and A disagree
        DivergenceError: If the SVD fails on non-finite input
    """
    y = np.asarray(y, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise DimensionMismatchError("observation y", (A.shape[0],), y.shape)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise DivergenceError("unitary transform", 0, "non-finite measurement matrix or observation")

    m, n = A.shape
    try:
        u, singular_values, vh = scipy.linalg.svd(A, full_matrices=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DivergenceError("unitary transform", 0, f"SVD failed: {e}") from e

    k = singular_values.size
    phi = np.zeros((m, n))
    phi[:k] = singular_values[:, None] * vh[:k]
    lambda_vec = np.zeros(m)
    lambda_vec[:k] = singular_values**2
    return u.T @ y, phi, lambda_vec


def uamp_iterate(
    state: UampState,
    r: np.ndarray,
    phi: np.ndarray,
    beta: float,
    denoiser: EntryDenoiser,
) -> UampState:
    """
    One pass of the UAMP recursion, followed by a hyper-parameter refresh.

    Args:
        state: Current iterate
        r: Rotated observation
        phi: Rotated measurement operator
        beta: Noise precision (np.inf for noiseless data)
        denoiser: Prior on x, of shape (N,)

    Returns:
        UampState: The next iterate

    Raises:
        DivergenceError: If τ_q is non-positive or non-finite
    """
    m, n = phi.shape
    if state.x_est.shape != (n,) or state.s.shape != (m,) or r.shape != (m,):
        raise DimensionMismatchError("UAMP state", (m, n), (state.s.shape[0], state.x_est.shape[0]))

    phi_sq = phi**2
    if state.variant == "v1":
        tau_p = phi_sq @ state.tau_x
    else:
        tau_p = state.tau_x * state.lambda_vec
    p = phi @ state.x_est - tau_p * state.s

    denom = tau_p + 1.0 / beta
    # rows with zero gain and no noise carry no information
    tau_s = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom > 0.0)
    s = tau_s * (r - p)

    if state.variant == "v1":
        inv_tau_q = phi_sq.T @ tau_s
    else:
        inv_tau_q = np.full(n, state.lambda_vec @ tau_s / n)
    if not np.all(np.isfinite(inv_tau_q)) or np.any(inv_tau_q <= 0.0):
        raise DivergenceError("uamp", state.iteration + 1, "non-positive or non-finite tau_q")
    tau_q = 1.0 / inv_tau_q
    q = state.x_est + tau_q * (phi.T @ s)

    field = PseudoObservationField(q, tau_q)
    denoised = denoiser.denoise(field)
    denoiser.learn(field, denoised)

    tau_x = denoised.variances if state.variant == "v1" else np.asarray(denoised.variances.mean())
    return replace(
        state,
        x_est=denoised.means,
        tau_x=tau_x,
        s=s,
        iteration=state.iteration + 1,
    )


def relative_change(current: np.ndarray, previous: np.ndarray) -> float:
    """‖current − previous‖ / ‖previous‖, with 0/0 read as no change."""
    diff = float(np.linalg.norm(current - previous))
    base = float(np.linalg.norm(previous))
    if base == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return diff / base


def solve_uamp(
    y: np.ndarray,
    A: np.ndarray,
    beta: float,
    denoiser: EntryDenoiser,
    variant: Variant = "v1",
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
) -> UampResult:
    """
    Run UAMP from x = 0, τ_x = 1 until the relative change of x drops below tol.

    Args:
        y: Observation vector
        A: Measurement matrix
        beta: Noise precision
        denoiser: Prior on x
        variant: "v1" (vector variances) or "v2" (scalar variances)
        tol: Termination threshold, defaults to ``UAMP_TOL``
        max_iters: Iteration cap, defaults to ``UAMP_MAX_ITERS``

    Returns:
        UampResult: Final state, iteration count and convergence flag
    """
    settings = get_settings()
    tol = settings.UAMP_TOL if tol is None else tol
    max_iters = settings.UAMP_MAX_ITERS if max_iters is None else max_iters

    r, phi, lambda_vec = unitary_transform(y, A)
    state = UampState.initial(phi, lambda_vec, variant)
    denoiser.reset()

    converged = False
    for _ in range(max_iters):
        next_state = uamp_iterate(state, r, phi, beta, denoiser)
        delta = relative_change(next_state.x_est, state.x_est)
        state = next_state
        logger.debug(
            "UAMP iteration",
            extra={"iteration": state.iteration, "delta": delta, "variant": variant},
        )
        if delta < tol:
            converged = True
            break

    logger.info(
        f"UAMP ({variant}) finished after {state.iteration} iterations",
        extra={"converged": converged},
    )
    return UampResult(state=state, iterations=state.iteration, converged=converged)
