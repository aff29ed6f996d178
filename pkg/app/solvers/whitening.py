"""
Whitened pseudo-models of the X and H updates.

The message from the likelihood to X is MN(X; X̄, λ̂⁻¹Ū, I) with
Ū = W̄⁻¹, W̄ = ĤᵀĤ + Tr(U_H)·V_H and X̄ = Ū Ĥᵀ Y. Whitening by Ū^{-1/2}
and rotating by the eigenvectors of W̄ = C D Cᵀ gives the linear model
R = ΦX + white noise with

    Φ = D^{1/2} Cᵀ,    R = Φ X̄ = D^{-1/2} Cᵀ Ĥᵀ Y,

so ΦᵀΦ = W̄ (its inverse is the message covariance Ū) and ΦᵀR = ĤᵀY.
Neither W̄⁻¹ nor a matrix square root is ever formed. The H side is the same
construction on the transposed problem and addresses Hᵀ.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from app.core.config import get_settings
from app.core.exceptions import DegenerateModelError, DimensionMismatchError
from app.core.logging_config import get_logger
from app.solvers.problem import MatrixNormalBelief

logger = get_logger(__name__)


@dataclass(frozen=True)
class WhitenedModel:
    """R = Φ·(unknown) + white noise; ``D`` holds the clamped eigenvalues of ``W``."""

    R: np.ndarray
    Phi: np.ndarray
    D: np.ndarray
    C: np.ndarray
    W: np.ndarray


def whiten(W: np.ndarray, B: np.ndarray, side: str = "x") -> WhitenedModel:
    """
    Whiten the message with precision factor W̄ and data term B.

    Eigenvalues below max(eig)·EIGENVALUE_FLOOR_RATIO are raised to that floor.

    Args:
        W: Symmetric positive semi-definite W̄
        B: Data term (ĤᵀY or X̂Yᵀ)
        side: "x" or "h", for diagnostics

    Returns:
        WhitenedModel: Φ = D^{1/2}Cᵀ and R = D^{-1/2}CᵀB

    Raises:
        DegenerateModelError: If the EVD fails or no eigenvalue is positive
    """
    if not np.all(np.isfinite(W)):
        raise DegenerateModelError(side, "non-finite W")
    try:
        eigvals, eigvecs = scipy.linalg.eigh(W)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DegenerateModelError(side, f"eigendecomposition failed: {e}") from e

    top = float(np.max(eigvals))
    if not top > 0.0:
        raise DegenerateModelError(side, "all eigenvalues are non-positive")
    floor = top * get_settings().EIGENVALUE_FLOOR_RATIO
    clamped = np.maximum(eigvals, floor)
    if np.any(eigvals < floor):
        logger.debug(
            "Eigenvalues clamped",
            extra={"side": side, "clamped": int(np.sum(eigvals < floor))},
        )

    root = np.sqrt(clamped)[:, None]
    rotated = eigvecs.T @ B
    return WhitenedModel(R=rotated / root, Phi=eigvecs.T * root, D=clamped, C=eigvecs, W=W)


def build_whitened_x_model(q_H: MatrixNormalBelief, Y: np.ndarray) -> WhitenedModel:
    """
    Pseudo-model R_X = Φ_X X + noise from q(H).

    W̄_X = ĤᵀĤ + Tr(U_H)·V_H and R_X = D_X^{-1/2} C_Xᵀ Ĥᵀ Y (N×L).
    """
    h_hat = q_H.mean
    if Y.shape[0] != h_hat.shape[0]:
        raise DimensionMismatchError("observation Y", (h_hat.shape[0], Y.shape[1]), Y.shape)
    W = h_hat.T @ h_hat + float(np.sum(q_H.row_cov)) * np.diag(q_H.col_cov)
    return whiten(W, h_hat.T @ Y, side="x")


def build_whitened_h_model(q_X: MatrixNormalBelief, Y: np.ndarray) -> WhitenedModel:
    """
    Pseudo-model R_H = Φ_H Hᵀ + noise from q(X).

    W̄_H = X̂X̂ᵀ + Tr(V_X)·U_X and R_H = D_H^{-1/2} C_Hᵀ X̂ Yᵀ (N×M); this is
    ``build_whitened_x_model`` applied to Yᵀ = XᵀHᵀ.
    """
    x_hat = q_X.mean
    if Y.shape[1] != x_hat.shape[1]:
        raise DimensionMismatchError("observation Y", (Y.shape[0], x_hat.shape[1]), Y.shape)
    W = x_hat @ x_hat.T + float(np.sum(q_X.col_cov)) * np.diag(q_X.row_cov)
    return whiten(W, x_hat @ Y.T, side="h")
