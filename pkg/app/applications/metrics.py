"""
Evaluation metrics in dB.

``nmse_h_resolved`` removes the permutation and per-column scale (sign
included) ambiguity of dictionary-type factorizations before measuring the
error.
"""

from itertools import permutations
from typing import Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.core.exceptions import MetricError
from app.utils.general_utils import frobenius_sq, ratio_to_db


def nmse_db(truth: np.ndarray, estimate: np.ndarray, metric: str = "NMSE") -> float:
    """10·log10(‖estimate − truth‖² / ‖truth‖²), floored at NMSE_FLOOR_DB."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise MetricError(metric, f"shape mismatch {truth.shape} vs {estimate.shape}")
    energy = frobenius_sq(truth)
    if energy == 0.0:
        raise MetricError(metric, "reference matrix is zero")
    return ratio_to_db(frobenius_sq(estimate - truth) / energy)


def nmse_z(Z_true: np.ndarray, H_hat: np.ndarray, X_hat: np.ndarray) -> float:
    return nmse_db(Z_true, np.asarray(H_hat) @ np.asarray(X_hat), metric="NMSE_Z")


def nmse_x(X_true: np.ndarray, X_hat: np.ndarray) -> float:
    return nmse_db(X_true, X_hat, metric="NMSE_X")


def _check_dictionary_pair(H_true: np.ndarray, H_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    H_true = np.asarray(H_true, dtype=float)
    H_hat = np.asarray(H_hat, dtype=float)
    if H_true.shape != H_hat.shape or H_true.ndim != 2:
        raise MetricError("NMSE_H", f"shape mismatch {H_true.shape} vs {H_hat.shape}")
    if np.any(np.sum(H_true**2, axis=0) == 0.0):
        raise MetricError("NMSE_H", "reference dictionary has a zero column")
    return H_true, H_hat


def _pair_scales(H_true: np.ndarray, H_hat: np.ndarray) -> np.ndarray:
    # LS scale a[j, i] fitting estimate column j to true column i
    inner = H_hat.T @ H_true
    est_energy = np.sum(H_hat**2, axis=0)
    return np.divide(
        inner,
        est_energy[:, None],
        out=np.zeros_like(inner),
        where=est_energy[:, None] > 0.0,
    )


def _resolved_error(H_true: np.ndarray, H_hat: np.ndarray, assignment: np.ndarray, scales: np.ndarray) -> float:
    # assignment[i] = estimate column matched to true column i
    columns = np.arange(H_true.shape[1])
    aligned = H_hat[:, assignment] * scales[assignment, columns]
    return frobenius_sq(aligned - H_true)


def resolve_dictionary(H_true: np.ndarray, H_hat: np.ndarray) -> np.ndarray:
    """
    Optimal column matching and scaling of ``H_hat`` onto ``H_true``.

    Matching estimate column j to true column i with its least-squares scale
    lowers the error by ‖h_i‖²·ρ²_ij, ρ being the normalized correlation, so
    a maximum-weight assignment on those reductions is the exact minimum
    over permutations and per-column scales.

    Returns:
        np.ndarray: ĤJ, aligned with ``H_true``
    """
    H_true, H_hat = _check_dictionary_pair(H_true, H_hat)
    scales = _pair_scales(H_true, H_hat)
    reduction = (H_hat.T @ H_true) * scales
    est_rows, true_cols = linear_sum_assignment(reduction, maximize=True)
    assignment = np.empty(H_true.shape[1], dtype=int)
    assignment[true_cols] = est_rows
    columns = np.arange(H_true.shape[1])
    return H_hat[:, assignment] * scales[assignment, columns]


def nmse_h_resolved(H_true: np.ndarray, H_hat: np.ndarray) -> float:
    """NMSE(H) after resolving permutation and scale, in dB."""
    H_true, H_hat = _check_dictionary_pair(H_true, H_hat)
    aligned = resolve_dictionary(H_true, H_hat)
    return ratio_to_db(frobenius_sq(aligned - H_true) / frobenius_sq(H_true))


def nmse_h_exhaustive(H_true: np.ndarray, H_hat: np.ndarray) -> float:
    """Brute-force reference for ``nmse_h_resolved``; tractable for N <= 6 or so."""
    H_true, H_hat = _check_dictionary_pair(H_true, H_hat)
    scales = _pair_scales(H_true, H_hat)
    best = min(
        _resolved_error(H_true, H_hat, np.asarray(order), scales)
        for order in permutations(range(H_true.shape[1]))
    )
    return ratio_to_db(best / frobenius_sq(H_true))


def rpca_low_rank(H_hat: np.ndarray, X_hat: np.ndarray, rank: int) -> np.ndarray:
    """Ẑ = Ĥ[:, :N]·X̂[:N, :] of an RPCA solution."""
    return H_hat[:, :rank] @ X_hat[:rank]


def rpca_outliers(X_hat: np.ndarray, rank: int) -> np.ndarray:
    """Outlier estimate Ê = X̂[N:, :] of an RPCA solution."""
    return X_hat[rank:]
