"""Dense real linear algebra used by the spectral machinery.

Thin, contract-checking wrappers around LAPACK (through :mod:`numpy.linalg`).
All inputs are treated as read-only; every function returns fresh arrays.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "ContractError",
    "ConvergenceError",
    "SvdResult",
    "svd",
    "pseudo_inverse",
    "sym_eig",
    "eigenvalues_general",
    "operator_norm",
    "spectral_radius",
    "lambda_min",
    "lambda_max",
]

PINV_RCOND = 1e-12
SYM_RTOL = 1e-10


class ContractError(ValueError):
    """An input violates a documented precondition."""


class ConvergenceError(RuntimeError):
    """An iterative factorization failed to converge."""


class SvdResult(NamedTuple):
    u: np.ndarray
    sigma: np.ndarray
    v_t: np.ndarray


def _as_matrix(m, name="m") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{name} has non-finite entries")
    return a


def _as_square(m, name="m") -> np.ndarray:
    a = _as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise ContractError(f"{name} must be square, got shape {a.shape}")
    return a


def svd(m) -> SvdResult:
    """Thin SVD with singular values in descending order.

    Parameters
    ----------
    m : array_like, shape (r, c)

    Returns
    -------
    SvdResult
        ``u`` (r, q), ``sigma`` (q,), ``v_t`` (q, c) with ``q = min(r, c)``.
    """
    a = _as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge for {a.shape} input") from exc
    return SvdResult(u, s, vt)


def pseudo_inverse(m, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``rcond * sigma_max`` are dropped."""
    a = _as_matrix(m)
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    u, s, vt = svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.shape[::-1])
    keep = s > rcond * s[0]
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def sym_eig(m, rtol: float = SYM_RTOL):
    """Eigen-decomposition of a symmetric matrix.

    The input is symmetrized before factorization, which absorbs rounding
    drift from finite-difference Hessians. Asymmetry beyond ``rtol``
    (relative to the largest entry) is rejected.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray, columns orthonormal
    """
    a = _as_square(m)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > rtol * scale:
        raise ContractError("sym_eig requires a symmetric matrix")
    sym = 0.5 * (a + a.T)
    try:
        w, v = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("symmetric eigensolver did not converge") from exc
    return w, v


def eigenvalues_general(m) -> np.ndarray:
    """All eigenvalues of a real square matrix, as a complex array.

    LAPACK ``geev`` (balancing, Hessenberg reduction, shifted QR). The
    result is sorted by descending real part, then by imaginary part, so
    conjugate pairs are adjacent and the ordering is reproducible.
    """
    a = _as_square(m)
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("QR iteration did not converge") from exc
    lam = np.asarray(lam, dtype=complex)
    order = np.lexsort((lam.imag, -lam.real))
    return lam[order]


def operator_norm(m) -> float:
    """Largest singular value (0 for an empty or zero matrix)."""
    a = _as_matrix(m)
    if a.size == 0:
        return 0.0
    return float(svd(a).sigma[0])


def spectral_radius(m) -> float:
    lam = eigenvalues_general(m)
    return float(np.max(np.abs(lam))) if lam.size else 0.0


def lambda_min(m) -> float:
    return float(sym_eig(m)[0][0])


def lambda_max(m) -> float:
    return float(sym_eig(m)[0][-1])
