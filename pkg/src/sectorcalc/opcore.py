"""Dense complex linear algebra and the brute-force spectral oracles.

Every contour computation in the package is checked against something in
here: an LU solve, a full SVD norm, an eigendecomposition, or a matrix
exponential that never touches a contour.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotDiagonalizable, PreconditionViolated, SingularShift

EIG_COND_CAP = 1e8
ULP = np.finfo(float).eps


def as_cmatrix(A) -> np.ndarray:
    """Validate and convert to a square complex matrix."""
    M = np.atleast_2d(np.asarray(A, dtype=complex))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise PreconditionViolated(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise PreconditionViolated("matrix has non-finite entries")
    return M


def as_cvector(y, n: int | None = None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(y, dtype=complex))
    if v.ndim != 1:
        raise PreconditionViolated(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise PreconditionViolated(f"vector has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise PreconditionViolated("vector has non-finite entries")
    return v


def shifted(A: np.ndarray, z: complex) -> np.ndarray:
    return A + z * np.eye(A.shape[0])


def lu_shifted(A, z: complex):
    """LU factors of A + zI, refusing numerically singular shifts.

    A pivot below n * ulp * ||A + zI|| is treated as singular.
    """
    A = as_cmatrix(A)
    M = shifted(A, z)
    with warnings.catch_warnings():
        # exact zero pivots are reported through SingularShift below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    scale = np.linalg.norm(M, 2)
    threshold = A.shape[0] * ULP * scale
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) <= threshold:
        raise SingularShift(f"A + zI is singular at z = {z!r}")
    return lu, piv


def solve_shifted(A, z: complex, y) -> np.ndarray:
    """Return (A + zI)^{-1} y.

    ``y`` may be a vector or a matrix of right-hand sides.
    """
    A = as_cmatrix(A)
    rhs = np.asarray(y, dtype=complex)
    factors = lu_shifted(A, z)
    return scipy.linalg.lu_solve(factors, rhs, check_finite=False)


def resolvent(A, z: complex) -> np.ndarray:
    """Explicit (A + zI)^{-1}."""
    A = as_cmatrix(A)
    return solve_shifted(A, z, np.eye(A.shape[0], dtype=complex))


def op_norm(A) -> float:
    """Spectral norm (largest singular value)."""
    M = np.atleast_2d(np.asarray(A, dtype=complex))
    if M.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(M, check_finite=False)[0])


def batched_resolvent_norms(A, zs) -> np.ndarray:
    """||(A + z I)^{-1}|| for an array of shifts, via smallest singular values.

    Returns ``inf`` where the shifted matrix is exactly singular.
    """
    A = as_cmatrix(A)
    zs = np.asarray(zs, dtype=complex).ravel()
    n = A.shape[0]
    stack = A[None, :, :] + zs[:, None, None] * np.eye(n)[None, :, :]
    smin = np.linalg.svd(stack, compute_uv=False)[:, -1]
    with np.errstate(divide="ignore"):
        return np.where(smin > 0, 1.0 / smin, np.inf)


@dataclass(frozen=True)
class EigOracle:
    """Eigendecomposition A = V diag(lam) V^{-1} of a diagonalizable matrix."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    inverse_vectors: np.ndarray
    condition: float

    def apply(self, f) -> np.ndarray:
        """f(A) = V diag(f(lam)) V^{-1} for a scalar function f."""
        vals = np.asarray(f(self.eigenvalues), dtype=complex)
        return (self.vectors * vals[None, :]) @ self.inverse_vectors

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda lam: lam)


def eig_decompose(A, cond_cap: float = EIG_COND_CAP) -> EigOracle:
    A = as_cmatrix(A)
    lam, V = np.linalg.eig(A)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > cond_cap:
        raise NotDiagonalizable(f"eigenvector condition {cond:.3g} exceeds cap {cond_cap:.3g}")
    Vinv = np.linalg.inv(V)
    return EigOracle(lam, V, Vinv, cond)


def expm_oracle(A, t: complex) -> np.ndarray:
    """e^{-tA}: eigendecomposition when well conditioned, else scaling and squaring."""
    A = as_cmatrix(A)
    if t == 0:
        return np.eye(A.shape[0], dtype=complex)
    try:
        oracle = eig_decompose(A, cond_cap=1e4)
    except NotDiagonalizable:
        return scipy.linalg.expm(-t * A)
    return oracle.apply(lambda lam: np.exp(-t * lam))


def eigenvalues(A) -> np.ndarray:
    return np.linalg.eigvals(as_cmatrix(A))


def min_abs_eigenvalue(A) -> float:
    return float(np.min(np.abs(eigenvalues(A))))


def shifted_stack(A, zs) -> np.ndarray:
    """Stack of A + z_k I, shape (len(zs), n, n)."""
    A = as_cmatrix(A)
    zs = np.asarray(zs, dtype=complex).ravel()
    return A[None, :, :] + zs[:, None, None] * np.eye(A.shape[0])[None, :, :]


def batched_solve(A, zs, Y, stacked: bool = False) -> np.ndarray:
    """(A + z_k I)^{-1} Y for every shift z_k, by batched LU.

    ``Y`` is a vector or matrix shared by all shifts, or with ``stacked=True``
    an array whose leading axis runs over the shifts.
    """
    stack = shifted_stack(A, zs)
    k = stack.shape[0]
    Y = np.asarray(Y, dtype=complex)
    if not stacked:
        Y = np.broadcast_to(Y[None], (k,) + Y.shape)
    try:
        if Y.ndim == 2:
            out = np.linalg.solve(stack, Y[:, :, None])[..., 0]
        else:
            out = np.linalg.solve(stack, Y)
    except np.linalg.LinAlgError as exc:
        raise SingularShift("a shifted matrix in the batch is singular") from exc
    if not np.all(np.isfinite(out)):
        raise SingularShift("a shifted matrix in the batch is singular")
    return out



def batched_resolvent(A, zs) -> np.ndarray:
    A = as_cmatrix(A)
    return batched_solve(A, zs, np.eye(A.shape[0], dtype=complex))


def batched_op_norms(stack) -> np.ndarray:
    """Spectral norms of a stack of matrices."""
    return np.linalg.norm(np.asarray(stack), ord=2, axis=(-2, -1))
