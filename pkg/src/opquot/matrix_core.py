"""
Dense complex linear algebra used by every other module.

Matrices are plain ``numpy.ndarray`` values of dtype complex128. The functions
here wrap LAPACK (through numpy) and enforce the residual contracts the rest of
the package relies on, so callers never have to re-check an eigen- or singular
decomposition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ContractViolation, SolverConvergenceError

log = logging.getLogger(__name__)

# Relative cutoff below which a singular value counts as zero.
RANK_CUTOFF = 1e-9


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex128 array (copying only when needed)."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise ContractViolation(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def frozen(m) -> np.ndarray:
    """Return a read-only complex copy of ``m``."""
    arr = np.array(m, dtype=np.complex128, copy=True)
    arr.flags.writeable = False
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def max_abs(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    """
    Check the Hermitian flag contract ``‖M − M*‖_max ≤ tol · max(1, ‖M‖_max)``.

    Args:
        m (np.ndarray): Square matrix.
        tol (float): Relative tolerance.

    Returns:
        bool: True if ``m`` is square and Hermitian within tolerance.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return max_abs(m - dagger(m)) <= tol * max(1.0, max_abs(m))


def hermitian_part(m: np.ndarray) -> np.ndarray:
    """``(M + M*)/2``; exactly Hermitian in floating point."""
    m = np.asarray(m)
    return 0.5 * (m + dagger(m))


@dataclass(frozen=True)
class SingularDecomposition:
    """
    Thin singular value decomposition ``M = left · diag(values) · right*``.

    ``left`` and ``right`` hold orthonormal columns; ``values`` is nonincreasing.
    """
    left: np.ndarray
    values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.values) @ dagger(self.right)

    def rank(self, tol: float = RANK_CUTOFF) -> int:
        """Number of singular values above ``tol · σ₁`` (0 for the zero matrix)."""
        if self.values.size == 0 or self.values[0] <= 0.0:
            return 0
        return int(np.count_nonzero(self.values > tol * self.values[0]))


def hermitian_eig(m, tol: float = 1e-12, residual_tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decompose a Hermitian matrix.

    Args:
        m: Square Hermitian matrix.
        tol (float): Relative Hermitian tolerance for the precondition.
        residual_tol (float): Bound on ``‖Mv − λv‖ / max(1, |λ|max)`` per pair.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Eigenvalues (nonincreasing) and eigenvectors
        as orthonormal columns in the same order.

    Raises:
        ContractViolation: If ``m`` is not square or not Hermitian.
        SolverConvergenceError: If LAPACK fails or the residual contract is broken.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ContractViolation(f"hermitian_eig needs a square matrix, got {m.shape}")
    if not is_hermitian(m, tol):
        raise ContractViolation("hermitian_eig needs a Hermitian matrix")
    if m.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=np.complex128)
    try:
        w, v = np.linalg.eigh(hermitian_part(m))
    except np.linalg.LinAlgError as e:
        raise SolverConvergenceError(f"eigh failed: {e}") from e
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    scale = max(1.0, float(np.max(np.abs(w))))
    residual = float(np.max(np.linalg.norm(m @ v - v * w, axis=0))) / scale
    if residual > residual_tol:
        raise SolverConvergenceError("eigen residual above contract", residual=residual)
    return w, v


def svd(m, residual_tol: float = 1e-10) -> SingularDecomposition:
    """
    Thin SVD with a reconstruction check.

    Args:
        m: Any rectangular matrix.
        residual_tol (float): Bound on ``‖M − UΣV*‖ / max(1, σ₁)``.

    Returns:
        SingularDecomposition: The factors.

    Raises:
        SolverConvergenceError: If LAPACK fails or the reconstruction residual is too large.
    """
    m = as_matrix(m)
    if m.size == 0:
        return SingularDecomposition(
            left=np.zeros((m.shape[0], 0), dtype=np.complex128),
            values=np.zeros(0),
            right=np.zeros((m.shape[1], 0), dtype=np.complex128),
        )
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise SolverConvergenceError(f"svd did not converge: {e}") from e
    out = SingularDecomposition(left=u, values=s, right=dagger(vh))
    scale = max(1.0, float(s[0]))
    residual = float(np.linalg.norm(m - out.reconstruct(), 2)) / scale
    if residual > residual_tol:
        raise SolverConvergenceError("svd reconstruction residual above contract", residual=residual)
    return out


def spectral_norm(m) -> float:
    """Largest singular value (0 for empty matrices)."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def trace_norm(m) -> float:
    """Sum of singular values (the dual of the spectral norm under ``tr(T·M)``)."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def orthonormalize(vectors: Sequence[np.ndarray], tol: float = RANK_CUTOFF, dim: int = 0) -> np.ndarray:
    """
    Orthonormal basis (as columns) of the span of ``vectors``.

    Args:
        vectors (Sequence[np.ndarray]): Vectors of one common dimension.
        tol (float): Relative rank cutoff against the largest singular value.
        dim (int): Ambient dimension, used only when ``vectors`` is empty.

    Returns:
        np.ndarray: Matrix of shape (dim, rank) with orthonormal columns.

    Raises:
        ContractViolation: If the vectors have different dimensions.
    """
    vecs = [np.asarray(v, dtype=np.complex128).ravel() for v in vectors]
    if not vecs:
        return np.zeros((dim, 0), dtype=np.complex128)
    sizes = {v.size for v in vecs}
    if len(sizes) != 1:
        raise ContractViolation(f"vectors have mixed dimensions {sorted(sizes)}")
    stacked = np.column_stack(vecs)
    dec = svd(stacked)
    r = dec.rank(tol)
    return dec.left[:, :r].copy()


def projection(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the column span of an orthonormal ``basis``."""
    return hermitian_part(basis @ dagger(basis))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian matrix with unit-variance entries."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
