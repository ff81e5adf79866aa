"""
Representations from annihilating functionals.

A functional ``ψ(C) = Σ_i tr(T_i C_i)`` of norm one on ``M_n(A)`` is realised as
``ψ(C) = ⟨π_n(C)ξ, η⟩`` with ``π(a) = ⊕_i a_i ⊗ I_{m_i}``. Vectors of the
representation space are stored per block as ``d_i × m_i`` slot matrices
(``π(a)`` acts by left multiplication with ``a_i``) and flattened row-major,
block after block, which is the index order of ``kron(a_i, I_{m_i})``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .algebra import AlgebraElement, AlgebraShape, AmplifiedElement, Subspace, amplified_basis
from .errors import CertificateError, ContractViolation, ShapeMismatchError
from .matrix_core import (RANK_CUTOFF, dagger, frozen, hermitian_part, is_hermitian, max_abs,
                          orthonormalize, projection, spectral_norm, svd)
from .quotient import Functional

log = logging.getLogger(__name__)


def homomorphism_residual(represent: Callable[[AlgebraElement], np.ndarray], shape: AlgebraShape,
                          dim: int) -> float:
    """Largest violation of multiplicativity, adjoint compatibility and ``π(1) = I`` on basis pairs."""
    basis = shape.basis()
    images = [represent(e) for e in basis]
    worst = max_abs(represent(AlgebraElement.unit(shape)) - np.eye(dim))
    for e, pe in zip(basis, images):
        worst = max(worst, max_abs(represent(e.adjoint()) - dagger(pe)))
        for f, pf in zip(basis, images):
            worst = max(worst, max_abs(represent(e @ f) - pe @ pf))
    return worst


@dataclass(frozen=True, eq=False)
class RepresentationData:
    """
    The representation ``π(a) = ⊕_i a_i ⊗ I_{m_i}`` of ``A``.

    Args:
        shape (AlgebraShape): The algebra.
        multiplicities (Tuple[int, ...]): ``m_i ≥ 0`` per block.
        frame (Optional[np.ndarray]): Isometry onto a reducing subspace; when set,
            ``π`` is compressed to its range.
    """
    shape: AlgebraShape
    multiplicities: Tuple[int, ...]
    frame: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        mults = tuple(int(m) for m in self.multiplicities)
        if len(mults) != self.shape.num_blocks or any(m < 0 for m in mults):
            raise ContractViolation(f"bad multiplicities {mults} for blocks {self.shape.block_dims}")
        object.__setattr__(self, "multiplicities", mults)
        if self.frame is not None:
            f = frozen(self.frame)
            if f.shape[0] != self.raw_dim or f.shape[1] > f.shape[0]:
                raise ShapeMismatchError(f"frame of shape {f.shape} for a space of dimension {self.raw_dim}")
            object.__setattr__(self, "frame", f)

    @property
    def raw_dim(self) -> int:
        return sum(d * m for d, m in zip(self.shape.block_dims, self.multiplicities))

    @property
    def dim(self) -> int:
        """Dimension of the Hilbert space ``H``."""
        return self.raw_dim if self.frame is None else self.frame.shape[1]

    def represent(self, a: AlgebraElement) -> np.ndarray:
        if a.shape != self.shape:
            raise ShapeMismatchError("element of another algebra")
        parts = [np.kron(b, np.eye(m)) for b, m in zip(a.blocks, self.multiplicities) if m > 0]
        raw = scipy.linalg.block_diag(*parts) if parts else np.zeros((0, 0), dtype=np.complex128)
        if self.frame is None:
            return raw
        return dagger(self.frame) @ raw @ self.frame

    def represent_amplified(self, c: AmplifiedElement) -> np.ndarray:
        """``π_n(C) = {π(C_jk)}`` on ``H^{⊕n}``."""
        n, h = c.level, self.dim
        out = np.zeros((n * h, n * h), dtype=np.complex128)
        for j in range(n):
            for k in range(n):
                out[j * h:(j + 1) * h, k * h:(k + 1) * h] = self.represent(c.entry(j, k))
        return out

    def homomorphism_residual(self) -> float:
        return homomorphism_residual(self.represent, self.shape, self.dim)

    def slots_to_vector(self, slots: Sequence[np.ndarray]) -> np.ndarray:
        """Flatten per-block ``d_i × m_i`` slot matrices into a vector of ``H``."""
        if self.frame is not None:
            raise ContractViolation("slot layout is only defined without a frame")
        parts = [np.asarray(s, dtype=np.complex128).ravel() for s, m in zip(slots, self.multiplicities) if m > 0]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.complex128)


def direct_sum(reps: Sequence[RepresentationData]) -> Tuple[RepresentationData, List[np.ndarray]]:
    """
    Direct sum of frameless representations.

    Returns:
        Tuple[RepresentationData, List[np.ndarray]]: The sum (multiplicities added
        blockwise) and, per summand, the isometry ``J_k`` with ``π(a)J_k = J_k π_k(a)``.
    """
    if not reps:
        raise ContractViolation("direct sum of no representations")
    shape = reps[0].shape
    if any(r.shape != shape or r.frame is not None for r in reps):
        raise ContractViolation("direct sum needs frameless representations of one algebra")
    totals = [sum(r.multiplicities[i] for r in reps) for i in range(shape.num_blocks)]
    out = RepresentationData(shape, tuple(totals))
    embeddings = []
    slot_offsets = [0] * shape.num_blocks
    for r in reps:
        j = np.zeros((out.raw_dim, r.raw_dim))
        src, dst_block = 0, 0
        for i, d in enumerate(shape.block_dims):
            m, big_m = r.multiplicities[i], totals[i]
            for p in range(d):
                for s in range(m):
                    j[dst_block + p * big_m + slot_offsets[i] + s, src + p * m + s] = 1.0
            src += d * m
            dst_block += d * big_m
            slot_offsets[i] += m
        embeddings.append(j)
    return out, embeddings


@dataclass(frozen=True, eq=False)
class GnsData:
    """
    Output of the GNS step for one functional at level ``n``.

    ``xi`` and ``eta`` have shape ``(n, dim H)``; row ``k`` is ``ξ_k``.
    ``P`` and ``Q`` project onto the spans of the rows of ``xi`` and ``eta``.
    """
    rep: RepresentationData
    xi: np.ndarray
    eta: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    functional: Functional

    @property
    def level(self) -> int:
        return self.xi.shape[0]

    def invariant_residuals(self, v: Subspace) -> dict:
        n = self.level
        return {
            "xi_norm": abs(float(np.linalg.norm(self.xi)) - 1.0),
            "eta_norm": abs(float(np.linalg.norm(self.eta)) - 1.0),
            "rank_P_excess": max(0, svd(self.P).rank() - n),
            "rank_Q_excess": max(0, svd(self.Q).rank() - n),
            "P_idempotent": max_abs(self.P @ self.P - self.P) if self.P.size else 0.0,
            "Q_idempotent": max_abs(self.Q @ self.Q - self.Q) if self.Q.size else 0.0,
            "P_fixes_xi": max_abs(self.xi @ self.P.T - self.xi),
            "Q_fixes_eta": max_abs(self.eta @ self.Q.T - self.eta),
            "annihilation": annihilation_residual(self.rep, self.P, self.Q, v),
        }


def represent_functional(psi: Functional, norm_tol: float = 1e-6,
                         rank_cutoff: float = RANK_CUTOFF) -> Tuple[RepresentationData, np.ndarray, np.ndarray]:
    """
    Factor ``ψ`` through a representation of ``A``.

    Args:
        psi (Functional): Norm-one functional on ``M_n(A)``.
        norm_tol (float): Allowed deviation of ``‖ψ‖`` from 1.
        rank_cutoff (float): Singular values below ``rank_cutoff·σ_max`` contribute no slot.

    Returns:
        Tuple[RepresentationData, np.ndarray, np.ndarray]: ``(rep, xi, eta)`` with
        ``ψ(C) = ⟨π_n(C)ξ, η⟩``.

    Raises:
        CertificateError: If ``‖ψ‖`` is not 1 within ``norm_tol``.
    """
    nrm = psi.norm()
    if abs(nrm - 1.0) > norm_tol:
        raise CertificateError(f"functional norm {nrm:.9f} is not 1")
    n = psi.level
    decs = [svd(t) for t in psi.blocks]
    top = max((dec.values[0] for dec in decs if dec.values.size), default=0.0)
    mults = [int(np.count_nonzero(dec.values > rank_cutoff * top)) for dec in decs]
    rep = RepresentationData(psi.shape, tuple(mults))

    xi_rows, eta_rows = [], []
    for k in range(n):
        xi_slots, eta_slots = [], []
        for dec, d, m in zip(decs, psi.shape.block_dims, mults):
            root = np.sqrt(dec.values[:m])
            # ψ(C) = Σ σ_s v_s* C_i u_s with u = left, v = right singular vectors
            xi_slots.append(dec.left[k * d:(k + 1) * d, :m] * root)
            eta_slots.append(dec.right[k * d:(k + 1) * d, :m] * root)
        xi_rows.append(rep.slots_to_vector(xi_slots))
        eta_rows.append(rep.slots_to_vector(eta_slots))
    log.debug(f"GNS multiplicities {mults} (dim H = {rep.dim}) at level {n}")
    return rep, np.array(xi_rows).reshape(n, rep.dim), np.array(eta_rows).reshape(n, rep.dim)


def span_projection(rows: np.ndarray, rank_cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Projection onto the span of the nonzero rows; zero rows are dropped first."""
    dim = rows.shape[1]
    scale = max((float(np.linalg.norm(r)) for r in rows), default=0.0)
    kept = [r for r in rows if float(np.linalg.norm(r)) > rank_cutoff * scale]
    return projection(orthonormalize(kept, tol=rank_cutoff, dim=dim))


def annihilation_residual(rep: RepresentationData, p: np.ndarray, q: np.ndarray, v: Subspace) -> float:
    """``max ‖Qπ(D)P‖`` over the basis of ``V``, relative to ``max(1, ‖D‖)``."""
    worst = 0.0
    for d in v.basis:
        worst = max(worst, spectral_norm(q @ rep.represent(d) @ p) / max(1.0, d.norm()))
    return worst


def build_projections(rep: RepresentationData, xi: np.ndarray, eta: np.ndarray, psi: Functional,
                      v: Subspace, annihilation_tol: float = 1e-8,
                      rank_cutoff: float = RANK_CUTOFF) -> GnsData:
    """
    Form ``P`` and ``Q`` from the components of ``ξ`` and ``η`` and check ``Qπ(V)P = 0``.

    Raises:
        CertificateError: If the annihilation residual exceeds ``annihilation_tol``.
    """
    p = hermitian_part(span_projection(xi, rank_cutoff))
    q = hermitian_part(span_projection(eta, rank_cutoff))
    residual = annihilation_residual(rep, p, q, v)
    if residual > annihilation_tol:
        raise CertificateError(f"Qπ(D)P residual {residual:.3e} on V (certificate fault upstream)")
    return GnsData(rep=rep, xi=xi, eta=eta, P=p, Q=q, functional=psi)


def gns_from_functional(psi: Functional, v: Subspace, norm_tol: float = 1e-6,
                        annihilation_tol: float = 1e-8, rank_cutoff: float = RANK_CUTOFF) -> GnsData:
    rep, xi, eta = represent_functional(psi, norm_tol, rank_cutoff)
    return build_projections(rep, xi, eta, psi, v, annihilation_tol, rank_cutoff)


def compress(data: GnsData, a: AlgebraElement) -> np.ndarray:
    """``Ψ(A) = Qπ(A)P``."""
    return data.Q @ data.rep.represent(a) @ data.P


def compress_amplified(data: GnsData, c: AmplifiedElement) -> np.ndarray:
    """``Ψ_n(C) = (I_n ⊗ Q) π_n(C) (I_n ⊗ P)`` at the level of ``c``."""
    n = c.level
    return np.kron(np.eye(n), data.Q) @ data.rep.represent_amplified(c) @ np.kron(np.eye(n), data.P)


def pairing(data: GnsData, c: AmplifiedElement) -> complex:
    """``⟨Ψ_n(C)ξ, η⟩`` with ``ξ, η`` flattened to ``H^{⊕n}``."""
    return complex(np.vdot(data.eta.ravel(), compress_amplified(data, c) @ data.xi.ravel()))


def reconstruction_residual(data: GnsData) -> float:
    """``max |ψ(E) − ⟨Ψ_n(E)ξ, η⟩|`` over the matrix-unit basis of ``M_n(A)``."""
    psi = data.functional
    return max(abs(psi(e) - pairing(data, e)) for e in amplified_basis(psi.shape, psi.level))


def is_projection(m: np.ndarray, tol: float = 1e-10) -> bool:
    return is_hermitian(m, tol) and (m.size == 0 or max_abs(m @ m - m) <= tol)
