"""
Finite-dimensional C*-algebras ``A = M_{d1} ⊕ … ⊕ M_{dm}``, their subspaces and
matrix amplifications ``M_n(A)``.

Elements are stored blockwise. An amplified element ``C = {C_jk} ∈ M_n(A)`` is
stored as one assembled ``(n·d_i) × (n·d_i)`` matrix per block: entry ``(j, k)``
of block ``i`` occupies rows ``[j·d_i, (j+1)·d_i)`` and columns
``[k·d_i, (k+1)·d_i)``. The C*-norm of ``M_n(A)`` is then the largest spectral
norm over the assembled blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from numbers import Number
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolation, ShapeMismatchError
from .matrix_core import dagger, frozen, random_matrix, spectral_norm, svd, RANK_CUTOFF

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlgebraShape:
    """Block sizes ``(d1, …, dm)`` of ``M_{d1} ⊕ … ⊕ M_{dm}``."""
    block_dims: Tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.block_dims)
        if not dims:
            raise ContractViolation("an algebra needs at least one block")
        if any(d < 1 for d in dims):
            raise ContractViolation(f"block sizes must be positive, got {dims}")
        object.__setattr__(self, "block_dims", dims)

    @property
    def num_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def dimension(self) -> int:
        """Complex dimension ``Σ d_i²``."""
        return sum(d * d for d in self.block_dims)

    def basis(self) -> List["AlgebraElement"]:
        """Matrix units ``e^{(i)}_{pq}`` ordered by block, then row, then column."""
        return [AlgebraElement.matrix_unit(self, i, p, q)
                for i, d in enumerate(self.block_dims)
                for p in range(d) for q in range(d)]


def _check_same(a_shape: AlgebraShape, b_shape: AlgebraShape) -> None:
    if a_shape != b_shape:
        raise ShapeMismatchError(f"shape mismatch: {a_shape.block_dims} vs {b_shape.block_dims}")


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """An element of ``A``, one ``d_i × d_i`` complex matrix per block."""
    shape: AlgebraShape
    blocks: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        blocks = tuple(frozen(b) for b in self.blocks)
        if len(blocks) != self.shape.num_blocks:
            raise ShapeMismatchError(
                f"expected {self.shape.num_blocks} blocks, got {len(blocks)}")
        for i, (b, d) in enumerate(zip(blocks, self.shape.block_dims)):
            if b.shape != (d, d):
                raise ShapeMismatchError(f"block {i} has shape {b.shape}, expected {(d, d)}")
        object.__setattr__(self, "blocks", blocks)

    # ------------------ constructors ------------------
    @classmethod
    def zeros(cls, shape: AlgebraShape) -> "AlgebraElement":
        return cls(shape, tuple(np.zeros((d, d)) for d in shape.block_dims))

    @classmethod
    def unit(cls, shape: AlgebraShape) -> "AlgebraElement":
        return cls(shape, tuple(np.eye(d) for d in shape.block_dims))

    @classmethod
    def matrix_unit(cls, shape: AlgebraShape, block: int, p: int, q: int) -> "AlgebraElement":
        blocks = [np.zeros((d, d)) for d in shape.block_dims]
        blocks[block][p, q] = 1.0
        return cls(shape, tuple(blocks))

    @classmethod
    def random(cls, shape: AlgebraShape, rng: np.random.Generator,
               hermitian: bool = False) -> "AlgebraElement":
        blocks = []
        for d in shape.block_dims:
            m = random_matrix(d, d, rng)
            blocks.append(0.5 * (m + dagger(m)) if hermitian else m)
        return cls(shape, tuple(blocks))

    @classmethod
    def from_vector(cls, shape: AlgebraShape, vec: np.ndarray) -> "AlgebraElement":
        vec = np.asarray(vec, dtype=np.complex128).ravel()
        if vec.size != shape.dimension:
            raise ShapeMismatchError(f"vector of length {vec.size} for algebra of dimension {shape.dimension}")
        blocks, start = [], 0
        for d in shape.block_dims:
            blocks.append(vec[start:start + d * d].reshape(d, d))
            start += d * d
        return cls(shape, tuple(blocks))

    # ------------------ algebra ------------------
    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.shape, tuple(dagger(b) for b in self.blocks))

    def norm(self) -> float:
        """C*-norm: the largest block spectral norm."""
        return max(spectral_norm(b) for b in self.blocks)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        _check_same(self.shape, other.shape)
        return AlgebraElement(self.shape, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        _check_same(self.shape, other.shape)
        return AlgebraElement(self.shape, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.shape, tuple(-b for b in self.blocks))

    def __mul__(self, scalar: Number) -> "AlgebraElement":
        if not isinstance(scalar, Number):
            return NotImplemented
        return AlgebraElement(self.shape, tuple(complex(scalar) * b for b in self.blocks))

    __rmul__ = __mul__

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        return multiply(self, other)


def multiply(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Blockwise matrix product."""
    _check_same(a.shape, b.shape)
    return AlgebraElement(a.shape, tuple(x @ y for x, y in zip(a.blocks, b.blocks)))


def adjoint(a: AlgebraElement) -> AlgebraElement:
    return a.adjoint()


def unit(shape: AlgebraShape) -> AlgebraElement:
    return AlgebraElement.unit(shape)


@dataclass(frozen=True, eq=False)
class AmplifiedElement:
    """
    An element of ``M_n(A)`` stored as assembled blocks (see module docstring).

    Args:
        shape (AlgebraShape): The algebra ``A``.
        level (int): Matrix level ``n ≥ 1``.
        blocks (Tuple[np.ndarray, ...]): One ``(n·d_i) × (n·d_i)`` matrix per block.
    """
    shape: AlgebraShape
    level: int
    blocks: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if int(self.level) < 1:
            raise ContractViolation(f"matrix level must be >= 1, got {self.level}")
        blocks = tuple(frozen(b) for b in self.blocks)
        if len(blocks) != self.shape.num_blocks:
            raise ShapeMismatchError(f"expected {self.shape.num_blocks} blocks, got {len(blocks)}")
        for i, (b, d) in enumerate(zip(blocks, self.shape.block_dims)):
            size = self.level * d
            if b.shape != (size, size):
                raise ShapeMismatchError(f"block {i} has shape {b.shape}, expected {(size, size)}")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "blocks", blocks)

    # ------------------ constructors ------------------
    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[AlgebraElement]]) -> "AmplifiedElement":
        n = len(entries)
        if n == 0 or any(len(row) != n for row in entries):
            raise ContractViolation("entries must form a non-empty square array")
        shape = entries[0][0].shape
        blocks = []
        for i, d in enumerate(shape.block_dims):
            big = np.zeros((n * d, n * d), dtype=np.complex128)
            for j in range(n):
                for k in range(n):
                    _check_same(shape, entries[j][k].shape)
                    big[j * d:(j + 1) * d, k * d:(k + 1) * d] = entries[j][k].blocks[i]
            blocks.append(big)
        return cls(shape, n, tuple(blocks))

    @classmethod
    def from_element(cls, a: AlgebraElement) -> "AmplifiedElement":
        return cls(a.shape, 1, a.blocks)

    @classmethod
    def embed(cls, a: AlgebraElement, level: int, p: int, q: int) -> "AmplifiedElement":
        """``a ⊗ E_pq`` in ``M_level(A)``."""
        blocks = []
        for b, d in zip(a.blocks, a.shape.block_dims):
            big = np.zeros((level * d, level * d), dtype=np.complex128)
            big[p * d:(p + 1) * d, q * d:(q + 1) * d] = b
            blocks.append(big)
        return cls(a.shape, level, tuple(blocks))

    @classmethod
    def zeros(cls, shape: AlgebraShape, level: int) -> "AmplifiedElement":
        return cls(shape, level, tuple(np.zeros((level * d, level * d)) for d in shape.block_dims))

    @classmethod
    def random(cls, shape: AlgebraShape, level: int, rng: np.random.Generator,
               hermitian: bool = False) -> "AmplifiedElement":
        blocks = []
        for d in shape.block_dims:
            m = random_matrix(level * d, level * d, rng)
            blocks.append(0.5 * (m + dagger(m)) if hermitian else m)
        return cls(shape, level, tuple(blocks))

    @classmethod
    def from_vector(cls, shape: AlgebraShape, level: int, vec: np.ndarray) -> "AmplifiedElement":
        vec = np.asarray(vec, dtype=np.complex128).ravel()
        blocks, start = [], 0
        for d in shape.block_dims:
            size = level * d
            blocks.append(vec[start:start + size * size].reshape(size, size))
            start += size * size
        if start != vec.size:
            raise ShapeMismatchError(f"vector of length {vec.size} does not match M_{level} of {shape.block_dims}")
        return cls(shape, level, tuple(blocks))

    # ------------------ access ------------------
    def entry(self, j: int, k: int) -> AlgebraElement:
        return AlgebraElement(self.shape, tuple(
            b[j * d:(j + 1) * d, k * d:(k + 1) * d]
            for b, d in zip(self.blocks, self.shape.block_dims)))

    @property
    def entries(self) -> Tuple[Tuple[AlgebraElement, ...], ...]:
        return tuple(tuple(self.entry(j, k) for k in range(self.level)) for j in range(self.level))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    # ------------------ algebra ------------------
    def _check(self, other: "AmplifiedElement") -> None:
        _check_same(self.shape, other.shape)
        if self.level != other.level:
            raise ShapeMismatchError(f"level mismatch: {self.level} vs {other.level}")

    def adjoint(self) -> "AmplifiedElement":
        return AmplifiedElement(self.shape, self.level, tuple(dagger(b) for b in self.blocks))

    def norm(self) -> float:
        return cstar_norm(self)

    def __add__(self, other: "AmplifiedElement") -> "AmplifiedElement":
        self._check(other)
        return AmplifiedElement(self.shape, self.level, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "AmplifiedElement") -> "AmplifiedElement":
        self._check(other)
        return AmplifiedElement(self.shape, self.level, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self) -> "AmplifiedElement":
        return AmplifiedElement(self.shape, self.level, tuple(-b for b in self.blocks))

    def __mul__(self, scalar: Number) -> "AmplifiedElement":
        if not isinstance(scalar, Number):
            return NotImplemented
        return AmplifiedElement(self.shape, self.level, tuple(complex(scalar) * b for b in self.blocks))

    __rmul__ = __mul__

    def __matmul__(self, other: "AmplifiedElement") -> "AmplifiedElement":
        self._check(other)
        return AmplifiedElement(self.shape, self.level, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))


def cstar_norm(c: AmplifiedElement) -> float:
    """Norm of ``M_n(A)``: ``max_i ‖assembled block i‖``."""
    return max(spectral_norm(b) for b in c.blocks)


def _rank_of(vectors: List[np.ndarray], tol: float) -> int:
    if not vectors:
        return 0
    return svd(np.column_stack(vectors)).rank(tol)


@dataclass(frozen=True, eq=False)
class Subspace:
    """
    A subspace ``V ⊆ A`` given by a linearly independent basis, plus structural flags.

    Every flag set to True is verified at construction; a false claim raises
    :class:`ContractViolation`. ``is_subalgebra`` implies the other two flags.

    Args:
        shape (AlgebraShape): The ambient algebra.
        basis (Tuple[AlgebraElement, ...]): Linearly independent spanning elements.
        star_closed (bool): Claim ``V* = V``.
        contains_unit (bool): Claim ``1_A ∈ V``.
        is_subalgebra (bool): Claim ``V`` is a unital C*-subalgebra.
        tol (float): Relative tolerance for rank and membership decisions.
    """
    shape: AlgebraShape
    basis: Tuple[AlgebraElement, ...] = ()
    star_closed: bool = False
    contains_unit: bool = False
    is_subalgebra: bool = False
    tol: float = RANK_CUTOFF
    _frame: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        basis = tuple(self.basis)
        for b in basis:
            _check_same(self.shape, b.shape)
        object.__setattr__(self, "basis", basis)
        vectors = [b.to_vector() for b in basis]
        if _rank_of(vectors, self.tol) != len(vectors):
            raise ContractViolation("subspace basis is not linearly independent")
        if vectors:
            frame = svd(np.column_stack(vectors)).left[:, :len(vectors)].copy()
        else:
            frame = np.zeros((self.shape.dimension, 0), dtype=np.complex128)
        frame.flags.writeable = False
        object.__setattr__(self, "_frame", frame)

        if self.is_subalgebra:
            if not self._star_closure_holds() or not self.contains(AlgebraElement.unit(self.shape)):
                raise ContractViolation("a unital C*-subalgebra must be *-closed and contain the unit")
            for a in basis:
                for b in basis:
                    if not self.contains_product(a, b):
                        raise ContractViolation("subspace is not closed under multiplication")
            object.__setattr__(self, "star_closed", True)
            object.__setattr__(self, "contains_unit", True)
        if self.star_closed and not self._star_closure_holds():
            raise ContractViolation("subspace flagged star_closed is not closed under adjoints")
        if self.contains_unit and not self.contains(AlgebraElement.unit(self.shape)):
            raise ContractViolation("subspace flagged contains_unit does not contain 1_A")

    def _star_closure_holds(self) -> bool:
        return all(self.contains(b.adjoint()) for b in self.basis)

    # ------------------ queries ------------------
    @property
    def dim(self) -> int:
        return len(self.basis)

    def residual(self, a: AlgebraElement, scale: float = 0.0) -> float:
        """
        Least-squares residual of ``a`` against the span, relative to ``max(‖a‖, scale)``.

        ``scale`` keeps round-off in an element that should vanish (a product of
        orthogonal pieces, say) from reading as a large relative residual.
        """
        x = a.to_vector()
        denom = max(float(np.linalg.norm(x)), scale)
        if denom == 0.0:
            return 0.0
        r = x - self._frame @ (dagger(self._frame) @ x)
        return float(np.linalg.norm(r)) / denom

    def contains(self, a: AlgebraElement, scale: float = 0.0) -> bool:
        return self.residual(a, scale) <= self.tol

    def contains_product(self, a: AlgebraElement, b: AlgebraElement) -> bool:
        """``ab ∈ V``, with the residual measured against ``‖a‖·‖b‖``."""
        return self.contains(a @ b, float(np.linalg.norm(a.to_vector()) * np.linalg.norm(b.to_vector())))

    def coefficients(self, a: AlgebraElement) -> np.ndarray:
        """Least-squares coefficients of ``a`` in the stored basis."""
        if not self.basis:
            return np.zeros(0, dtype=np.complex128)
        mat = np.column_stack([b.to_vector() for b in self.basis])
        coef, *_ = np.linalg.lstsq(mat, a.to_vector(), rcond=None)
        return coef

    def combine(self, coefficients: Sequence[complex]) -> AlgebraElement:
        out = AlgebraElement.zeros(self.shape)
        for c, b in zip(coefficients, self.basis):
            out = out + complex(c) * b
        return out

    def spans_algebra(self) -> bool:
        return self.dim == self.shape.dimension

    # ------------------ constructors ------------------
    @classmethod
    def detect(cls, shape: AlgebraShape, elements: Sequence[AlgebraElement],
               tol: float = RANK_CUTOFF) -> "Subspace":
        """
        Span of ``elements`` (dependent ones are dropped) with every flag decided.

        Args:
            shape (AlgebraShape): Ambient algebra.
            elements (Sequence[AlgebraElement]): Spanning set.
            tol (float): Relative tolerance.

        Returns:
            Subspace: With star_closed, contains_unit and is_subalgebra set to what holds.
        """
        kept: List[AlgebraElement] = []
        for e in elements:
            if _rank_of([k.to_vector() for k in kept + [e]], tol) == len(kept) + 1:
                kept.append(e)
        plain = cls(shape, tuple(kept), tol=tol)
        star = plain._star_closure_holds()
        has_unit = plain.contains(AlgebraElement.unit(shape))
        closed = all(plain.contains_product(a, b) for a in kept for b in kept)
        return cls(shape, tuple(kept), star_closed=star, contains_unit=has_unit,
                   is_subalgebra=star and has_unit and closed, tol=tol)

    @classmethod
    def zero(cls, shape: AlgebraShape) -> "Subspace":
        return cls(shape, (), star_closed=True)

    @classmethod
    def full(cls, shape: AlgebraShape) -> "Subspace":
        return cls(shape, tuple(shape.basis()), star_closed=True, contains_unit=True, is_subalgebra=True)

    @classmethod
    def scalars(cls, shape: AlgebraShape) -> "Subspace":
        """``span{1_A}``."""
        return cls(shape, (AlgebraElement.unit(shape),), star_closed=True, contains_unit=True,
                   is_subalgebra=True)

    @classmethod
    def diagonal(cls, shape: AlgebraShape) -> "Subspace":
        """Diagonal matrices in every block (a maximal abelian subalgebra)."""
        basis = tuple(AlgebraElement.matrix_unit(shape, i, p, p)
                      for i, d in enumerate(shape.block_dims) for p in range(d))
        return cls(shape, basis, star_closed=True, contains_unit=True, is_subalgebra=True)


def amplify_subspace(v: Subspace, n: int) -> List[AmplifiedElement]:
    """
    Basis ``{V_b ⊗ E_pq}`` of ``M_n(V)``, ordered by basis element, then ``p``, then ``q``.

    Args:
        v (Subspace): The subspace.
        n (int): Matrix level.

    Returns:
        List[AmplifiedElement]: ``n² · dim V`` elements.
    """
    if n < 1:
        raise ContractViolation(f"matrix level must be >= 1, got {n}")
    return [AmplifiedElement.embed(b, n, p, q) for b in v.basis for p in range(n) for q in range(n)]


def amplified_basis(shape: AlgebraShape, n: int) -> List[AmplifiedElement]:
    """A basis of all of ``M_n(A)`` (matrix units at every position)."""
    return [AmplifiedElement.embed(e, n, p, q) for e in shape.basis() for p in range(n) for q in range(n)]


def combine_amplified(elements: Sequence[AmplifiedElement], coefficients: Sequence[complex],
                      shape: Optional[AlgebraShape] = None, level: Optional[int] = None) -> AmplifiedElement:
    """``Σ c_b · W_b``; needs ``shape`` and ``level`` when ``elements`` is empty."""
    if not elements:
        if shape is None or level is None:
            raise ContractViolation("empty combination needs shape and level")
        return AmplifiedElement.zeros(shape, level)
    blocks = [np.zeros_like(b, dtype=np.complex128) for b in elements[0].blocks]
    for c, w in zip(coefficients, elements):
        for i, b in enumerate(w.blocks):
            blocks[i] = blocks[i] + complex(c) * b
    return AmplifiedElement(elements[0].shape, elements[0].level, tuple(blocks))
