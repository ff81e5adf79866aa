from abc import ABC, abstractmethod
from typing import Any, Dict, List, Sequence

import numpy as np

from .algebra import AlgebraElement, AlgebraShape, AmplifiedElement, Subspace
from .config import Tolerances
from .gns import homomorphism_residual
from .matrix_core import dagger, hermitian_eig, hermitian_part, max_abs, spectral_norm
from .report import CheckResult


class RealizationBase(ABC):
    """
    Abstract base class for concrete realizations of a quotient ``A/V``.

    A realization is a representation ``π`` of ``A`` on a finite-dimensional
    Hilbert space together with a linear map ``A → L(H)`` built from it and
    some fixed operators. Subclasses supply the representation, the map and
    their own structural identities; the shared checks (vanishing on ``V``,
    complete contractivity, ``*``-map property) are implemented here on top.
    """

    KIND = ""

    def __init__(self, shape: AlgebraShape) -> None:
        self.shape = shape

    @abstractmethod
    def represent(self, a: AlgebraElement) -> np.ndarray:
        """``π(a)`` on ``H``."""
        pass

    @abstractmethod
    def apply(self, a: AlgebraElement) -> np.ndarray:
        """The realization map at level one."""
        pass

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of ``H``."""
        pass

    @abstractmethod
    def matrices(self) -> Dict[str, np.ndarray]:
        """Named operators that define the realization (for persistence)."""
        pass

    @abstractmethod
    def structural_checks(self, v: Subspace, tol: Tolerances, rng: np.random.Generator) -> List[CheckResult]:
        """Kind-specific operator identities."""
        pass

    # Shared behaviour with default implementations
    @property
    def is_star_map(self) -> bool:
        return True

    def apply_amplified(self, c: AmplifiedElement) -> np.ndarray:
        """
        ``{map(C_jk)}`` assembled on ``H^{⊕n}``.

        Args:
            c (AmplifiedElement): Element of ``M_n(A)``.

        Returns:
            np.ndarray: The amplified image.
        """
        n, h = c.level, self.dim
        out = np.zeros((n * h, n * h), dtype=np.complex128)
        for j in range(n):
            for k in range(n):
                out[j * h:(j + 1) * h, k * h:(k + 1) * h] = self.apply(c.entry(j, k))
        return out

    def norm_of(self, c: AmplifiedElement) -> float:
        """``‖map_n(C)‖``."""
        return spectral_norm(self.apply_amplified(c))

    def vanishing_residual(self, v: Subspace) -> float:
        """Largest ``‖map(D)‖ / max(1, ‖D‖)`` over the basis of ``V``."""
        return max((spectral_norm(self.apply(d)) / max(1.0, d.norm()) for d in v.basis), default=0.0)

    def star_map_residual(self) -> float:
        """Largest ``‖map(e*) − map(e)*‖`` over the matrix-unit basis of ``A``."""
        return max(max_abs(self.apply(e.adjoint()) - dagger(self.apply(e))) for e in self.shape.basis())

    def contractivity_excess(self, rng: np.random.Generator, levels: Sequence[int] = (1, 2, 3),
                             trials: int = 2) -> float:
        """Largest ``‖map_n(C)‖ − ‖C‖`` over random ``C`` at the given levels."""
        worst = -np.inf
        for n in levels:
            for _ in range(trials):
                c = AmplifiedElement.random(self.shape, n, rng)
                worst = max(worst, self.norm_of(c) - c.norm())
        return float(worst)

    def representation_residual(self) -> float:
        return homomorphism_residual(self.represent, self.shape, self.dim)

    def common_checks(self, v: Subspace, tol: Tolerances, rng: np.random.Generator) -> List[CheckResult]:
        checks = [
            CheckResult.from_residual("representation.homomorphism", self.representation_residual(), tol.star_map),
            CheckResult.from_residual("map.contractivity", max(0.0, self.contractivity_excess(rng)), tol.contractivity),
        ]
        if self.is_star_map:
            checks.append(CheckResult.from_residual("map.star", self.star_map_residual(), tol.star_map))
        return checks

    def probe_checks(self, probes: Any, tol: Tolerances) -> List[CheckResult]:
        """Extra probe-level checks; none by default."""
        return []

    def summary(self) -> Dict[str, Any]:
        return {"kind": self.KIND, "dim_H": self.dim}


def choi_min_eigenvalue(phi, shape: AlgebraShape) -> float:
    """
    Smallest Choi eigenvalue of ``phi`` over the blocks of ``A``.

    ``phi`` is evaluated on the matrix units of each summand ``M_{d_i}``; the
    map is completely positive iff every block Choi matrix is positive.

    Args:
        phi: Callable ``AlgebraElement → np.ndarray``.
        shape (AlgebraShape): The algebra.

    Returns:
        float: Minimum over blocks of the least eigenvalue.
    """
    worst = np.inf
    for i, d in enumerate(shape.block_dims):
        rows = []
        for p in range(d):
            rows.append([phi(AlgebraElement.matrix_unit(shape, i, p, q)) for q in range(d)])
        choi = np.block(rows)
        if choi.size == 0:
            continue
        w, _ = hermitian_eig(hermitian_part(choi), tol=1e-9)
        worst = min(worst, float(w[-1]))
    return 0.0 if worst == np.inf else worst
