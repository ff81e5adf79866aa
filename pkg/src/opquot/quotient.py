"""
Quotient norms ``‖C‖_{A/V} = inf{‖C − D‖ : D ∈ M_n(V)}`` with certificates.

The primal program (minimise the largest block spectral norm over the
coefficients of ``D``) is handed to cvxpy. The value reported is the exact
C*-norm of ``C − D*`` at the returned minimiser, so it is always an upper
bound. The certificate is a norm-one functional annihilating ``M_n(V)``;
``Re ψ(C)`` is a lower bound, and the difference of the two is the duality
gap carried by :class:`CertifiedNorm`.

Functionals on ``M_n(A)`` are stored by trace duality: one matrix ``T_i`` per
block acting as ``ψ(C) = Σ_i tr(T_i · C_i)`` on the assembled blocks, with
norm ``Σ_i ‖T_i‖_trace``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
import scipy.linalg
from scipy.optimize import linprog

# Handle both package import and direct execution
try:
    # When imported as a package
    from .algebra import (AlgebraShape, AmplifiedElement, Subspace, amplify_subspace,
                          combine_amplified, cstar_norm)
    from .config import Settings
    from .errors import ContractViolation, ShapeMismatchError, SolverConvergenceError
    from .matrix_core import RANK_CUTOFF, dagger, frozen, svd, trace_norm
except ImportError:
    # When run directly as a script
    from opquot.algebra import (AlgebraShape, AmplifiedElement, Subspace, amplify_subspace,
                                combine_amplified, cstar_norm)
    from opquot.config import Settings
    from opquot.errors import ContractViolation, ShapeMismatchError, SolverConvergenceError
    from opquot.matrix_core import RANK_CUTOFF, dagger, frozen, svd, trace_norm

log = logging.getLogger(__name__)

_SOLVER_OPTIONS = {
    "SCS": {"eps_abs": 1e-10, "eps_rel": 1e-10, "max_iters": 200000},
}


@dataclass(frozen=True, eq=False)
class Functional:
    """
    A bounded linear functional on ``M_n(A)`` in trace-duality form.

    Args:
        shape (AlgebraShape): The algebra ``A``.
        level (int): Matrix level ``n``.
        blocks (Tuple[np.ndarray, ...]): ``T_i`` of size ``(n·d_i) × (n·d_i)``.
    """
    shape: AlgebraShape
    level: int
    blocks: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        blocks = tuple(frozen(b) for b in self.blocks)
        for b, d in zip(blocks, self.shape.block_dims):
            if b.shape != (self.level * d, self.level * d):
                raise ShapeMismatchError(f"functional block of shape {b.shape} at level {self.level}")
        if len(blocks) != self.shape.num_blocks:
            raise ShapeMismatchError("functional block count does not match the algebra")
        object.__setattr__(self, "blocks", blocks)

    def __call__(self, c: AmplifiedElement) -> complex:
        if c.shape != self.shape or c.level != self.level:
            raise ShapeMismatchError("functional applied to an element of another space")
        # tr(T·C) = Σ_ab T_ab C_ba
        return complex(sum(np.sum(t * ci.T) for t, ci in zip(self.blocks, c.blocks)))

    def norm(self) -> float:
        return sum(trace_norm(t) for t in self.blocks)

    def annihilation_residual(self, v: Subspace) -> float:
        """``max |ψ(W)|`` over the amplified basis of ``M_n(V)`` (0 for ``V = {0}``)."""
        values = [abs(self(w)) for w in amplify_subspace(v, self.level)]
        return max(values) if values else 0.0

    def scaled(self, z: complex) -> "Functional":
        return Functional(self.shape, self.level, tuple(z * t for t in self.blocks))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.blocks])

    @classmethod
    def from_vector(cls, shape: AlgebraShape, level: int, vec: np.ndarray) -> "Functional":
        blocks, start = [], 0
        for d in shape.block_dims:
            size = level * d
            blocks.append(np.asarray(vec[start:start + size * size]).reshape(size, size))
            start += size * size
        return cls(shape, level, tuple(blocks))


@dataclass(frozen=True, eq=False)
class CertifiedNorm:
    """
    A quotient-norm value with its primal minimiser and dual certificate.

    ``certificate`` is None exactly when the value is zero (no norm-one
    annihilating functional can attain it).
    """
    value: float
    minimizer: np.ndarray
    certificate: Optional[Functional]
    duality_gap: float
    level: int

    def minimizer_element(self, v: Subspace) -> AmplifiedElement:
        return combine_amplified(amplify_subspace(v, self.level), self.minimizer,
                                 shape=v.shape, level=self.level)

    def check(self, c: AmplifiedElement, v: Subspace, settings: Optional[Settings] = None) -> List[Tuple[str, float, float, bool]]:
        """
        Re-verify every certificate invariant from scratch.

        Returns:
            List[Tuple[str, float, float, bool]]: ``(name, residual, tolerance, passed)`` rows.
        """
        tol = (settings or Settings()).tolerances
        rows = []
        primal = cstar_norm(c - self.minimizer_element(v))
        dev = abs(primal - self.value) / max(1.0, self.value)
        rows.append(("primal_value", dev, tol.primal_value, dev <= tol.primal_value))
        if self.certificate is None:
            rows.append(("zero_value", self.value, tol.zero_value * max(1.0, c.norm()),
                         self.value <= tol.zero_value * max(1.0, c.norm())))
            return rows
        psi = self.certificate
        ndev = abs(psi.norm() - 1.0)
        rows.append(("certificate_norm", ndev, tol.certificate_norm, ndev <= tol.certificate_norm))
        ann = psi.annihilation_residual(v)
        rows.append(("annihilation", ann, tol.annihilation, ann <= tol.annihilation))
        short = max(0.0, self.value - psi(c).real)
        rows.append(("attainment", short, tol.attainment, short <= tol.attainment))
        return rows


# ------------------ conic programs ------------------
def _solve(problem: cp.Problem, solvers: Sequence[str]) -> str:
    installed = set(cp.installed_solvers())
    tried = []
    for name in solvers:
        if name not in installed:
            continue
        tried.append(name)
        try:
            problem.solve(solver=name, **_SOLVER_OPTIONS.get(name, {}))
        except cp.error.SolverError as e:
            log.warning(f"Conic solver {name} failed: {e}")
            continue
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            if problem.status == cp.OPTIMAL_INACCURATE:
                log.warning(f"Conic solver {name} reports an inaccurate optimum")
            return name
        log.warning(f"Conic solver {name} finished with status {problem.status}")
    raise SolverConvergenceError(f"no conic solver reached an optimum (tried {tried or 'none'})")


def _stacked(basis: Sequence[AmplifiedElement], block: int) -> np.ndarray:
    """Columns are the row-major vectorised ``block`` of each basis element."""
    return np.column_stack([w.blocks[block].ravel() for w in basis])


def _solve_primal(c: AmplifiedElement, basis: Sequence[AmplifiedElement],
                  solvers: Sequence[str]) -> np.ndarray:
    x = cp.Variable(len(basis), complex=True)
    t = cp.Variable()
    constraints = []
    for i, ci in enumerate(c.blocks):
        size = ci.shape[0]
        d_expr = cp.reshape(_stacked(basis, i) @ x, (size, size), order="C")
        constraints.append(cp.sigma_max(cp.Constant(np.asarray(ci)) - d_expr) <= t)
    problem = cp.Problem(cp.Minimize(t), constraints)
    name = _solve(problem, solvers)
    log.debug(f"Primal program solved by {name}: t = {problem.value}")
    return np.asarray(x.value, dtype=np.complex128).ravel()


def _solve_dual(c: AmplifiedElement, basis: Sequence[AmplifiedElement],
                solvers: Sequence[str]) -> List[np.ndarray]:
    ts = [cp.Variable(ci.shape, complex=True) for ci in c.blocks]
    constraints = [sum(cp.normNuc(t) for t in ts) <= 1]
    for w in basis:
        constraints.append(sum(cp.trace(t @ wi) for t, wi in zip(ts, w.blocks)) == 0)
    objective = cp.Maximize(cp.real(sum(cp.trace(t @ ci) for t, ci in zip(ts, c.blocks))))
    problem = cp.Problem(objective, constraints)
    name = _solve(problem, solvers)
    log.debug(f"Dual program solved by {name}: value = {problem.value}")
    return [np.asarray(t.value, dtype=np.complex128) for t in ts]


# ------------------ certificates ------------------
def _truncated(t: Functional, cutoff: float) -> Tuple[np.ndarray, float]:
    """Drop singular values below ``cutoff·σ_max``; returns the vector and the dropped mass."""
    decs = [svd(b) for b in t.blocks]
    top = max(dec.values[0] for dec in decs)
    parts, dropped = [], 0.0
    for dec in decs:
        keep = dec.values > cutoff * top
        dropped += float(np.sum(dec.values[~keep]))
        parts.append(((dec.left[:, keep] * dec.values[keep]) @ dagger(dec.right[:, keep])).ravel())
    return np.concatenate(parts), dropped


def polish_functional(blocks: Sequence[np.ndarray], c: AmplifiedElement,
                      basis: Sequence[AmplifiedElement], floor: float = RANK_CUTOFF,
                      rounds: int = 50) -> Optional[Functional]:
    """
    Make a candidate certificate exact: project onto the annihilator of ``basis``,
    rescale to norm one and rotate its phase so ``ψ(C) ≥ 0``.

    Solver noise leaves singular values far below the top one; left in place
    they become nearly degenerate GNS directions that amplify the annihilation
    error. Singular values under ``floor·σ_max`` are therefore dropped, and
    projection and truncation are alternated until the dropped mass is negligible.

    Args:
        blocks (Sequence[np.ndarray]): Candidate ``T_i``.
        c (AmplifiedElement): The element the certificate should norm.
        basis (Sequence[AmplifiedElement]): Amplified basis of ``M_n(V)``.
        floor (float): Relative singular value floor; solver callers pass the certificate floor.
        rounds (int): Maximum projection/truncation rounds.

    Returns:
        Optional[Functional]: None if nothing survives the projection.
    """
    t = np.concatenate([np.asarray(b, dtype=np.complex128).ravel() for b in blocks])
    if basis:
        # rows g_b with g_b · t = Σ_i tr(T_i W_{b,i})
        g = np.vstack([np.concatenate([wi.T.ravel() for wi in w.blocks]) for w in basis])
        frame = scipy.linalg.orth(dagger(g))
    else:
        frame = np.zeros((t.size, 0), dtype=np.complex128)

    def project(vec: np.ndarray) -> np.ndarray:
        return vec - frame @ (dagger(frame) @ vec)

    t = project(t)
    for _ in range(rounds):
        psi = Functional.from_vector(c.shape, c.level, t)
        nrm = psi.norm()
        if nrm <= 1e-14:
            return None
        cut, dropped = _truncated(psi, floor)
        if dropped <= 1e-14 * nrm:
            break
        t = project(cut)
    else:
        log.warning(f"Certificate polishing stopped after {rounds} rounds (dropped mass {dropped:.2e})")
    psi = Functional.from_vector(c.shape, c.level, t)
    nrm = psi.norm()
    if nrm <= 1e-14:
        return None
    psi = psi.scaled(1.0 / nrm)
    z = psi(c)
    if abs(z) > 0.0:
        psi = psi.scaled(np.conj(z) / abs(z))
    return psi


def norming_functional(c: AmplifiedElement) -> Optional[Functional]:
    """``T = x·y*`` from the top singular pair of the block with the largest norm."""
    norms = [svd(b) for b in c.blocks]
    i = int(np.argmax([dec.values[0] for dec in norms]))
    if norms[i].values[0] <= 0.0:
        return None
    dec = norms[i]
    blocks = [np.zeros_like(b, dtype=np.complex128) for b in c.blocks]
    blocks[i] = np.outer(dec.right[:, 0], np.conj(dec.left[:, 0]))
    return polish_functional(blocks, c, [])


def _pair_candidate(residual: AmplifiedElement, basis: Sequence[AmplifiedElement],
                    cluster: float) -> Optional[List[np.ndarray]]:
    """
    Convex combination of top singular pairs of ``C − D*`` that best annihilates ``M_n(V)``.

    Solves a small linear program over the weights; returns None when it fails.
    """
    decs = [svd(b) for b in residual.blocks]
    top = max(dec.values[0] for dec in decs)
    cut = top - cluster * max(1.0, top)
    pairs = []
    for i, dec in enumerate(decs):
        for j, s in enumerate(dec.values):
            if s >= cut:
                pairs.append((i, dec.left[:, j], dec.right[:, j]))
    m = len(pairs)
    # a[b, j] = tr(T_j W_b) = y_j* W_{b,i} x_j
    a = np.array([[np.vdot(y, w.blocks[i] @ x) for (i, y, x) in pairs] for w in basis]).reshape(len(basis), m)
    # variables: λ_1..λ_m, s   minimise s  s.t. |Re(aλ)|, |Im(aλ)| ≤ s, Σλ = 1, λ ≥ 0
    rows = np.vstack([a.real, -a.real, a.imag, -a.imag]) if len(basis) else np.zeros((0, m))
    a_ub = np.hstack([rows, -np.ones((rows.shape[0], 1))])
    b_ub = np.zeros(rows.shape[0])
    a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=a_ub if a_ub.size else None, b_ub=b_ub if a_ub.size else None,
                  A_eq=a_eq, b_eq=np.ones(1), bounds=[(0, None)] * (m + 1), method="highs")
    if not res.success:
        log.debug(f"Singular-pair program failed: {res.message}")
        return None
    lam = res.x[:m]
    blocks = [np.zeros_like(b, dtype=np.complex128) for b in residual.blocks]
    for weight, (i, y, x) in zip(lam, pairs):
        blocks[i] = blocks[i] + weight * np.outer(x, np.conj(y))
    return blocks


def dual_certificate(c: AmplifiedElement, v: Subspace, primal: np.ndarray,
                     settings: Optional[Settings] = None) -> Functional:
    """
    Build a norm-one functional annihilating ``M_n(V)`` that attains ``‖C − D*‖``.

    The singular-pair route is tried first; when degenerate optimisers make it
    fall short, the dual program is solved directly and the better of the two
    polished candidates is returned.

    Args:
        c (AmplifiedElement): The element.
        v (Subspace): The subspace.
        primal (np.ndarray): Coefficients of ``D*`` in ``amplify_subspace(v, n)``.
        settings (Optional[Settings]): Tolerances and solver choices.

    Returns:
        Functional: The certificate.

    Raises:
        SolverConvergenceError: If no route attains the value within the attainment tolerance.
    """
    settings = settings or Settings()
    basis = amplify_subspace(v, c.level)
    residual = c - combine_amplified(basis, primal, shape=c.shape, level=c.level)
    value = cstar_norm(residual)
    scale = max(1.0, value)

    candidates: List[Functional] = []
    pair = _pair_candidate(residual, basis, settings.solver.cluster)
    if pair is not None:
        psi = polish_functional(pair, c, basis, settings.tolerances.certificate_floor)
        if psi is not None:
            candidates.append(psi)
            if psi(c).real >= value - settings.solver.pair_gap * scale:
                return psi
    log.warning("Singular-pair certificate falls short; solving the dual program")
    try:
        dual = _solve_dual(c, basis, settings.solver.conic)
        psi = polish_functional(dual, c, basis, settings.tolerances.certificate_floor)
        if psi is not None:
            candidates.append(psi)
    except (SolverConvergenceError, cp.error.DCPError, ValueError) as e:
        log.warning(f"Dual program failed: {e}")
    if not candidates:
        raise SolverConvergenceError("no certificate candidate survived", best_primal=value)
    best = max(candidates, key=lambda p: p(c).real)
    attained = best(c).real
    if attained < value - settings.tolerances.attainment * scale:
        raise SolverConvergenceError("certificate does not attain the primal value",
                                     best_primal=value, best_dual=attained, gap=value - attained)
    return best


# ------------------ public entry points ------------------
def quotient_norm(c: AmplifiedElement, v: Subspace, settings: Optional[Settings] = None) -> CertifiedNorm:
    """
    Certified quotient norm of ``C`` in ``M_n(A)/M_n(V)``.

    Args:
        c (AmplifiedElement): Element of ``M_n(A)``.
        v (Subspace): The subspace ``V`` (may be ``{0}`` or all of ``A``).
        settings (Optional[Settings]): Tolerances and solver choices.

    Returns:
        CertifiedNorm: Value, minimiser, certificate and duality gap.

    Raises:
        ShapeMismatchError: If ``c`` and ``v`` live in different algebras.
        SolverConvergenceError: If the conic solvers fail or the gap stays above tolerance.
    """
    settings = settings or Settings()
    if c.shape != v.shape:
        raise ShapeMismatchError(f"element of {c.shape.block_dims} against subspace of {v.shape.block_dims}")
    n = c.level
    basis = amplify_subspace(v, n)
    scale = max(1.0, c.norm())

    if v.spans_algebra():
        mat = np.column_stack([w.to_vector() for w in basis])
        coef, *_ = np.linalg.lstsq(mat, c.to_vector(), rcond=None)
        return CertifiedNorm(value=0.0, minimizer=coef, certificate=None, duality_gap=0.0, level=n)

    if basis:
        minimizer = _solve_primal(c, basis, settings.solver.conic)
    else:
        minimizer = np.zeros(0, dtype=np.complex128)
    value = cstar_norm(c - combine_amplified(basis, minimizer, shape=c.shape, level=n))

    if value <= settings.tolerances.zero_value * scale:
        log.debug(f"Quotient norm vanishes at level {n} (value {value:.3e})")
        return CertifiedNorm(value=value, minimizer=minimizer, certificate=None, duality_gap=value, level=n)

    psi = norming_functional(c) if not basis else dual_certificate(c, v, minimizer, settings)
    if psi is None:
        raise SolverConvergenceError("no norming functional for a nonzero element", best_primal=value)
    gap = max(0.0, value - psi(c).real)
    if gap > settings.tolerances.duality_gap * max(1.0, value):
        raise SolverConvergenceError(f"duality gap {gap:.3e} above tolerance",
                                     best_primal=value, best_dual=value - gap, gap=gap)
    log.debug(f"Quotient norm at level {n}: {value:.12g} (gap {gap:.2e})")
    return CertifiedNorm(value=value, minimizer=minimizer, certificate=psi, duality_gap=gap, level=n)


def weak_duality_excess(c: AmplifiedElement, v: Subspace, psi: Functional,
                        settings: Optional[Settings] = None) -> float:
    """
    ``|ψ(C)|/‖ψ‖ − ‖C‖_{A/V}`` for an annihilating functional; never positive beyond round-off.

    Raises:
        ContractViolation: If ``psi`` does not annihilate ``M_n(V)``.
    """
    settings = settings or Settings()
    if psi.annihilation_residual(v) > settings.tolerances.annihilation * max(1.0, psi.norm()):
        raise ContractViolation("weak duality needs a functional annihilating M_n(V)")
    nrm = psi.norm()
    if nrm == 0.0:
        return -quotient_norm(c, v, settings).value
    return abs(psi(c)) / nrm - quotient_norm(c, v, settings).value


if __name__ == "__main__":
    from opquot.algebra import AlgebraElement

    shape = AlgebraShape((2,))
    v = Subspace.scalars(shape)
    c = AmplifiedElement.from_element(AlgebraElement(shape, (np.diag([1.0, -1.0]),)))
    result = quotient_norm(c, v)
    print(f"‖diag(1,-1)‖ in M2/C1 = {result.value:.9f} (gap {result.duality_gap:.2e})")
    print("certificate:", np.round(result.certificate.blocks[0], 6))
