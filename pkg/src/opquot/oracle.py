"""
Independent brute-force estimate of the quotient norm.

Nothing here shares code with the conic route in :mod:`opquot.quotient` beyond
the algebra types. The nonsmooth objective ``max_i σ₁(C_i − Σ x_b W_{b,i})`` is
replaced by the log-sum-exp of all ``±σ_j`` (a uniform ``μ·log(2N)`` upper
approximation), driven down by L-BFGS over a decreasing smoothing schedule,
restarted from seeded random points, then finished with a compass search on
the true objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .algebra import AmplifiedElement, Subspace, amplify_subspace, cstar_norm
from .config import Settings
from .errors import ContractViolation, ShapeMismatchError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleEstimate:
    """
    Best value found by the oracle.

    ``certified`` is False when the evaluation budget ran out before the
    schedule finished; the value is then only an upper bound.
    """
    value: float
    coefficients: np.ndarray
    certified: bool
    evaluations: int


class _Objective:
    """Evaluation counter around the true and smoothed objectives."""

    def __init__(self, c: AmplifiedElement, basis, budget: int) -> None:
        self.targets = [np.asarray(b) for b in c.blocks]
        self.stacks = [np.stack([w.blocks[i] for w in basis]) for i in range(len(c.blocks))]
        self.k = len(basis)
        self.budget = budget
        self.evaluations = 0

    @property
    def exhausted(self) -> bool:
        return self.evaluations >= self.budget

    def _residuals(self, p: np.ndarray):
        x = p[:self.k] + 1j * p[self.k:]
        return [t - np.tensordot(x, s, axes=1) for t, s in zip(self.targets, self.stacks)]

    def value(self, p: np.ndarray) -> float:
        self.evaluations += 1
        return max(float(np.linalg.norm(r, 2)) for r in self._residuals(p))

    def smoothed(self, p: np.ndarray, mu: float):
        """``μ·logΣexp(±σ_j/μ)`` and its gradient in the real parameters."""
        self.evaluations += 1
        parts = [np.linalg.svd(r) for r in self._residuals(p)]
        sig = np.concatenate([s for _, s, _ in parts])
        lse = logsumexp(np.concatenate([sig / mu, -sig / mu]))
        grad_re = np.zeros(self.k)
        grad_im = np.zeros(self.k)
        for (u, s, vh), stack in zip(parts, self.stacks):
            w = np.exp(s / mu - lse) - np.exp(-s / mu - lse)
            g = (u * w) @ vh
            inner = np.einsum("ij,bij->b", g.conj(), stack)
            grad_re -= inner.real
            grad_im += inner.imag
        return mu * lse, np.concatenate([grad_re, grad_im])


def _compass(obj: _Objective, p: np.ndarray, f: float, step: float, floor: float):
    while step > floor and not obj.exhausted:
        improved = False
        for k in range(p.size):
            for sign in (1.0, -1.0):
                trial = p.copy()
                trial[k] += sign * step
                ft = obj.value(trial)
                if ft < f:
                    p, f, improved = trial, ft, True
                    break
        if not improved:
            step *= 0.5
    return p, f


def oracle_quotient_norm(c: AmplifiedElement, v: Subspace, settings: Optional[Settings] = None,
                         budget: Optional[int] = None) -> OracleEstimate:
    """
    Estimate ``‖C‖_{A/V}`` by local search over the coefficients of ``D``.

    Args:
        c (AmplifiedElement): Element of ``M_n(A)``.
        v (Subspace): The subspace.
        settings (Optional[Settings]): Seed, restarts and smoothing schedule.
        budget (Optional[int]): Maximum objective evaluations (defaults to the settings).

    Returns:
        OracleEstimate: Best value found.

    Raises:
        ContractViolation: If ``2·n²·dim V`` exceeds the configured parameter limit.
    """
    settings = settings or Settings()
    sv = settings.solver
    if c.shape != v.shape:
        raise ShapeMismatchError("oracle needs an element and subspace of the same algebra")
    basis = amplify_subspace(v, c.level)
    if 2 * len(basis) > sv.oracle_max_parameters:
        raise ContractViolation(
            f"oracle limited to {sv.oracle_max_parameters} real parameters, got {2 * len(basis)}")
    if not basis:
        return OracleEstimate(cstar_norm(c), np.zeros(0, dtype=np.complex128), True, 0)

    obj = _Objective(c, basis, budget if budget is not None else sv.oracle_max_evaluations)
    rng = np.random.default_rng(settings.seed)
    scale = max(1.0, cstar_norm(c))
    best_p = np.zeros(2 * len(basis))
    best_f = obj.value(best_p)

    for restart in range(max(1, sv.oracle_restarts)):
        p = np.zeros(2 * len(basis)) if restart == 0 else scale * rng.standard_normal(2 * len(basis))
        for mu in sv.oracle_smoothing:
            if obj.exhausted:
                break
            res = minimize(obj.smoothed, p, args=(mu * scale,), jac=True, method="L-BFGS-B",
                           options={"maxfun": max(1, obj.budget - obj.evaluations),
                                    "ftol": 1e-15, "gtol": 1e-13})
            p = res.x
        f = obj.value(p)
        log.debug(f"Oracle restart {restart}: {f:.12g}")
        if f < best_f:
            best_p, best_f = p, f

    best_p, best_f = _compass(obj, best_p, best_f, 1e-3 * scale, 1e-11 * scale)
    certified = not obj.exhausted
    if not certified:
        log.warning(f"Oracle budget of {obj.budget} evaluations exhausted; value {best_f:.9g} is an upper bound")
    k = len(basis)
    return OracleEstimate(best_f, best_p[:k] + 1j * best_p[k:], certified, obj.evaluations)
