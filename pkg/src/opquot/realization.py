"""
Concrete realizations of ``A/V`` assembled from finite families of certified
probes, and the checks that go with them.

Four kinds are built on top of each other:

* ``general``     ``Ψ(A) = Qπ(A)P`` from the direct sum of the probes' GNS data.
* ``star``        ``Ψ(A) = PUπ(A)P`` on ``H ⊕ H`` with ``P ⊕ Q`` and the swap ``U``.
* ``system``      ``Ψ(A) = ½P[Z, π(A)]P`` with ``Z = [P, U]`` (needs ``1 ∈ V``).
* ``subalgebra``  ``Θ(A) = ½[iX, π(A)]`` with ``X = 2P̂ − I`` and ``P̂`` the
  projection onto the span of ``π(B)PH``.

Only finitely many functionals are used, so each realization is exact on the
probes it was built from and a lower bound elsewhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .RealizationBase import RealizationBase, choi_min_eigenvalue
from .algebra import AlgebraElement, AlgebraShape, AmplifiedElement, Subspace, amplify_subspace, combine_amplified
from .config import Settings, Tolerances
from .errors import ContractViolation
from .gns import GnsData, RepresentationData, direct_sum, gns_from_functional, reconstruction_residual
from .matrix_core import (dagger, hermitian_part, max_abs, orthonormalize, projection, spectral_norm, svd)
from .quotient import CertifiedNorm, quotient_norm
from .report import CheckResult

log = logging.getLogger(__name__)

# Independent random streams per task, so adding a check never shifts another.
STREAMS = {"probes": 1, "held_out": 2, "contractivity": 3, "derivation": 4, "leibniz": 5, "span": 6}


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, STREAMS[name]])


# ------------------ probes ------------------
@dataclass(frozen=True, eq=False)
class Probe:
    element: AmplifiedElement
    certified: CertifiedNorm
    origin: str

    @property
    def level(self) -> int:
        return self.element.level

    @property
    def value(self) -> float:
        return self.certified.value


@dataclass(frozen=True)
class ProbeSet:
    """Certified probes standing in for the (infinite) family of norming functionals."""
    probes: Tuple[Probe, ...] = ()

    def __iter__(self):
        return iter(self.probes)

    def __len__(self) -> int:
        return len(self.probes)

    @property
    def levels(self) -> List[int]:
        return sorted({p.level for p in self.probes})

    def at_level(self, n: int) -> List[Probe]:
        return [p for p in self.probes if p.level == n]

    def nonzero(self) -> List[Probe]:
        return [p for p in self.probes if p.certified.certificate is not None]

    def contains(self, c: AmplifiedElement, tol: float = 1e-12) -> bool:
        return any(p.level == c.level and max_abs(p.element.to_vector() - c.to_vector()) <= tol
                   for p in self.probes)

    def symmetrized(self, v: Subspace, settings: Settings) -> "ProbeSet":
        """Add the adjoint of every probe that is not already present."""
        extra: List[Probe] = []
        current = ProbeSet(self.probes)
        for p in self.probes:
            adj = p.element.adjoint()
            if not current.contains(adj):
                probe = Probe(adj, quotient_norm(adj, v, settings), "adjoint")
                extra.append(probe)
                current = ProbeSet(current.probes + (probe,))
        return current

    def to_dicts(self) -> List[Dict]:
        return [{"level": p.level, "origin": p.origin, "value": float(p.value),
                 "duality_gap": float(p.certified.duality_gap),
                 "certified": p.certified.certificate is not None}
                for p in self.probes]


def cross_duality_residual(probes: ProbeSet) -> float:
    """
    Largest ``|ψ_j(C_k)|/‖ψ_j‖ − ‖C_k‖_{A/V}`` over certified probes at a common level.

    Every certificate annihilates ``M_n(V)``, so weak duality keeps this at round-off.
    """
    worst = 0.0
    for n in probes.levels:
        members = probes.at_level(n)
        for pj in members:
            psi = pj.certified.certificate
            if psi is None:
                continue
            nrm = psi.norm()
            for pk in members:
                worst = max(worst, abs(psi(pk.element)) / nrm - pk.value)
    return float(worst)


def generate_probe_elements(shape: AlgebraShape, settings: Settings,
                            explicit: Sequence[AmplifiedElement] = ()) -> List[Tuple[str, AmplifiedElement]]:
    """
    Explicit probes, then algebra basis elements (level one), then seeded random
    and random Hermitian elements at every level ``1..N``.
    """
    rng = stream(settings.seed, "probes")
    out: List[Tuple[str, AmplifiedElement]] = [("explicit", c) for c in explicit]
    if settings.probes.include_basis:
        out.extend(("basis", AmplifiedElement.from_element(e)) for e in shape.basis())
    for n in range(1, settings.levels + 1):
        for _ in range(settings.probes.random):
            out.append(("random", AmplifiedElement.random(shape, n, rng)))
        for _ in range(settings.probes.hermitian):
            out.append(("hermitian", AmplifiedElement.random(shape, n, rng, hermitian=True)))
    return out


def certify_probes(elements: Sequence[Tuple[str, AmplifiedElement]], v: Subspace,
                   settings: Settings) -> ProbeSet:
    probes = []
    for origin, c in elements:
        cert = quotient_norm(c, v, settings)
        log.debug(f"Probe ({origin}, level {c.level}): {cert.value:.9g}")
        probes.append(Probe(c, cert, origin))
    return ProbeSet(tuple(probes))


def make_probes(v: Subspace, settings: Settings, explicit: Sequence[AmplifiedElement] = ()) -> ProbeSet:
    """Generate and certify the default probe family (plus adjoints for ``*``-closed ``V``)."""
    probes = certify_probes(generate_probe_elements(v.shape, settings, explicit), v, settings)
    if v.star_closed and settings.probes.symmetrize:
        probes = probes.symmetrized(v, settings)
    log.info(f"Certified {len(probes)} probes ({len(probes.nonzero())} with nonzero quotient norm)")
    return probes


# ------------------ realizations ------------------
class GeneralRealization(RealizationBase):
    """``Ψ(A) = Qπ(A)P`` for an arbitrary subspace."""

    KIND = "general"

    def __init__(self, rep: RepresentationData, P: np.ndarray, Q: np.ndarray,
                 members: Sequence[GnsData] = ()) -> None:
        super().__init__(rep.shape)
        self.rep = rep
        self.P = np.asarray(P, dtype=np.complex128)
        self.Q = np.asarray(Q, dtype=np.complex128)
        self.members = tuple(members)

    @property
    def dim(self) -> int:
        return self.rep.dim

    @property
    def is_star_map(self) -> bool:
        return False

    def represent(self, a: AlgebraElement) -> np.ndarray:
        return self.rep.represent(a)

    def apply(self, a: AlgebraElement) -> np.ndarray:
        return self.Q @ self.represent(a) @ self.P

    def matrices(self) -> Dict[str, np.ndarray]:
        return {"P": self.P, "Q": self.Q}

    def structural_checks(self, v: Subspace, tol: Tolerances, rng: np.random.Generator) -> List[CheckResult]:
        return [
            CheckResult.from_residual("general.P_projection", _projection_residual(self.P), tol.structural),
            CheckResult.from_residual("general.Q_projection", _projection_residual(self.Q), tol.structural),
            CheckResult.from_residual("general.vanishes_on_V", self.vanishing_residual(v), tol.annihilation),
        ]

    def summary(self) -> Dict:
        out = super().summary()
        out.update({"multiplicities": list(self.rep.multiplicities),
                    "rank_P": _rank(self.P), "rank_Q": _rank(self.Q)})
        return out


class StarRealization(RealizationBase):
    """
    ``Ψ(A) = PUπ(A)P`` on ``H ⊕ H`` (or on a reducing subspace of it).

    Args:
        base (GeneralRealization): The realization the doubling is built from.
        P (np.ndarray): ``P ⊕ Q`` (compressed to the frame, if any).
        U (np.ndarray): Hermitian unitary commuting with ``π ⊕ π``.
        frame (Optional[np.ndarray]): Isometry onto the cut-down subspace.
    """

    KIND = "star"

    def __init__(self, base: GeneralRealization, P: np.ndarray, U: np.ndarray,
                 frame: Optional[np.ndarray] = None) -> None:
        super().__init__(base.shape)
        self.base = base
        self.P = np.asarray(P, dtype=np.complex128)
        self.U = np.asarray(U, dtype=np.complex128)
        self.frame = None if frame is None else np.asarray(frame, dtype=np.complex128)

    @property
    def dim(self) -> int:
        return 2 * self.base.dim if self.frame is None else self.frame.shape[1]

    def doubled(self, a: AlgebraElement) -> np.ndarray:
        pa = self.base.represent(a)
        return scipy.linalg.block_diag(pa, pa)

    def represent(self, a: AlgebraElement) -> np.ndarray:
        raw = self.doubled(a)
        return raw if self.frame is None else dagger(self.frame) @ raw @ self.frame

    def star_apply(self, a: AlgebraElement) -> np.ndarray:
        """``PUπ(A)P``."""
        return self.P @ self.U @ self.represent(a) @ self.P

    def apply(self, a: AlgebraElement) -> np.ndarray:
        return self.star_apply(a)

    def swap_form(self, a: AlgebraElement) -> np.ndarray:
        """``[[0, Pπ(A)Q], [Qπ(A)P, 0]]`` on ``H ⊕ H`` from the base realization."""
        pa = self.base.represent(a)
        zero = np.zeros_like(pa)
        return np.block([[zero, self.base.P @ pa @ self.base.Q], [self.base.Q @ pa @ self.base.P, zero]])

    def lift(self, m: np.ndarray) -> np.ndarray:
        return m if self.frame is None else self.frame @ m @ dagger(self.frame)

    def matrices(self) -> Dict[str, np.ndarray]:
        out = {"base_P": self.base.P, "base_Q": self.base.Q, "P": self.P, "U": self.U}
        if self.frame is not None:
            out["frame"] = self.frame
        return out

    def star_checks(self, v: Subspace, tol: Tolerances) -> List[CheckResult]:
        u, eye = self.U, np.eye(self.dim)
        commutator = max((max_abs(u @ self.represent(e) - self.represent(e) @ u) for e in self.shape.basis()),
                         default=0.0)
        swap = max((max_abs(self.lift(self.star_apply(e)) - self.swap_form(e)) for e in self.shape.basis()),
                   default=0.0)
        star = max((max_abs(self.star_apply(e.adjoint()) - dagger(self.star_apply(e))) for e in self.shape.basis()),
                   default=0.0)
        psi_v = max((spectral_norm(self.star_apply(d)) / max(1.0, d.norm()) for d in v.basis), default=0.0)
        return [
            CheckResult.from_residual("star.P_projection", _projection_residual(self.P), tol.structural),
            CheckResult.from_residual("star.U_hermitian", max_abs(u - dagger(u)), tol.structural),
            CheckResult.from_residual("star.U_squared", max_abs(u @ u - eye), tol.structural),
            CheckResult.from_residual("star.U_commutes", commutator, tol.structural),
            CheckResult.from_residual("star.swap_form", swap, tol.structural),
            CheckResult.from_residual("star.star_map", star, tol.star_map),
            CheckResult.from_residual("star.vanishes_on_V", psi_v, tol.annihilation),
        ]

    def structural_checks(self, v: Subspace, tol: Tolerances, rng: np.random.Generator) -> List[CheckResult]:
        return self.star_checks(v, tol)

    def summary(self) -> Dict:
        out = super().summary()
        out.update({"base_dim_H": self.base.dim, "multiplicities": list(self.base.rep.multiplicities),
                    "rank_P": _rank(self.P), "cutdown": self.frame is not None})
        return out


class SystemRealization(StarRealization):
    """``Ψ(A) = ½P[Z, π(A)]P`` with ``Z = [P, U]``."""

    KIND = "system"

    @property
    def Z(self) -> np.ndarray:
        return self.P @ self.U - self.U @ self.P

    def apply(self, a: AlgebraElement) -> np.ndarray:
        pa, z = self.represent(a), self.Z
        return 0.5 * self.P @ (z @ pa - pa @ z) @ self.P

    def structural_checks(self, v: Subspace, tol: Tolerances, rng: np.random.Generator) -> List[CheckResult]:
        p, u, z = self.P, self.U, self.Z
        eye = np.eye(self.dim)
        x = 2.0 * p - eye
        basis = self.shape.basis()
        agree = max((max_abs(self.apply(e) - self.star_apply(e)) for e in basis), default=0.0)
        alt_x = max((max_abs(-0.5 * p @ u @ (x @ self.represent(e) - self.represent(e) @ x) - self.star_apply(e))
                     for e in basis), default=0.0)
        alt_right = max((max_abs((p @ self.represent(e) - self.represent(e) @ p) @ u @ p - self.star_apply(e))
                         for e in basis), default=0.0)
        checks = self.star_checks(v, tol)
        checks.extend([
            CheckResult.from_residual("system.PUP", spectral_norm(p @ u @ p), tol.annihilation),
            CheckResult.from_residual("system.Z_skew", max_abs(z + dagger(z)), tol.structural),
            CheckResult.from_residual("system.Z_norm", max(0.0, spectral_norm(z) - 1.0), tol.structural),
            CheckResult.from_residual("system.PZ_relation", max_abs(p @ z - z @ (eye - p)), tol.structural),
            CheckResult.from_residual("system.formulas_agree", agree, tol.structural),
            CheckResult.from_residual("system.reflection_formula", alt_x, tol.structural),
            CheckResult.from_residual("system.right_formula", alt_right, tol.structural),
        ])
        return checks


class SubalgebraRealization(StarRealization):
    """
    ``Θ(A) = ½[iX, π(A)]`` with ``X = 2P̂ − I``.

    Args:
        P_hat (np.ndarray): Projection onto the span of ``π(B)PH``.
    """

    KIND = "subalgebra"

    def __init__(self, base: GeneralRealization, P: np.ndarray, U: np.ndarray, P_hat: np.ndarray,
                 frame: Optional[np.ndarray] = None) -> None:
        super().__init__(base, P, U, frame)
        self.P_hat = np.asarray(P_hat, dtype=np.complex128)

    @property
    def X(self) -> np.ndarray:
        return 2.0 * self.P_hat - np.eye(self.dim)

    def apply(self, a: AlgebraElement) -> np.ndarray:
        pa, x = self.represent(a), self.X
        return 0.5j * (x @ pa - pa @ x)

    def hatted(self, a: AlgebraElement) -> np.ndarray:
        """``Ψ̂(A) = P̂Uπ(A)P̂``."""
        return self.P_hat @ self.U @ self.represent(a) @ self.P_hat

    def hatted_amplified(self, c: AmplifiedElement) -> np.ndarray:
        n = c.level
        big_hat = np.kron(np.eye(n), self.P_hat)
        return big_hat @ np.kron(np.eye(n), self.U) @ self._represent_amplified(c) @ big_hat

    def star_apply_amplified(self, c: AmplifiedElement) -> np.ndarray:
        n = c.level
        big_p = np.kron(np.eye(n), self.P)
        return big_p @ np.kron(np.eye(n), self.U) @ self._represent_amplified(c) @ big_p

    def _represent_amplified(self, c: AmplifiedElement) -> np.ndarray:
        n, h = c.level, self.dim
        out = np.zeros((n * h, n * h), dtype=np.complex128)
        for j in range(n):
            for k in range(n):
                out[j * h:(j + 1) * h, k * h:(k + 1) * h] = self.represent(c.entry(j, k))
        return out

    def matrices(self) -> Dict[str, np.ndarray]:
        out = super().matrices()
        out["P_hat"] = self.P_hat
        return out

    def cp_average(self, m: AmplifiedElement) -> np.ndarray:
        """``½(I⊕X)π₂(M)(I⊕X) + ½(−X⊕I)π₂(M)(−X⊕I)`` for ``M ∈ M₂(A)``."""
        x, eye = self.X, np.eye(self.dim)
        w1 = scipy.linalg.block_diag(eye, x)
        w2 = scipy.linalg.block_diag(-x, eye)
        pm = self._represent_amplified(m)
        return 0.5 * (w1 @ pm @ w1) + 0.5 * (w2 @ pm @ w2)

    def cp_average_checks(self, tol: Tolerances) -> List[CheckResult]:
        """Choi positivity of the averaged map on ``M₂(A)`` and its corner identity."""
        h = self.dim
        doubled = AlgebraShape(tuple(2 * d for d in self.shape.block_dims))

        def composed(e: AlgebraElement) -> np.ndarray:
            return self.cp_average(_as_two_by_two(self.shape, e))

        min_eig = choi_min_eigenvalue(composed, doubled)
        corner = 0.0
        x = self.X
        for e in self.shape.basis():
            m = AmplifiedElement.embed(e, 2, 0, 1)
            pa = self.represent(e)
            corner = max(corner, max_abs(self.cp_average(m)[:h, h:] + 0.5 * (x @ pa - pa @ x)))
        return [
            CheckResult.from_residual("subalgebra.cp_average_choi", max(0.0, -min_eig), tol.choi_psd),
            CheckResult.from_residual("subalgebra.cp_average_corner", corner, tol.structural),
        ]

    def structural_checks(self, v: Subspace, tol: Tolerances, rng: np.random.Generator) -> List[CheckResult]:
        x, ph, p, u = self.X, self.P_hat, self.P, self.U
        eye = np.eye(self.dim)
        basis_b = list(v.basis) + [AlgebraElement.unit(self.shape)]
        commute = max(max_abs(ph @ self.represent(b) - self.represent(b) @ ph) for b in basis_b)
        theta_b = max(max_abs(self.apply(b)) for b in basis_b)
        hat_b = max(spectral_norm(self.hatted(b)) / max(1.0, b.norm()) for b in basis_b)
        hat_formula = max(max_abs(-0.5 * ph @ u @ (x @ self.represent(e) - self.represent(e) @ x) - self.hatted(e))
                          for e in self.shape.basis())
        checks = self.star_checks(v, tol)
        checks.extend([
            CheckResult.from_residual("subalgebra.P_hat_projection", _projection_residual(ph), tol.structural),
            CheckResult.from_residual("subalgebra.P_hat_dominates_P", max_abs(ph @ p - p), tol.structural),
            CheckResult.from_residual("subalgebra.X_hermitian", max_abs(x - dagger(x)), tol.structural),
            CheckResult.from_residual("subalgebra.X_squared", max_abs(x @ x - eye), tol.structural),
            CheckResult.from_residual("subalgebra.X_commutes_with_B", 2.0 * commute, tol.structural),
            CheckResult.from_residual("subalgebra.theta_vanishes_on_B", theta_b, tol.structural),
            CheckResult.from_residual("subalgebra.derivation", derivation_residual(self, stream_rng(rng)),
                                      tol.structural),
            CheckResult.from_residual("subalgebra.hatted_vanishes_on_B", hat_b, tol.annihilation),
            CheckResult.from_residual("subalgebra.P_hat_U_P_hat", spectral_norm(ph @ u @ ph), tol.annihilation),
            CheckResult.from_residual("subalgebra.hatted_formula", hat_formula, tol.annihilation),
        ])
        checks.extend(self.cp_average_checks(tol))
        return checks

    def probe_checks(self, probes: ProbeSet, tol: Tolerances) -> List[CheckResult]:
        """``‖Θ_n(C)‖ ≥ ‖Ψ̂_n(C)‖ ≥ ‖Ψ_n(C)‖`` on every probe."""
        worst = 0.0
        for pr in probes:
            theta = self.norm_of(pr.element)
            hat = spectral_norm(self.hatted_amplified(pr.element))
            psi = spectral_norm(self.star_apply_amplified(pr.element))
            worst = max(worst, hat - theta, psi - hat)
        return [CheckResult.from_residual("subalgebra.sandwich", worst, tol.overshoot)]

    def summary(self) -> Dict:
        out = super().summary()
        out["rank_P_hat"] = _rank(self.P_hat)
        return out


def stream_rng(rng: np.random.Generator) -> np.random.Generator:
    """A child generator, so derived sweeps do not consume the parent's sequence."""
    return np.random.default_rng(rng.integers(0, 2 ** 63 - 1))


def _as_two_by_two(shape: AlgebraShape, e: AlgebraElement) -> AmplifiedElement:
    """Read an element of ``⊕ M_{2d_i}`` as an element of ``M₂(A)`` (row ``r·d_i + p``)."""
    entries = [[None, None], [None, None]]
    for r in range(2):
        for s in range(2):
            entries[r][s] = AlgebraElement(shape, tuple(
                b[r * d:(r + 1) * d, s * d:(s + 1) * d] for b, d in zip(e.blocks, shape.block_dims)))
    return AmplifiedElement.from_entries(entries)


def _projection_residual(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return max(max_abs(m - dagger(m)), max_abs(m @ m - m))


def _rank(m: np.ndarray) -> int:
    return int(svd(m).rank()) if m.size else 0


# ------------------ builders ------------------
def _zero_tolerance(settings: Settings, c: AmplifiedElement) -> float:
    return settings.tolerances.zero_value * max(1.0, c.norm())


def build_general(v: Subspace, probes: ProbeSet, settings: Optional[Settings] = None) -> GeneralRealization:
    """
    Direct sum of the GNS data of every probe with nonzero quotient norm.

    Raises:
        ContractViolation: If a probe with nonzero value carries no certificate.
    """
    settings = settings or Settings()
    tol = settings.tolerances
    members = []
    for p in probes:
        if p.certified.certificate is None:
            if p.value > _zero_tolerance(settings, p.element):
                raise ContractViolation(f"probe ({p.origin}, level {p.level}) has no certificate")
            continue
        members.append(gns_from_functional(p.certified.certificate, v, tol.certificate_norm,
                                           tol.annihilation, tol.rank_cutoff))
    if not members:
        rep = RepresentationData(v.shape, (0,) * v.shape.num_blocks)
        empty = np.zeros((0, 0), dtype=np.complex128)
        log.info("No probe with nonzero quotient norm; realization is zero-dimensional")
        return GeneralRealization(rep, empty, empty)
    rep, embeddings = direct_sum([m.rep for m in members])
    p_total = sum(j @ m.P @ j.T for j, m in zip(embeddings, members))
    q_total = sum(j @ m.Q @ j.T for j, m in zip(embeddings, members))
    log.info(f"General realization: {len(members)} functionals, dim H = {rep.dim}")
    return GeneralRealization(rep, hermitian_part(p_total), hermitian_part(q_total), members)


def cutdown_frame(star: StarRealization, rank_cutoff: float) -> np.ndarray:
    """Orthonormal basis of ``span(π(A)PH + π(A)UPH)``: the smallest reducing subspace containing ``PH``."""
    p_basis = orthonormalize(list(star.P.T), tol=rank_cutoff, dim=star.dim)
    up_basis = star.U @ p_basis
    columns = []
    for e in star.shape.basis():
        pe = star.represent(e)
        columns.extend(list((pe @ p_basis).T))
        columns.extend(list((pe @ up_basis).T))
    return orthonormalize(columns, tol=rank_cutoff, dim=star.dim)


def _star_parts(v: Subspace, probes: ProbeSet, settings: Settings) -> Tuple[GeneralRealization, np.ndarray, np.ndarray, Optional[np.ndarray]]:
    if not v.star_closed:
        raise ContractViolation("star realization needs a *-closed subspace")
    probes = probes.symmetrized(v, settings)
    base = build_general(v, probes, settings)
    h = base.dim
    p = scipy.linalg.block_diag(base.P, base.Q).astype(np.complex128)
    u = np.block([[np.zeros((h, h)), np.eye(h)], [np.eye(h), np.zeros((h, h))]]).astype(np.complex128)
    frame = None
    if settings.solver.cutdown and h:
        frame = cutdown_frame(StarRealization(base, p, u), settings.tolerances.rank_cutoff)
        p = hermitian_part(dagger(frame) @ p @ frame)
        u = hermitian_part(dagger(frame) @ u @ frame)
        log.info(f"Cut down from dim {2 * h} to {frame.shape[1]}")
    return base, p, u, frame


def build_star(v: Subspace, probes: ProbeSet, settings: Optional[Settings] = None) -> StarRealization:
    """
    ``Ψ(A) = PUπ(A)P`` for a ``*``-closed subspace; probes are closed under adjoints first.

    Raises:
        ContractViolation: If ``v`` is not flagged ``star_closed``.
    """
    settings = settings or Settings()
    base, p, u, frame = _star_parts(v, probes, settings)
    return StarRealization(base, p, u, frame)


def build_system(v: Subspace, probes: ProbeSet, settings: Optional[Settings] = None) -> SystemRealization:
    """
    ``Ψ(A) = ½P[Z, π(A)]P`` for an operator system.

    Raises:
        ContractViolation: If ``1 ∉ V`` or ``V`` is not ``*``-closed.
    """
    settings = settings or Settings()
    if not v.contains_unit:
        raise ContractViolation("operator-system realization needs 1 in V")
    base, p, u, frame = _star_parts(v, probes, settings)
    return SystemRealization(base, p, u, frame)


def hat_projection(star: StarRealization, b: Subspace, rank_cutoff: float) -> np.ndarray:
    """Projection onto ``span{π(b_j)p_k}`` over a basis of ``B`` (plus 1) and of ``range P``."""
    p_basis = orthonormalize(list(star.P.T), tol=rank_cutoff, dim=star.dim)
    columns = []
    for elem in list(b.basis) + [AlgebraElement.unit(b.shape)]:
        columns.extend(list((star.represent(elem) @ p_basis).T))
    return hermitian_part(projection(orthonormalize(columns, tol=rank_cutoff, dim=star.dim)))


def build_subalgebra(b: Subspace, probes: ProbeSet, settings: Optional[Settings] = None) -> SubalgebraRealization:
    """
    ``Θ(A) = ½[iX, π(A)]`` for a unital C*-subalgebra ``B``.

    Raises:
        ContractViolation: If ``b`` is not flagged ``is_subalgebra``.
    """
    settings = settings or Settings()
    if not b.is_subalgebra:
        raise ContractViolation("derivation realization needs a unital C*-subalgebra")
    base, p, u, frame = _star_parts(b, probes, settings)
    star = StarRealization(base, p, u, frame)
    p_hat = hat_projection(star, b, settings.tolerances.rank_cutoff)
    log.info(f"Subalgebra realization: rank P = {_rank(p)}, rank P_hat = {_rank(p_hat)}, dim H = {star.dim}")
    return SubalgebraRealization(base, p, u, p_hat, frame)


BUILDERS = {
    "general": build_general,
    "star": build_star,
    "system": build_system,
    "subalgebra": build_subalgebra,
}


def build_realization(kind: str, v: Subspace, probes: ProbeSet, settings: Optional[Settings] = None) -> RealizationBase:
    if kind not in BUILDERS:
        raise ContractViolation(f"unknown realization kind '{kind}'")
    return BUILDERS[kind](v, probes, settings)


# ------------------ derived maps and checks ------------------
def derivation_residual(r: SubalgebraRealization, rng: np.random.Generator, trials: int = 200) -> float:
    """Largest ``‖Θ(ac) − Θ(a)π(c) − π(a)Θ(c)‖`` over random pairs."""
    worst = 0.0
    for _ in range(trials):
        a = AlgebraElement.random(r.shape, rng)
        c = AlgebraElement.random(r.shape, rng)
        lhs = r.apply(a @ c)
        rhs = r.apply(a) @ r.represent(c) + r.represent(a) @ r.apply(c)
        worst = max(worst, max_abs(lhs - rhs))
    return worst


def leibniz_seminorm(r: RealizationBase, a: Union[AlgebraElement, AmplifiedElement]) -> float:
    """
    ``L(a) = ‖Θ(a)‖`` (or ``‖Θ_n(C)‖`` for an element of ``M_n(A)``).

    Raises:
        ContractViolation: If ``r`` is not a subalgebra realization.
    """
    if not isinstance(r, SubalgebraRealization):
        raise ContractViolation("the Leibniz seminorm is defined by a subalgebra realization")
    if isinstance(a, AmplifiedElement):
        return r.norm_of(a)
    return spectral_norm(r.apply(a))


def leibniz_violation(r: SubalgebraRealization, rng: np.random.Generator, trials: int,
                      level: int = 1) -> float:
    """Largest ``L(ac) − L(a)‖c‖ − ‖a‖L(c)`` over random pairs at ``level``."""
    worst = -np.inf
    for _ in range(trials):
        a = AmplifiedElement.random(r.shape, level, rng)
        c = AmplifiedElement.random(r.shape, level, rng)
        if level == 1:
            a, c = a.entry(0, 0), c.entry(0, 0)
        lhs = leibniz_seminorm(r, a @ c)
        rhs = leibniz_seminorm(r, a) * c.norm() + a.norm() * leibniz_seminorm(r, c)
        worst = max(worst, lhs - rhs)
    return float(worst)


def leibniz_checks(r: SubalgebraRealization, settings: Settings) -> List[CheckResult]:
    rng = stream(settings.seed, "leibniz")
    tol = settings.tolerances.leibniz
    return [
        CheckResult.from_residual("leibniz.level1", max(0.0, leibniz_violation(r, rng, settings.leibniz_trials)), tol),
        CheckResult.from_residual("leibniz.level2",
                                  max(0.0, leibniz_violation(r, rng, max(1, settings.leibniz_trials // 10), 2)), tol),
        CheckResult.from_residual("leibniz.unit", leibniz_seminorm(r, AlgebraElement.unit(r.shape)),
                                  settings.tolerances.structural),
    ]


@dataclass
class JordanReport:
    """Outcome of the ``Ψ = PEπEP − PFπFP`` decomposition check."""
    E: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    min_eig_positive: float
    min_eig_negative: float
    checks: List[CheckResult]


def jordan_decomposition_check(r: StarRealization, tol: Optional[Tolerances] = None) -> JordanReport:
    """
    Split ``Ψ(A) = PUπ(A)P`` along the eigenprojections ``E, F`` of ``U``.

    Raises:
        ContractViolation: If ``r`` carries no ``U``.
    """
    tol = tol or Tolerances()
    if not isinstance(r, StarRealization):
        raise ContractViolation("the Jordan decomposition needs a realization with U")
    eye = np.eye(r.dim)
    e = 0.5 * (eye + r.U)
    f = 0.5 * (eye - r.U)

    def positive(a: AlgebraElement) -> np.ndarray:
        return r.P @ e @ r.represent(a) @ e @ r.P

    def negative(a: AlgebraElement) -> np.ndarray:
        return r.P @ f @ r.represent(a) @ f @ r.P

    min_pos = choi_min_eigenvalue(positive, r.shape)
    min_neg = choi_min_eigenvalue(negative, r.shape)
    reproduce = max((max_abs(positive(a) - negative(a) - r.star_apply(a)) for a in r.shape.basis()), default=0.0)
    checks = [
        CheckResult.from_residual("jordan.E_plus_F", max_abs(e + f - eye), tol.star_map),
        CheckResult.from_residual("jordan.E_minus_F", max_abs(e - f - r.U), tol.star_map),
        CheckResult.from_residual("jordan.positive_part_choi", max(0.0, -min_pos), tol.choi_psd),
        CheckResult.from_residual("jordan.negative_part_choi", max(0.0, -min_neg), tol.choi_psd),
        CheckResult.from_residual("jordan.reproduces_map", reproduce, tol.structural),
    ]
    return JordanReport(e, f, min_pos, min_neg, checks)


@dataclass
class IsometryReport:
    checks: List[CheckResult]
    slack: List[Dict]
    span: List[Dict]


def _span_samples(probes: ProbeSet, v: Subspace, settings: Settings, count: int) -> List[Tuple[AmplifiedElement, int]]:
    rng = stream(settings.seed, "span")
    out = []
    for n in probes.levels:
        members = [p for p in probes.at_level(n) if p.certified.certificate is not None]
        if not members:
            continue
        basis = amplify_subspace(v, n)
        for _ in range(count):
            picks = rng.choice(len(members), size=min(2, len(members)), replace=False)
            coef = rng.standard_normal(len(picks)) + 1j * rng.standard_normal(len(picks))
            d = combine_amplified(basis, rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis)),
                                  shape=v.shape, level=n)
            e = d
            for z, k in zip(coef, picks):
                e = e + complex(z) * members[int(k)].element
            out.append((e, n))
    return out


def verify_complete_isometry(r: RealizationBase, v: Subspace, probes: ProbeSet,
                             settings: Optional[Settings] = None, extra_held_out: int = 0) -> IsometryReport:
    """
    Truncated complete-isometry check.

    Probe deviations and held-out overshoot are binding; held-out deficits and
    span-exactness deviations are measured and reported only.

    Args:
        r (RealizationBase): Any realization.
        v (Subspace): The subspace it realizes ``A/V`` for.
        probes (ProbeSet): The certified probes it was built from.
        settings (Optional[Settings]): Levels, held-out counts and tolerances.
        extra_held_out (int): Additional held-out elements on top of the settings.

    Returns:
        IsometryReport: Checks plus the slack and span tables.
    """
    settings = settings or Settings()
    tol = settings.tolerances
    checks: List[CheckResult] = []
    for n in probes.levels:
        dev = max(abs(r.norm_of(p.element) - p.value) / max(1.0, p.value) for p in probes.at_level(n))
        checks.append(CheckResult.from_residual(f"isometry.probes.level{n}", dev, tol.probe_exactness))
    checks.extend(r.probe_checks(probes, tol))
    checks.append(CheckResult.from_residual("isometry.cross_duality", cross_duality_residual(probes), tol.duality_gap))

    rng = stream(settings.seed, "held_out")
    slack = []
    overshoot = 0.0
    for k in range(settings.held_out + extra_held_out):
        n = 1 + k % max(1, settings.levels)
        c = AmplifiedElement.random(v.shape, n, rng, hermitian=bool(k % 2) and r.is_star_map)
        q = quotient_norm(c, v, settings).value
        got = r.norm_of(c)
        overshoot = max(overshoot, (got - q) / max(1.0, q))
        slack.append({"level": n, "quotient": float(q), "realized": float(got), "deficit": float(q - got)})
    checks.append(CheckResult.from_residual("isometry.held_out.overshoot", max(0.0, overshoot), tol.overshoot))

    span = []
    worst_span = 0.0
    for e, n in _span_samples(probes, v, settings, settings.held_out_span):
        q = quotient_norm(e, v, settings).value
        got = r.norm_of(e)
        worst_span = max(worst_span, abs(got - q))
        span.append({"level": n, "quotient": float(q), "realized": float(got), "deviation": float(abs(got - q))})
    if span:
        checks.append(CheckResult.from_residual("isometry.span.max_deviation", worst_span, tol.probe_exactness,
                                                binding=False))
    return IsometryReport(checks, slack, span)


def invariant_suite(r: RealizationBase, v: Subspace, probes: ProbeSet, settings: Optional[Settings] = None,
                    extra_held_out: int = 0) -> IsometryReport:
    """Every check that applies to the kind of ``r``, in a fixed order."""
    settings = settings or Settings()
    tol = settings.tolerances
    checks = r.structural_checks(v, tol, stream(settings.seed, "derivation"))
    checks.extend(r.common_checks(v, tol, stream(settings.seed, "contractivity")))
    if isinstance(r, StarRealization):
        checks.extend(jordan_decomposition_check(r, tol).checks)
    if isinstance(r, SubalgebraRealization):
        checks.extend(leibniz_checks(r, settings))
    iso = verify_complete_isometry(r, v, probes, settings, extra_held_out)
    return IsometryReport(checks + iso.checks, iso.slack, iso.span)


def member_checks(r: GeneralRealization, v: Subspace, tol: Tolerances) -> List[CheckResult]:
    """Per-functional GNS invariants (available right after a build)."""
    worst = {"reconstruction": 0.0, "rank": 0, "annihilation": 0.0, "vector_norm": 0.0}
    for m in r.members:
        res = m.invariant_residuals(v)
        worst["reconstruction"] = max(worst["reconstruction"], reconstruction_residual(m))
        worst["rank"] = max(worst["rank"], res["rank_P_excess"], res["rank_Q_excess"])
        worst["annihilation"] = max(worst["annihilation"], res["annihilation"])
        worst["vector_norm"] = max(worst["vector_norm"], res["xi_norm"], res["eta_norm"])
    return [
        CheckResult.from_residual("gns.reconstruction", worst["reconstruction"], tol.reconstruction),
        CheckResult.from_residual("gns.rank_excess", worst["rank"], 0),
        CheckResult.from_residual("gns.annihilation", worst["annihilation"], tol.annihilation),
        CheckResult.from_residual("gns.vector_norm", worst["vector_norm"], tol.certificate_norm),
    ]
