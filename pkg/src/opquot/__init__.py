"""
opquot
------

Concrete realizations of quotient operator spaces ``A/V`` for finite-dimensional
C*-algebras ``A``, with certified quotient norms and invariant checks.
"""

from .config import Settings, load_config
from .algebra import AlgebraElement, AlgebraShape, AmplifiedElement, Subspace, cstar_norm
from .quotient import CertifiedNorm, Functional, quotient_norm
from .oracle import oracle_quotient_norm
from .gns import GnsData, gns_from_functional
from .RealizationBase import RealizationBase
from .realization import (
    GeneralRealization,
    ProbeSet,
    StarRealization,
    SubalgebraRealization,
    SystemRealization,
    build_general,
    build_realization,
    build_star,
    build_subalgebra,
    build_system,
    invariant_suite,
    jordan_decomposition_check,
    leibniz_seminorm,
    make_probes,
    verify_complete_isometry,
)

__all__ = [
    "Settings",
    "load_config",
    "AlgebraElement",
    "AlgebraShape",
    "AmplifiedElement",
    "Subspace",
    "cstar_norm",
    "CertifiedNorm",
    "Functional",
    "quotient_norm",
    "oracle_quotient_norm",
    "GnsData",
    "gns_from_functional",
    "RealizationBase",
    "GeneralRealization",
    "StarRealization",
    "SystemRealization",
    "SubalgebraRealization",
    "ProbeSet",
    "make_probes",
    "build_general",
    "build_realization",
    "build_star",
    "build_system",
    "build_subalgebra",
    "invariant_suite",
    "leibniz_seminorm",
    "jordan_decomposition_check",
    "verify_complete_isometry",
]
