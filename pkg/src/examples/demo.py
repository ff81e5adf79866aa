import numpy as np

from opquot import (AlgebraElement, AlgebraShape, AmplifiedElement, Settings, Subspace, build_realization,
                    invariant_suite, make_probes, quotient_norm)


def main() -> None:
    """
    Example for using the opquot package.

    Computes ‖diag(1, -1)‖ in M2 modulo the scalars, then builds the
    operator-system realization and prints its invariant checks.
    """
    m2 = AlgebraShape((2,))
    v = Subspace.scalars(m2)
    settings = Settings(levels=1)

    c = AmplifiedElement.from_element(AlgebraElement(m2, (np.diag([1.0, -1.0]).astype(complex),)))
    result = quotient_norm(c, v, settings)
    print(f"Quotient norm: {result.value:.6f} (duality gap {result.duality_gap:.1e})")
    print(f"Norming functional:\n{np.round(result.certificate.blocks[0], 6)}")

    probes = make_probes(v, settings, [c])
    r = build_realization("system", v, probes, settings)
    print(f"Realization on a Hilbert space of dimension {r.dim}")
    print(f"Realized norm of the probe: {r.norm_of(c):.6f}")

    suite = invariant_suite(r, v, probes, settings)
    for check in suite.checks:
        status = "ok " if check.passed else "BAD"
        print(f"  [{status}] {check.name}: {check.residual:.2e} (tol {check.tolerance:.0e})")


if __name__ == "__main__":
    main()
