import numpy as np
import pytest
import scipy.linalg

from opquot.algebra import AlgebraElement, AlgebraShape, AmplifiedElement, Subspace
from opquot.config import ProbeSettings, Settings, SolverSettings
from opquot.errors import ContractViolation
from opquot.matrix_core import dagger, random_unitary, spectral_norm
from opquot.realization import (GeneralRealization, ProbeSet, StarRealization, SubalgebraRealization,
                                SystemRealization, build_general, build_star, build_subalgebra, build_system,
                                certify_probes, cross_duality_residual, invariant_suite, jordan_decomposition_check,
                                leibniz_seminorm, leibniz_violation, make_probes, member_checks,
                                verify_complete_isometry)


def failing(checks):
    return [(c.name, c.residual, c.tolerance) for c in checks if c.binding and not c.passed]


@pytest.fixture
def m2():
    return AlgebraShape((2,))


@pytest.fixture
def small():
    return Settings(levels=1, probes=ProbeSettings(include_basis=True, random=1, hermitian=1),
                    held_out=3, held_out_span=1, leibniz_trials=20)


@pytest.fixture
def diag_probe(m2):
    return AmplifiedElement.from_element(AlgebraElement(m2, (np.diag([1.0, -1.0]).astype(complex),)))


# ---------- probes ----------
class TestProbes:

    def test_generation_counts(self, m2):
        probes = make_probes(Subspace.zero(m2), Settings(levels=1, probes=ProbeSettings(symmetrize=False)))
        # 4 matrix units, one random, one random Hermitian
        assert len(probes) == 6
        assert {p.origin for p in probes} == {"basis", "random", "hermitian"}

    def test_symmetrized_adds_missing_adjoints(self, m2, small):
        probes = make_probes(Subspace.scalars(m2), small)
        for p in probes:
            assert probes.contains(p.element.adjoint())

    def test_generation_is_seeded(self, m2, small):
        a = make_probes(Subspace.scalars(m2), small)
        b = make_probes(Subspace.scalars(m2), small)
        assert [p.value for p in a] == [p.value for p in b]

    def test_cross_duality(self, m2, small):
        probes = make_probes(Subspace.scalars(m2), small)
        assert cross_duality_residual(probes) <= 1e-5

    def test_dicts_are_plain(self, m2, small):
        rows = make_probes(Subspace.scalars(m2), small).to_dicts()
        assert all(isinstance(r["value"], float) for r in rows)


# ---------- general ----------
class TestGeneral:

    def test_worked_example(self, m2, small, diag_probe):
        probes = certify_probes([("explicit", diag_probe)], Subspace.scalars(m2), small)
        r = build_general(Subspace.scalars(m2), probes, small)
        assert isinstance(r, GeneralRealization)
        assert r.dim == 4
        assert r.norm_of(diag_probe) == pytest.approx(1.0, abs=1e-6)

    def test_non_star_subspace_suite(self, m2, small):
        v = Subspace(m2, (AlgebraElement.matrix_unit(m2, 0, 0, 1),))
        probes = make_probes(v, small)
        r = build_general(v, probes, small)
        suite = invariant_suite(r, v, probes, small)
        assert failing(suite.checks) == []
        assert failing(member_checks(r, v, small.tolerances)) == []
        assert "map.star" not in {c.name for c in suite.checks}

    def test_full_algebra_is_zero_dimensional(self, m2, small):
        v = Subspace.full(m2)
        probes = make_probes(v, small)
        r = build_general(v, probes, small)
        assert r.dim == 0
        assert failing(invariant_suite(r, v, probes, small).checks) == []

    def test_missing_certificate_is_rejected(self, m2, small, diag_probe):
        probes = certify_probes([("explicit", diag_probe)], Subspace.scalars(m2), small)
        p = probes.probes[0]
        broken = ProbeSet((type(p)(p.element, type(p.certified)(p.value, p.certified.minimizer, None, 0.0, 1),
                                   "explicit"),))
        with pytest.raises(ContractViolation):
            build_general(Subspace.scalars(m2), broken, small)


# ---------- star ----------
class TestStar:

    @pytest.fixture
    def built(self, m2, small):
        v = Subspace.scalars(m2)
        probes = make_probes(v, small)
        return v, probes, build_star(v, probes, small)

    def test_kind_and_dimension(self, built):
        _, _, r = built
        assert isinstance(r, StarRealization)
        assert r.dim == 2 * r.base.dim

    def test_star_map(self, built, m2):
        _, _, r = built
        a = AlgebraElement.random(m2, np.random.default_rng(0))
        assert np.abs(r.apply(a.adjoint()) - dagger(r.apply(a))).max() <= 1e-12

    def test_swap_form(self, built, m2):
        _, _, r = built
        a = AlgebraElement.random(m2, np.random.default_rng(1))
        assert np.abs(r.swap_form(a) - r.apply(a)).max() <= 1e-10

    def test_suite_passes(self, built, small):
        v, probes, r = built
        assert failing(invariant_suite(r, v, probes, small).checks) == []

    def test_jordan_decomposition(self, built, small):
        _, _, r = built
        report = jordan_decomposition_check(r, small.tolerances)
        assert report.min_eig_positive >= -1e-9
        assert report.min_eig_negative >= -1e-9
        assert failing(report.checks) == []

    def test_requires_star_closed(self, m2, small):
        v = Subspace(m2, (AlgebraElement.matrix_unit(m2, 0, 0, 1),))
        with pytest.raises(ContractViolation):
            build_star(v, ProbeSet(), small)

    def test_cutdown_is_smaller_and_exact(self, m2, small):
        cut = Settings(levels=1, probes=small.probes, held_out=2, held_out_span=1, leibniz_trials=20,
                       solver=SolverSettings(cutdown=True))
        v = Subspace.scalars(m2)
        probes = make_probes(v, cut)
        r = build_star(v, probes, cut)
        assert r.frame is not None
        assert r.dim <= 2 * r.base.dim
        assert failing(invariant_suite(r, v, probes, cut).checks) == []

    def test_leibniz_needs_subalgebra_realization(self, built, m2):
        _, _, r = built
        with pytest.raises(ContractViolation):
            leibniz_seminorm(r, AlgebraElement.unit(m2))


# ---------- operator systems ----------
class TestSystem:

    @pytest.fixture
    def system(self, m2):
        one = AlgebraElement.unit(m2)
        x = AlgebraElement(m2, (np.array([[0, 1], [1, 0]], dtype=complex),))
        return Subspace.detect(m2, [one, x])

    def test_suite_passes(self, system, small):
        probes = make_probes(system, small)
        r = build_system(system, probes, small)
        assert isinstance(r, SystemRealization)
        assert failing(invariant_suite(r, system, probes, small).checks) == []

    def test_z_is_skew_contraction(self, system, small):
        r = build_system(system, make_probes(system, small), small)
        z = r.Z
        assert np.abs(z + dagger(z)).max() <= 1e-12
        assert spectral_norm(z) <= 1.0 + 1e-10

    def test_formula_matches_star_map(self, system, small, m2):
        r = build_system(system, make_probes(system, small), small)
        a = AlgebraElement.random(m2, np.random.default_rng(2))
        assert np.abs(r.apply(a) - r.star_apply(a)).max() <= 1e-10

    def test_requires_unit(self, m2, small):
        with pytest.raises(ContractViolation):
            build_system(Subspace.zero(m2), ProbeSet(), small)


# ---------- C*-subalgebras ----------
class TestSubalgebra:

    @pytest.fixture
    def built(self, m2, small):
        b = Subspace.diagonal(m2)
        probes = make_probes(b, small)
        return b, probes, build_subalgebra(b, probes, small)

    def test_theta_vanishes_on_b(self, built, m2):
        _, _, r = built
        assert isinstance(r, SubalgebraRealization)
        for i in range(2):
            assert np.abs(r.apply(AlgebraElement.matrix_unit(m2, 0, i, i))).max() <= 1e-10

    def test_derivation_identity(self, built, m2):
        _, _, r = built
        rng = np.random.default_rng(3)
        a = AlgebraElement.random(m2, rng)
        c = AlgebraElement.random(m2, rng)
        lhs = r.apply(a @ c)
        rhs = r.apply(a) @ r.represent(c) + r.represent(a) @ r.apply(c)
        assert np.abs(lhs - rhs).max() <= 1e-10

    def test_leibniz_seminorm_is_quotient_norm_on_probes(self, built):
        _, probes, r = built
        for p in probes:
            assert leibniz_seminorm(r, p.element) == pytest.approx(p.value, abs=1e-5)

    def test_leibniz_on_off_diagonal(self, built, m2):
        _, _, r = built
        e12 = AlgebraElement.matrix_unit(m2, 0, 0, 1)
        assert leibniz_seminorm(r, e12) == pytest.approx(1.0, abs=1e-5)
        assert leibniz_seminorm(r, AlgebraElement.unit(m2)) <= 1e-12

    def test_sandwich_and_hatted(self, built, small):
        b, probes, r = built
        assert failing(r.probe_checks(probes, small.tolerances)) == []
        for p in probes:
            assert spectral_norm(r.hatted_amplified(p.element)) >= p.value - 1e-5

    def test_suite_passes(self, built, small):
        b, probes, r = built
        suite = invariant_suite(r, b, probes, small)
        assert failing(suite.checks) == []
        names = {c.name for c in suite.checks}
        assert {"subalgebra.cp_average_choi", "leibniz.level2", "jordan.reproduces_map"} <= names

    def test_requires_subalgebra(self, m2, small):
        one = AlgebraElement.unit(m2)
        x = AlgebraElement(m2, (np.array([[0, 1], [1, 0]], dtype=complex),))
        z = AlgebraElement(m2, (np.diag([1.0, -1.0]).astype(complex),))
        with pytest.raises(ContractViolation):
            build_subalgebra(Subspace.detect(m2, [one, x, z]), ProbeSet(), small)


# ---------- truncated isometry ----------
def test_extra_held_out_fills_slack_table(m2, small):
    v = Subspace.scalars(m2)
    probes = make_probes(v, small)
    r = build_star(v, probes, small)
    report = verify_complete_isometry(r, v, probes, small, extra_held_out=2)
    assert len(report.slack) == small.held_out + 2
    assert all(row["deficit"] >= -1e-8 for row in report.slack)
    assert failing(report.checks) == []


def test_level_two_probes(m2):
    run = Settings(levels=2, probes=ProbeSettings(include_basis=False, random=1, hermitian=0),
                   held_out=2, held_out_span=1, leibniz_trials=10)
    b = Subspace.diagonal(m2)
    probes = make_probes(b, run)
    assert probes.levels == [1, 2]
    r = build_subalgebra(b, probes, run)
    assert failing(verify_complete_isometry(r, b, probes, run).checks) == []


def rank(m):
    return int(np.linalg.matrix_rank(m, tol=1e-9))


def test_general_direct_sum_adds_ranks(m2, small, diag_probe):
    level_two = AmplifiedElement.random(m2, 2, np.random.default_rng(14))
    probes = certify_probes([("explicit", diag_probe), ("explicit", level_two)], Subspace.scalars(m2), small)
    r = build_general(Subspace.scalars(m2), probes, small)
    assert len(r.members) == 2
    assert [m.level for m in r.members] == [1, 2]
    assert r.rep.multiplicities == tuple(sum(ms) for ms in zip(*(m.rep.multiplicities for m in r.members)))
    assert rank(r.P) == sum(rank(m.P) for m in r.members)
    assert rank(r.Q) == sum(rank(m.Q) for m in r.members)
    assert r.norm_of(level_two) == pytest.approx(probes.probes[1].value, abs=1e-5)


def test_jordan_split_with_trivial_symmetry(m2, small):
    v = Subspace.scalars(m2)
    base = build_general(v, make_probes(v, small), small)
    p = scipy.linalg.block_diag(base.P, base.Q)
    r = StarRealization(base, p, np.eye(2 * base.dim))
    report = jordan_decomposition_check(r, small.tolerances)
    assert np.abs(report.F).max() == 0.0
    assert report.min_eig_negative == pytest.approx(0.0, abs=1e-12)
    assert failing(report.checks) == []


def test_leibniz_inequality_on_many_pairs(m2, small):
    b = Subspace.diagonal(m2)
    r = build_subalgebra(b, make_probes(b, small), small)
    assert leibniz_violation(r, np.random.default_rng(15), 1000) <= 1e-9


def test_default_run_checks_many_leibniz_pairs():
    assert Settings().leibniz_trials == 1000


# ---------- seeded sweeps ----------
SWEEP = Settings(levels=2, probes=ProbeSettings(include_basis=False, random=1, hermitian=1),
                 held_out=3, held_out_span=1, leibniz_trials=50)

SHAPES = [(1,), (2,), (1, 1), (2, 1), (2, 2)]


def unit_matrix(d, p, q):
    e = np.zeros((d, d), dtype=complex)
    e[p, q] = 1.0
    return e


def random_subalgebra(seed):
    """Unitarily rotated copies of familiar subalgebras, one variant per seed."""
    rng = np.random.default_rng(3000 + seed)
    if seed in (0, 1):
        d = 2 + seed
        shape = AlgebraShape((d,))
        u = random_unitary(d, rng)
        gens = [AlgebraElement(shape, (u @ unit_matrix(d, k, k) @ dagger(u),)) for k in range(d)]
    elif seed == 2:
        shape = AlgebraShape((2, 2))
        u = random_unitary(2, rng)
        gens = [AlgebraElement(shape, (unit_matrix(2, p, q), u @ unit_matrix(2, p, q) @ dagger(u)))
                for p in range(2) for q in range(2)]
    elif seed == 3:
        shape = AlgebraShape((1, 2))
        u = random_unitary(2, rng)
        gens = [AlgebraElement(shape, (np.eye(1, dtype=complex), u @ unit_matrix(2, 0, 0) @ dagger(u))),
                AlgebraElement(shape, (np.zeros((1, 1), dtype=complex), u @ unit_matrix(2, 1, 1) @ dagger(u)))]
    else:
        shape = AlgebraShape((3,))
        u = random_unitary(3, rng)
        corners = [(0, 0)] + [(p, q) for p in (1, 2) for q in (1, 2)]
        gens = [AlgebraElement(shape, (u @ unit_matrix(3, p, q) @ dagger(u),)) for p, q in corners]
    return Subspace(shape, tuple(gens), is_subalgebra=True)


@pytest.mark.parametrize("seed", range(20))
def test_random_operator_systems(seed):
    rng = np.random.default_rng(4000 + seed)
    shape = AlgebraShape(SHAPES[int(rng.integers(len(SHAPES)))])
    v = Subspace.detect(shape, [AlgebraElement.unit(shape), AlgebraElement.random(shape, rng, hermitian=True)])
    if v.spans_algebra():
        pytest.skip("V is all of A")
    run = Settings(levels=2, seed=seed, held_out=3, held_out_span=1, leibniz_trials=50)
    probes = make_probes(v, run)
    r = build_system(v, probes, run)
    assert failing(member_checks(r.base, v, run.tolerances)) == []
    assert failing(invariant_suite(r, v, probes, run).checks) == []


@pytest.mark.parametrize("seed", range(20))
def test_random_star_closed_subspaces(seed):
    rng = np.random.default_rng(5000 + seed)
    shape = AlgebraShape([(2,), (3,), (1, 2), (2, 2)][seed % 4])
    count = 1 + seed % 2
    v = Subspace.detect(shape, [AlgebraElement.random(shape, rng, hermitian=True) for _ in range(count)])
    assert v.star_closed
    probes = make_probes(v, SWEEP)
    r = build_star(v, probes, SWEEP)
    report = jordan_decomposition_check(r, SWEEP.tolerances)
    assert failing(report.checks) == []
    assert failing(invariant_suite(r, v, probes, SWEEP).checks) == []


@pytest.mark.parametrize("seed", range(5))
def test_random_subalgebras(seed):
    b = random_subalgebra(seed)
    assert Subspace.detect(b.shape, list(b.basis)).is_subalgebra
    probes = make_probes(b, SWEEP)
    r = build_subalgebra(b, probes, SWEEP)
    assert failing(invariant_suite(r, b, probes, SWEEP).checks) == []
    assert leibniz_violation(r, np.random.default_rng(seed), 1000) <= 1e-9


def test_repeated_diagonal_subalgebra():
    shape = AlgebraShape((2, 2))
    gens = [AlgebraElement(shape, (unit_matrix(2, k, k), unit_matrix(2, k, k))) for k in range(2)]
    b = Subspace(shape, tuple(gens), is_subalgebra=True)
    run = Settings(levels=2, probes=ProbeSettings(random=1, hermitian=1))
    probes = make_probes(b, run)
    r = build_subalgebra(b, probes, run)
    assert failing(invariant_suite(r, b, probes, run).checks) == []


def test_base_module_shares_package_types():
    import opquot.algebra
    import importlib
    base_module = importlib.import_module("opquot.RealizationBase")
    assert base_module.Subspace is opquot.algebra.Subspace
    assert base_module.AlgebraElement is opquot.algebra.AlgebraElement
