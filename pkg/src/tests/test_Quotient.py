import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from opquot import quotient as quotient_module
from opquot.algebra import AlgebraElement, AlgebraShape, AmplifiedElement, Subspace, amplify_subspace, cstar_norm
from opquot.config import Settings, Tolerances
from opquot.errors import ContractViolation, ShapeMismatchError
from opquot.oracle import oracle_quotient_norm
from opquot.quotient import Functional, polish_functional, quotient_norm, weak_duality_excess


@pytest.fixture
def m2():
    return AlgebraShape((2,))


@pytest.fixture
def run_settings():
    return Settings()


def lift(shape, *blocks):
    return AmplifiedElement.from_element(AlgebraElement(shape, tuple(np.asarray(b, dtype=complex) for b in blocks)))


class TestWorkedExample:
    """diag(1, -1) modulo the scalars in M2."""

    @pytest.fixture
    def result(self, m2, run_settings):
        return quotient_norm(lift(m2, np.diag([1.0, -1.0])), Subspace.scalars(m2), run_settings)

    def test_value(self, result):
        assert result.value == pytest.approx(1.0, abs=1e-6)

    def test_minimizer_is_near_zero(self, result):
        assert np.abs(result.minimizer).max() <= 1e-5

    def test_certificate_is_half_difference(self, result):
        t = result.certificate.blocks[0]
        assert np.allclose(t, np.diag([0.5, -0.5]), atol=1e-6)

    def test_certificate_equalities(self, result, m2):
        psi = result.certificate
        assert psi.norm() == pytest.approx(1.0, abs=1e-6)
        assert abs(psi(lift(m2, np.eye(2)))) <= 1e-8
        assert psi(lift(m2, np.diag([1.0, -1.0]))).real == pytest.approx(1.0, abs=1e-6)

    def test_check_rows_all_pass(self, result, m2, run_settings):
        rows = result.check(lift(m2, np.diag([1.0, -1.0])), Subspace.scalars(m2), run_settings)
        assert all(passed for _, _, _, passed in rows)


def test_diagonal_subspace_leaves_off_diagonal_norm(m2, run_settings):
    c = lift(m2, [[0.3, 2.0], [-0.5j, 1.7]])
    result = quotient_norm(c, Subspace.diagonal(m2), run_settings)
    assert result.value == pytest.approx(2.0, abs=1e-6)
    assert result.duality_gap <= 1e-5


def test_zero_subspace_gives_cstar_norm(m2, run_settings):
    c = AmplifiedElement.random(m2, 2, np.random.default_rng(4))
    result = quotient_norm(c, Subspace.zero(m2), run_settings)
    assert result.value == pytest.approx(cstar_norm(c), rel=1e-12)
    assert result.certificate.norm() == pytest.approx(1.0, abs=1e-9)
    assert result.certificate(c).real == pytest.approx(cstar_norm(c), rel=1e-9)


def test_full_subspace_gives_zero_without_certificate(m2, run_settings):
    c = AmplifiedElement.random(m2, 1, np.random.default_rng(5))
    result = quotient_norm(c, Subspace.full(m2), run_settings)
    assert result.value == 0.0
    assert result.certificate is None


def test_element_of_subspace_has_zero_value(m2, run_settings):
    result = quotient_norm(lift(m2, 3.0 * np.eye(2)), Subspace.scalars(m2), run_settings)
    assert result.value <= 1e-6


def test_level_two_certificate_annihilates_amplified_subspace(m2, run_settings):
    v = Subspace.scalars(m2)
    c = AmplifiedElement.random(m2, 2, np.random.default_rng(6))
    result = quotient_norm(c, v, run_settings)
    assert result.level == 2
    assert result.certificate.annihilation_residual(v) <= 1e-8
    assert result.value <= cstar_norm(c) + 1e-12


def test_block_algebra(run_settings):
    shape = AlgebraShape((1, 2))
    v = Subspace.scalars(shape)
    c = lift(shape, [[1.0]], [[-1.0, 0.0], [0.0, 0.0]])
    # c − λ·1 has norm max(|1 − λ|, |1 + λ|, |λ|), minimised at λ = 0
    assert quotient_norm(c, v, run_settings).value == pytest.approx(1.0, abs=1e-6)


def test_dual_program_fallback(monkeypatch, m2, run_settings):
    monkeypatch.setattr(quotient_module, "_pair_candidate", lambda *args, **kwargs: None)
    c = lift(m2, [[0.3, 2.0], [-0.5j, 1.7]])
    result = quotient_norm(c, Subspace.diagonal(m2), run_settings)
    assert result.value == pytest.approx(2.0, abs=1e-6)
    assert result.certificate.annihilation_residual(Subspace.diagonal(m2)) <= 1e-8


def test_shape_mismatch(m2, run_settings):
    c = lift(AlgebraShape((1,)), [[1.0]])
    with pytest.raises(ShapeMismatchError):
        quotient_norm(c, Subspace.scalars(m2), run_settings)


# ---------- weak duality ----------
def test_weak_duality_with_foreign_certificate(m2, run_settings):
    v = Subspace.scalars(m2)
    rng = np.random.default_rng(7)
    c1 = AmplifiedElement.random(m2, 1, rng)
    c2 = AmplifiedElement.random(m2, 1, rng)
    psi = quotient_norm(c1, v, run_settings).certificate
    assert weak_duality_excess(c2, v, psi, run_settings) <= 1e-6


def test_weak_duality_rejects_non_annihilating(m2, run_settings):
    psi = Functional(m2, 1, (np.eye(2) / 2,))
    with pytest.raises(ContractViolation):
        weak_duality_excess(lift(m2, np.eye(2)), Subspace.scalars(m2), psi, run_settings)


@hyp_settings(max_examples=8, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31))
def test_quotient_bounded_by_norm_and_attained(seed):
    shape = AlgebraShape((2,))
    v = Subspace.diagonal(shape)
    c = AmplifiedElement.random(shape, 1, np.random.default_rng(seed))
    result = quotient_norm(c, v, Settings())
    assert result.value <= cstar_norm(c) + 1e-12
    if result.certificate is not None:
        assert result.certificate(c).real >= result.value - 1e-5 * max(1.0, result.value)


# ---------- oracle ----------
class TestOracle:
    """The brute-force estimate agrees with the conic route."""

    @pytest.mark.parametrize("seed", [0, 1])
    def test_agrees_at_level_one(self, m2, run_settings, seed):
        v = Subspace.scalars(m2)
        c = AmplifiedElement.random(m2, 1, np.random.default_rng(seed))
        est = oracle_quotient_norm(c, v, run_settings)
        exact = quotient_norm(c, v, run_settings).value
        assert est.certified
        assert abs(est.value - exact) <= 1e-4 * max(1.0, exact)

    def test_agrees_at_level_two(self, m2, run_settings):
        v = Subspace.scalars(m2)
        c = AmplifiedElement.random(m2, 2, np.random.default_rng(11))
        est = oracle_quotient_norm(c, v, run_settings)
        exact = quotient_norm(c, v, run_settings).value
        assert abs(est.value - exact) <= 1e-4 * max(1.0, exact)

    def test_zero_subspace_is_exact(self, m2, run_settings):
        c = AmplifiedElement.random(m2, 1, np.random.default_rng(2))
        est = oracle_quotient_norm(c, Subspace.zero(m2), run_settings)
        assert est.value == pytest.approx(cstar_norm(c))
        assert est.evaluations == 0

    def test_parameter_limit(self, m2, run_settings):
        c = AmplifiedElement.random(m2, 4, np.random.default_rng(3))
        with pytest.raises(ContractViolation):
            oracle_quotient_norm(c, Subspace.diagonal(m2), run_settings)

    def test_tiny_budget_is_flagged(self, m2, run_settings):
        c = AmplifiedElement.random(m2, 1, np.random.default_rng(4))
        est = oracle_quotient_norm(c, Subspace.scalars(m2), run_settings, budget=5)
        assert not est.certified
        assert est.value >= quotient_norm(c, Subspace.scalars(m2), run_settings).value - 1e-9


# ---------- seminorm properties ----------
class TestSeminorm:
    """The quotient norm is a seminorm that only shrinks as the subspace grows."""

    @pytest.fixture
    def pair(self, m2):
        rng = np.random.default_rng(21)
        return AmplifiedElement.random(m2, 2, rng), AmplifiedElement.random(m2, 2, rng)

    def test_homogeneity(self, m2, run_settings, pair):
        c, _ = pair
        v = Subspace.scalars(m2)
        z = 2.5 - 1.0j
        base = quotient_norm(c, v, run_settings).value
        scaled = quotient_norm(c * z, v, run_settings).value
        assert scaled == pytest.approx(abs(z) * base, abs=1e-6 * max(1.0, scaled))

    def test_triangle_inequality(self, m2, run_settings, pair):
        c1, c2 = pair
        v = Subspace.scalars(m2)
        total = quotient_norm(c1 + c2, v, run_settings).value
        parts = quotient_norm(c1, v, run_settings).value + quotient_norm(c2, v, run_settings).value
        assert total <= parts + 1e-6

    @pytest.mark.parametrize("make_subspace", [Subspace.scalars, Subspace.diagonal])
    def test_adjoint_invariance_for_star_closed(self, m2, run_settings, pair, make_subspace):
        c, _ = pair
        v = make_subspace(m2)
        assert v.star_closed
        direct = quotient_norm(c, v, run_settings).value
        adjoint = quotient_norm(c.adjoint(), v, run_settings).value
        assert adjoint == pytest.approx(direct, abs=1e-6 * max(1.0, direct))

    def test_monotone_in_the_subspace(self, m2, run_settings, pair):
        c, _ = pair
        chain = [Subspace.zero(m2), Subspace.scalars(m2), Subspace.diagonal(m2), Subspace.full(m2)]
        values = [quotient_norm(c, v, run_settings).value for v in chain]
        for larger, smaller in zip(values, values[1:]):
            assert smaller <= larger + 1e-6


# ---------- seeded sweep against the oracle ----------
def random_instance(seed):
    """At most two blocks of size at most 3, dim V at most 4, level 1 or 2."""
    rng = np.random.default_rng(1000 + seed)
    dims = tuple(int(d) for d in rng.integers(1, 4, size=int(rng.integers(1, 3))))
    shape = AlgebraShape(dims)
    dim_v = int(rng.integers(1, min(4, shape.dimension - 1) + 1)) if shape.dimension > 1 else 0
    v = Subspace.detect(shape, [AlgebraElement.random(shape, rng) for _ in range(dim_v)])
    level = int(rng.integers(1, 3))
    return AmplifiedElement.random(shape, level, rng), v


@pytest.mark.parametrize("seed", range(50))
def test_random_instances_match_oracle(seed, run_settings):
    c, v = random_instance(seed)
    result = quotient_norm(c, v, run_settings)
    assert result.duality_gap <= 1e-5 * max(1.0, result.value)
    assert all(passed for _, _, _, passed in result.check(c, v, run_settings))
    est = oracle_quotient_norm(c, v, run_settings)
    assert abs(est.value - result.value) <= 1e-4 * max(1.0, result.value)


# ---------- polishing ----------
class TestPolishing:
    """Certificates are cleaned of singular values below the floor."""

    @pytest.fixture
    def m3(self):
        return AlgebraShape((3,))

    @pytest.fixture
    def noisy(self, m3):
        v = Subspace.scalars(m3)
        c = lift(m3, np.diag([1.0, -1.0, 0.0]))
        return c, v, [np.diag([0.5, -0.5, 1e-8]).astype(complex)]

    def test_fine_floor_keeps_the_tail(self, noisy):
        c, v, blocks = noisy
        psi = polish_functional(blocks, c, amplify_subspace(v, 1), floor=1e-9)
        assert np.linalg.svd(psi.blocks[0], compute_uv=False)[-1] > 1e-9

    def test_certificate_floor_removes_the_tail(self, noisy):
        c, v, blocks = noisy
        psi = polish_functional(blocks, c, amplify_subspace(v, 1), floor=1e-6)
        assert np.linalg.svd(psi.blocks[0], compute_uv=False)[-1] <= 1e-12
        assert psi.annihilation_residual(v) <= 1e-12
        assert psi.norm() == pytest.approx(1.0)
        assert psi(c).real == pytest.approx(1.0, abs=1e-7)


def test_primal_value_tolerance_comes_from_settings(m2):
    run = Settings(tolerances=Tolerances(primal_value=3e-7))
    c = lift(m2, np.diag([1.0, -1.0]))
    v = Subspace.scalars(m2)
    rows = {name: tolerance for name, _, tolerance, _ in quotient_norm(c, v, run).check(c, v, run)}
    assert rows["primal_value"] == pytest.approx(3e-7)
