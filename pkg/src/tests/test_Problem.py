import numpy as np
import pytest
import yaml

from opquot.algebra import AlgebraShape, Subspace
from opquot.config import Settings
from opquot.errors import ShapeMismatchError, SpecError
from opquot.problem import (decode_complex, decode_element, encode_element, load_problem, load_realization,
                            parse_problem, realization_from_dict, realization_to_dict, save_realization)
from opquot.realization import build_general, build_star, make_probes


@pytest.fixture
def document():
    return {
        "schema": "opquot/problem-v1",
        "algebra": [2],
        "subspace": {"kind": "system", "preset": "scalars"},
        "probes": {"explicit": [{"level": 1, "element": [[[1, 0], [0, -1]]]}], "random": 2},
        "levels": 1,
        "seed": 5,
    }


# ---------- element codec ----------
def test_complex_accepts_pairs_and_reals():
    assert decode_complex([1.5, -2], "x") == complex(1.5, -2)
    assert decode_complex(3, "x") == complex(3, 0)


@pytest.mark.parametrize("bad", [True, "1", [1, 2, 3], [1, "2"]])
def test_complex_rejects_other_values(bad):
    with pytest.raises(SpecError):
        decode_complex(bad, "x")


def test_element_codec_preserves_entries():
    shape = AlgebraShape((1, 2))
    c = decode_element(shape, [[[[0, 1]]], [[1, [2, 3]], [4, 5]]], "e")
    assert c.blocks[0][0, 0] == 1j
    assert c.blocks[1][0, 1] == 2 + 3j
    assert decode_element(shape, encode_element(c), "e").blocks[1][0, 1] == 2 + 3j


def test_element_with_wrong_block_size_names_location():
    with pytest.raises(SpecError) as e:
        decode_element(AlgebraShape((2,)), [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]], "probes.explicit[0].element")
    assert e.value.location == "probes.explicit[0].element[0]"


def test_level_two_element_needs_assembled_blocks():
    c = decode_element(AlgebraShape((1,)), [[[1, 0], [0, 2]]], "e", level=2)
    assert c.level == 2
    with pytest.raises(SpecError):
        decode_element(AlgebraShape((1,)), [[[1]]], "e", level=2)


# ---------- problem documents ----------
class TestParseProblem:

    def test_valid_document(self, document):
        spec = parse_problem(document)
        assert spec.kind == "system"
        assert spec.subspace.contains_unit and spec.subspace.star_closed
        assert len(spec.explicit_probes) == 1
        assert spec.config == {"levels": 1, "seed": 5, "probes": {"random": 2}}

    def test_basis_subspace(self, document):
        document["subspace"] = {"kind": "star", "basis": [[[[0, 1], [0, 0]]], [[[0, 0], [1, 0]]]]}
        spec = parse_problem(document)
        assert spec.subspace.dim == 2
        assert spec.subspace.star_closed and not spec.subspace.contains_unit

    @pytest.mark.parametrize("mutate, location", [
        (lambda d: d.update(schema="opquot/problem-v9"), "schema"),
        (lambda d: d.update(algebra=[2, 0]), "algebra"),
        (lambda d: d.update(extra=1), "<root>"),
        (lambda d: d.update(subspace={"kind": "system"}), "subspace"),
        (lambda d: d.update(subspace={"kind": "banach", "preset": "zero"}), "subspace.kind"),
        (lambda d: d.update(subspace={"kind": "general", "preset": "upper"}), "subspace.preset"),
        (lambda d: d.update(subspace={"kind": "system", "preset": "zero"}), "subspace.kind"),
        (lambda d: d.update(subspace={"kind": "general", "basis": [[[[1, 0], [0, 1]]], [[[2, 0], [0, 2]]]]}),
         "subspace.basis"),
        (lambda d: d["probes"]["explicit"][0].update(level=0), "probes.explicit[0].level"),
        (lambda d: d["probes"].update(sampler="sobol"), "probes"),
    ])
    def test_errors_carry_location(self, document, mutate, location):
        mutate(document)
        with pytest.raises(SpecError) as e:
            parse_problem(document)
        assert e.value.location == location

    def test_operator_system_that_is_not_a_subalgebra(self, document):
        document["subspace"] = {"kind": "subalgebra", "basis": [
            [[[1, 0], [0, 1]]], [[[0, 1], [1, 0]]], [[[1, 0], [0, -1]]]]}
        with pytest.raises(SpecError, match="closed under multiplication"):
            parse_problem(document)

    def test_load_from_file(self, document, tmp_path):
        path = tmp_path / "problem.yaml"
        path.write_text(yaml.safe_dump(document))
        assert load_problem(path).source == str(path)

    def test_load_malformed_yaml(self, tmp_path):
        path = tmp_path / "problem.yaml"
        path.write_text("algebra: [2\n")
        with pytest.raises(SpecError):
            load_problem(path)


# ---------- realization files ----------
class TestRealizationFiles:

    @pytest.fixture
    def small(self):
        return Settings(levels=1, held_out=2, held_out_span=1, leibniz_trials=10)

    def test_general_round_trip(self, small, tmp_path):
        m2 = AlgebraShape((2,))
        v = Subspace.scalars(m2)
        r = build_general(v, make_probes(v, small), small)
        path = tmp_path / "real.yaml"
        save_realization(r, path)
        loaded = load_realization(path, m2)
        assert loaded.KIND == "general"
        assert loaded.rep.multiplicities == r.rep.multiplicities
        assert np.array_equal(loaded.P, r.P) and np.array_equal(loaded.Q, r.Q)

    def test_star_document_lists_operators(self, small):
        m2 = AlgebraShape((2,))
        v = Subspace.scalars(m2)
        doc = realization_to_dict(build_star(v, make_probes(v, small), small))
        assert doc["schema"] == "opquot/realization-v1"
        assert set(doc["matrices"]) == {"base_P", "base_Q", "P", "U"}
        assert realization_from_dict(doc, m2).dim == 2 * len(doc["matrices"]["base_P"])

    def test_wrong_algebra(self, small):
        m2 = AlgebraShape((2,))
        v = Subspace.scalars(m2)
        doc = realization_to_dict(build_general(v, make_probes(v, small), small))
        with pytest.raises(ShapeMismatchError):
            realization_from_dict(doc, AlgebraShape((1, 1)))

    def test_missing_operator(self, small):
        m2 = AlgebraShape((2,))
        v = Subspace.scalars(m2)
        doc = realization_to_dict(build_general(v, make_probes(v, small), small))
        del doc["matrices"]["Q"]
        with pytest.raises(SpecError) as e:
            realization_from_dict(doc, m2)
        assert e.value.location == "matrices.Q"
