"""
Problem documents and realization files.

Both are YAML. Complex numbers are ``[re, im]`` pairs (a bare real number is
accepted on input), matrices are lists of rows, and an algebra element is a
list of its blocks. A problem document looks like::

    schema: opquot/problem-v1
    algebra: [2]
    subspace:
      kind: system            # general | star | system | subalgebra
      preset: scalars         # or basis: [<element>, ...]
    probes:
      explicit:
        - level: 1
          element: [[[1, 0], [0, -1]]]
      include_basis: true
      random: 1
      hermitian: 1
    levels: 2
    seed: 0
    tolerances: {overshoot: 1.0e-8}
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from numbers import Real
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .RealizationBase import RealizationBase
from .algebra import AlgebraShape, AmplifiedElement, Subspace
from .errors import ContractViolation, ShapeMismatchError, SpecError
from .gns import RepresentationData
from .realization import GeneralRealization, StarRealization, SubalgebraRealization, SystemRealization

log = logging.getLogger(__name__)

PROBLEM_SCHEMA = "opquot/problem-v1"
REALIZATION_SCHEMA = "opquot/realization-v1"

KINDS = ("general", "star", "system", "subalgebra")
PRESETS = {
    "zero": Subspace.zero,
    "full": Subspace.full,
    "scalars": Subspace.scalars,
    "diagonal": Subspace.diagonal,
}
# Keys passed through to the run configuration untouched.
CONFIG_KEYS = ("levels", "seed", "tolerances", "solver", "held_out", "leibniz_trials")
TOP_LEVEL_KEYS = ("schema", "algebra", "subspace", "probes") + CONFIG_KEYS


# ------------------ element codec ------------------
def decode_complex(x: Any, location: str) -> complex:
    if isinstance(x, bool):
        raise SpecError(f"expected a number or [re, im], got {x!r}", location)
    if isinstance(x, Real):
        return complex(float(x), 0.0)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(p, Real) and not isinstance(p, bool) for p in x):
        return complex(float(x[0]), float(x[1]))
    raise SpecError(f"expected a number or [re, im], got {x!r}", location)


def decode_matrix(rows: Any, location: str, size: Optional[int] = None) -> np.ndarray:
    """Square (or ``size × size``) complex matrix from a list of rows."""
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise SpecError("expected a non-empty list of rows", location)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise SpecError("rows have different lengths", location)
    out = np.array([[decode_complex(x, f"{location}[{j}][{k}]") for k, x in enumerate(r)]
                    for j, r in enumerate(rows)], dtype=np.complex128)
    if size is not None and out.shape != (size, size):
        raise SpecError(f"expected a {size}x{size} matrix, got {out.shape[0]}x{out.shape[1]}", location)
    return out


def decode_element(shape: AlgebraShape, data: Any, location: str, level: int = 1) -> AmplifiedElement:
    """An element of ``M_level(A)``: one ``(level·d_i)``-square matrix per block."""
    if not isinstance(data, list) or len(data) != shape.num_blocks:
        raise SpecError(f"expected a list of {shape.num_blocks} block(s)", location)
    blocks = tuple(decode_matrix(b, f"{location}[{i}]", level * d)
                   for i, (b, d) in enumerate(zip(data, shape.block_dims)))
    return AmplifiedElement(shape, level, blocks)


def encode_complex(z: complex) -> List[float]:
    return [float(np.real(z)), float(np.imag(z))]


def encode_matrix(m: np.ndarray) -> List[List[List[float]]]:
    return [[encode_complex(z) for z in row] for row in np.asarray(m)]


def encode_element(c: AmplifiedElement) -> List:
    return [encode_matrix(b) for b in c.blocks]


# ------------------ problem documents ------------------
@dataclass
class ProblemSpec:
    """
    A parsed and validated problem document.

    Args:
        shape (AlgebraShape): The algebra.
        subspace (Subspace): ``V`` with every flag decided from its basis.
        kind (str): Requested realization kind.
        explicit_probes (List[AmplifiedElement]): User-supplied probe elements.
        config (Dict[str, Any]): Overrides for :func:`opquot.config.load_config`.
        source (str): Where the document came from.
    """
    shape: AlgebraShape
    subspace: Subspace
    kind: str = "general"
    explicit_probes: List[AmplifiedElement] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    source: str = "<memory>"


def _parse_algebra(data: Any) -> AlgebraShape:
    if not isinstance(data, list) or not data or not all(
            isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in data):
        raise SpecError("expected a non-empty list of positive block sizes", "algebra")
    return AlgebraShape(tuple(data))


def _parse_subspace(shape: AlgebraShape, data: Any) -> Tuple[Subspace, str]:
    if not isinstance(data, dict):
        raise SpecError("expected a mapping with 'kind' and 'basis' or 'preset'", "subspace")
    unknown = set(data) - {"kind", "basis", "preset"}
    if unknown:
        raise SpecError(f"unknown key(s) {sorted(unknown)}", "subspace")
    kind = data.get("kind", "general")
    if kind not in KINDS:
        raise SpecError(f"kind must be one of {list(KINDS)}, got {kind!r}", "subspace.kind")
    if ("basis" in data) == ("preset" in data):
        raise SpecError("give exactly one of 'basis' or 'preset'", "subspace")

    if "preset" in data:
        preset = data["preset"]
        if preset not in PRESETS:
            raise SpecError(f"preset must be one of {sorted(PRESETS)}, got {preset!r}", "subspace.preset")
        declared = PRESETS[preset](shape)
        elements = list(declared.basis)
    else:
        basis = data["basis"]
        if not isinstance(basis, list):
            raise SpecError("expected a list of elements", "subspace.basis")
        elements = [decode_element(shape, e, f"subspace.basis[{k}]").entry(0, 0) for k, e in enumerate(basis)]
        try:
            Subspace(shape, tuple(elements))
        except ContractViolation as e:
            raise SpecError(str(e), "subspace.basis") from e

    v = Subspace.detect(shape, elements)
    missing = []
    if kind in ("star", "system", "subalgebra") and not v.star_closed:
        missing.append("closed under adjoints")
    if kind in ("system", "subalgebra") and not v.contains_unit:
        missing.append("contains the unit")
    if kind == "subalgebra" and not v.is_subalgebra:
        missing.append("closed under multiplication")
    if missing:
        raise SpecError(f"kind '{kind}' needs a subspace that is {' and '.join(missing)}", "subspace.kind")
    return v, kind


def _parse_probes(shape: AlgebraShape, data: Any) -> Tuple[List[AmplifiedElement], Dict[str, Any]]:
    if data is None:
        return [], {}
    if not isinstance(data, dict):
        raise SpecError("expected a mapping", "probes")
    unknown = set(data) - {"explicit", "include_basis", "random", "hermitian", "symmetrize"}
    if unknown:
        raise SpecError(f"unknown key(s) {sorted(unknown)}", "probes")
    explicit = []
    for k, item in enumerate(data.get("explicit", []) or []):
        loc = f"probes.explicit[{k}]"
        if not isinstance(item, dict) or "element" not in item:
            raise SpecError("expected a mapping with 'element' (and optional 'level')", loc)
        level = item.get("level", 1)
        if not isinstance(level, int) or isinstance(level, bool) or level < 1:
            raise SpecError(f"level must be a positive integer, got {level!r}", f"{loc}.level")
        explicit.append(decode_element(shape, item["element"], f"{loc}.element", level))
    counts = {k: data[k] for k in ("include_basis", "random", "hermitian", "symmetrize") if k in data}
    return explicit, counts


def parse_problem(doc: Any, source: str = "<memory>") -> ProblemSpec:
    """
    Validate a loaded problem document.

    Raises:
        SpecError: With the key path of the first problem found.
    """
    if not isinstance(doc, dict):
        raise SpecError("problem document must be a mapping", source)
    unknown = set(doc) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise SpecError(f"unknown key(s) {sorted(unknown)}", "<root>")
    if "schema" in doc and doc["schema"] != PROBLEM_SCHEMA:
        raise SpecError(f"unsupported schema {doc['schema']!r}, expected {PROBLEM_SCHEMA}", "schema")
    if "algebra" not in doc:
        raise SpecError("missing", "algebra")
    if "subspace" not in doc:
        raise SpecError("missing", "subspace")
    shape = _parse_algebra(doc["algebra"])
    v, kind = _parse_subspace(shape, doc["subspace"])
    explicit, counts = _parse_probes(shape, doc.get("probes"))
    config = {k: doc[k] for k in CONFIG_KEYS if k in doc}
    if counts:
        config["probes"] = counts
    log.debug(f"Parsed problem from {source}: algebra {shape.block_dims}, dim V = {v.dim}, kind {kind}")
    return ProblemSpec(shape, v, kind, explicit, config, source)


def load_problem(path: Path) -> ProblemSpec:
    """
    Read and validate a problem document.

    Raises:
        SpecError: If the file cannot be read, is not YAML, or fails validation.
    """
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise SpecError(f"could not read problem file: {e}", str(path)) from e
    except yaml.YAMLError as e:
        raise SpecError(f"malformed YAML: {e}", str(path)) from e
    return parse_problem(doc, str(path))


# ------------------ realization files ------------------
def realization_to_dict(r: RealizationBase) -> Dict[str, Any]:
    if isinstance(r, StarRealization):
        mults = r.base.rep.multiplicities
    elif isinstance(r, GeneralRealization):
        mults = r.rep.multiplicities
    else:
        raise ContractViolation(f"cannot persist a realization of type {type(r).__name__}")
    return {
        "schema": REALIZATION_SCHEMA,
        "kind": r.KIND,
        "algebra": list(r.shape.block_dims),
        "multiplicities": [int(m) for m in mults],
        "matrices": {name: encode_matrix(m) for name, m in r.matrices().items()},
    }


def _decode_operator(matrices: Dict[str, Any], name: str, size: int) -> np.ndarray:
    if name not in matrices:
        raise SpecError("missing", f"matrices.{name}")
    if size == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    return decode_matrix(matrices[name], f"matrices.{name}", size)


def realization_from_dict(doc: Any, shape: AlgebraShape) -> RealizationBase:
    """
    Rebuild a realization saved by :func:`realization_to_dict`.

    The operators are taken as given; the invariant suite is what decides
    whether they still realize anything.

    Raises:
        SpecError: On a malformed document.
        ShapeMismatchError: If it was built for another algebra.
    """
    if not isinstance(doc, dict):
        raise SpecError("realization document must be a mapping", "<root>")
    if doc.get("schema") != REALIZATION_SCHEMA:
        raise SpecError(f"expected schema {REALIZATION_SCHEMA}", "schema")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SpecError(f"kind must be one of {list(KINDS)}", "kind")
    if tuple(doc.get("algebra") or ()) != shape.block_dims:
        raise ShapeMismatchError(f"realization for algebra {doc.get('algebra')} against {list(shape.block_dims)}")
    mults = doc.get("multiplicities")
    if not isinstance(mults, list):
        raise SpecError("expected a list", "multiplicities")
    rep = RepresentationData(shape, tuple(mults))
    matrices = doc.get("matrices")
    if not isinstance(matrices, dict):
        raise SpecError("expected a mapping", "matrices")

    h = rep.dim
    if kind == "general":
        return GeneralRealization(rep, _decode_operator(matrices, "P", h), _decode_operator(matrices, "Q", h))
    base = GeneralRealization(rep, _decode_operator(matrices, "base_P", h), _decode_operator(matrices, "base_Q", h))
    frame = None
    size = 2 * h
    if "frame" in matrices:
        frame = np.array([[decode_complex(x, f"matrices.frame[{j}][{k}]") for k, x in enumerate(row)]
                          for j, row in enumerate(matrices["frame"])], dtype=np.complex128)
        if frame.ndim != 2 or frame.shape[0] != 2 * h:
            raise SpecError(f"frame must have {2 * h} rows", "matrices.frame")
        size = frame.shape[1]
    p = _decode_operator(matrices, "P", size)
    u = _decode_operator(matrices, "U", size)
    if kind == "star":
        return StarRealization(base, p, u, frame)
    if kind == "system":
        return SystemRealization(base, p, u, frame)
    return SubalgebraRealization(base, p, u, _decode_operator(matrices, "P_hat", size), frame)


def save_realization(r: RealizationBase, path: Path) -> None:
    Path(path).write_text(yaml.safe_dump(realization_to_dict(r), sort_keys=False), encoding="utf-8")
    log.info(f"Realization saved to {path}")


def load_realization(path: Path, shape: AlgebraShape) -> RealizationBase:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise SpecError(f"could not read realization file: {e}", str(path)) from e
    except yaml.YAMLError as e:
        raise SpecError(f"malformed YAML: {e}", str(path)) from e
    return realization_from_dict(doc, shape)

