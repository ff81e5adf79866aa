"""
Run configuration: defaults, YAML overrides and ``NAME=VALUE`` tolerance flags.

The defaults below apply unless a problem document
or the command line tightens or loosens them.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

import yaml

from .errors import SpecError

log = logging.getLogger(__name__)


DEFAULT_CONFIG: Dict[str, Any] = {
    "seed": 0,
    "levels": 2,
    "probes": {
        "include_basis": True,
        "random": 1,
        "hermitian": 1,
        "symmetrize": True,
    },
    "held_out": {
        "count": 5,
        "span": 2,
    },
    "leibniz_trials": 1000,
    "tolerances": {
        "rank_cutoff": 1e-9,
        "certificate_floor": 1e-6,
        "hermitian": 1e-12,
        "membership": 1e-9,
        "zero_value": 1e-9,
        "annihilation": 1e-8,
        "certificate_norm": 1e-6,
        "primal_value": 1e-6,
        "attainment": 1e-5,
        "duality_gap": 1e-5,
        "oracle_relative": 1e-4,
        "reconstruction": 1e-8,
        "probe_exactness": 1e-5,
        "overshoot": 1e-8,
        "structural": 1e-10,
        "star_map": 1e-12,
        "choi_psd": 1e-9,
        "leibniz": 1e-9,
        "contractivity": 1e-10,
        "eigen_residual": 1e-10,
    },
    "solver": {
        "conic": ["CLARABEL", "SCS"],
        "cluster": 1e-6,
        "pair_gap": 1e-7,
        "oracle_restarts": 3,
        "oracle_max_evaluations": 60000,
        "oracle_smoothing": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
        "oracle_max_parameters": 40,
        "cutdown": False,
    },
}


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances; see ``DEFAULT_CONFIG['tolerances']`` for values."""
    rank_cutoff: float = 1e-9
    certificate_floor: float = 1e-6
    hermitian: float = 1e-12
    membership: float = 1e-9
    zero_value: float = 1e-9
    annihilation: float = 1e-8
    certificate_norm: float = 1e-6
    primal_value: float = 1e-6
    attainment: float = 1e-5
    duality_gap: float = 1e-5
    oracle_relative: float = 1e-4
    reconstruction: float = 1e-8
    probe_exactness: float = 1e-5
    overshoot: float = 1e-8
    structural: float = 1e-10
    star_map: float = 1e-12
    choi_psd: float = 1e-9
    leibniz: float = 1e-9
    contractivity: float = 1e-10
    eigen_residual: float = 1e-10

    def with_overrides(self, overrides: Dict[str, float]) -> "Tolerances":
        """Return a copy with the named tolerances replaced."""
        known = {f.name for f in fields(self)}
        for name in overrides:
            if name not in known:
                raise SpecError(f"unknown tolerance '{name}'", location="tolerances")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


@dataclass(frozen=True)
class SolverSettings:
    conic: Tuple[str, ...] = ("CLARABEL", "SCS")
    cluster: float = 1e-6
    pair_gap: float = 1e-7
    oracle_restarts: int = 3
    oracle_max_evaluations: int = 60000
    oracle_smoothing: Tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
    oracle_max_parameters: int = 40
    cutdown: bool = False


@dataclass(frozen=True)
class ProbeSettings:
    include_basis: bool = True
    random: int = 1
    hermitian: int = 1
    symmetrize: bool = True


@dataclass(frozen=True)
class Settings:
    """Everything a run needs besides the problem itself."""
    seed: int = 0
    levels: int = 2
    probes: ProbeSettings = field(default_factory=ProbeSettings)
    held_out: int = 5
    held_out_span: int = 2
    leibniz_trials: int = 1000
    tolerances: Tolerances = field(default_factory=Tolerances)
    solver: SolverSettings = field(default_factory=SolverSettings)

    def echo(self) -> Dict[str, Any]:
        """Plain-dict rendering for reports."""
        return {
            "seed": self.seed,
            "levels": self.levels,
            "probes": dict(vars(self.probes)),
            "held_out": {"count": self.held_out, "span": self.held_out_span},
            "leibniz_trials": self.leibniz_trials,
            "tolerances": dict(vars(self.tolerances)),
            "solver": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in vars(self.solver).items()},
        }


def _deep_merge(defaults: dict, overrides: dict) -> dict:
    out = {}
    for k, v in defaults.items():
        if isinstance(v, dict):
            ov = overrides.get(k, {}) if isinstance(overrides, dict) else {}
            out[k] = _deep_merge(v, ov if isinstance(ov, dict) else {})
        else:
            out[k] = overrides.get(k, v) if isinstance(overrides, dict) else v
    # Include any extra keys from overrides that are not in defaults
    if isinstance(overrides, dict):
        for k, v in overrides.items():
            if k not in out:
                out[k] = v
    return out


def parse_tolerance_flags(flags: Iterable[str]) -> Dict[str, float]:
    """
    Parse repeated ``NAME=VALUE`` command line flags.

    Args:
        flags (Iterable[str]): Raw flag values.

    Returns:
        Dict[str, float]: Parsed overrides.

    Raises:
        SpecError: If a flag is not of the form NAME=VALUE with a numeric value.
    """
    out: Dict[str, float] = {}
    for raw in flags:
        name, sep, value = raw.partition("=")
        if not sep or not name.strip():
            raise SpecError(f"expected NAME=VALUE, got '{raw}'", location="--tol")
        try:
            out[name.strip()] = float(value)
        except ValueError as e:
            raise SpecError(f"tolerance '{name}' is not a number: '{value}'", location="--tol") from e
    return out


def settings_from_dict(cfg: Dict[str, Any]) -> Settings:
    """Build :class:`Settings` from a merged configuration dict."""
    try:
        tol = Tolerances().with_overrides(cfg.get("tolerances", {}) or {})
        sv = cfg["solver"]
        solver = SolverSettings(
            conic=tuple(str(s).upper() for s in sv["conic"]),
            cluster=float(sv["cluster"]),
            pair_gap=float(sv["pair_gap"]),
            oracle_restarts=int(sv["oracle_restarts"]),
            oracle_max_evaluations=int(sv["oracle_max_evaluations"]),
            oracle_smoothing=tuple(float(m) for m in sv["oracle_smoothing"]),
            oracle_max_parameters=int(sv["oracle_max_parameters"]),
            cutdown=bool(sv["cutdown"]),
        )
        pr = cfg["probes"]
        probes = ProbeSettings(
            include_basis=bool(pr["include_basis"]),
            random=int(pr["random"]),
            hermitian=int(pr["hermitian"]),
            symmetrize=bool(pr["symmetrize"]),
        )
        return Settings(
            seed=int(cfg["seed"]),
            levels=int(cfg["levels"]),
            probes=probes,
            held_out=int(cfg["held_out"]["count"]),
            held_out_span=int(cfg["held_out"]["span"]),
            leibniz_trials=int(cfg["leibniz_trials"]),
            tolerances=tol,
            solver=solver,
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(f"invalid configuration value: {e}", location="config") from e


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None,
                tolerance_flags: Iterable[str] = ()) -> Settings:
    """
    Merge defaults, an optional YAML file, in-memory overrides and ``--tol`` flags.

    Args:
        path (Optional[Path]): YAML document with any subset of DEFAULT_CONFIG keys.
        overrides (Optional[Dict[str, Any]]): Already-parsed overrides (applied after the file).
        tolerance_flags (Iterable[str]): ``NAME=VALUE`` strings (applied last).

    Returns:
        Settings: The frozen run settings.

    Raises:
        SpecError: On unreadable files, malformed YAML or unknown tolerance names.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise SpecError(f"could not read config: {e}", location=str(path)) from e
        if not isinstance(loaded, dict):
            raise SpecError("config document must be a mapping", location=str(path))
        cfg = _deep_merge(cfg, loaded)
        log.debug(f"Loaded config overrides from {path}")
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    flags = parse_tolerance_flags(tolerance_flags)
    if flags:
        cfg["tolerances"] = {**cfg.get("tolerances", {}), **flags}
    return settings_from_dict(cfg)
