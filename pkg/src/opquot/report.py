from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

REPORT_SCHEMA = "opquot/report-v1"


@dataclass
class CheckResult:
    """
    One measured residual against its tolerance.

    Non-binding rows (truncation slack, span exactness) are reported but never
    decide the overall status.
    """
    name: str
    residual: float
    tolerance: float
    passed: bool
    binding: bool = True

    @classmethod
    def from_residual(cls, name: str, residual: float, tolerance: float,
                      binding: bool = True) -> "CheckResult":
        """
        Create a CheckResult, passing iff ``residual ≤ tolerance``.

        Args:
            name (str): Dotted check name.
            residual (float): Measured residual (or excess).
            tolerance (float): Allowed value.
            binding (bool): Whether a failure fails the run.

        Returns:
            CheckResult: The row.
        """
        residual = float(residual)
        return cls(name=name, residual=residual, tolerance=float(tolerance),
                   passed=bool(residual <= tolerance), binding=binding)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "residual": self.residual, "tolerance": self.tolerance,
                "passed": self.passed, "binding": self.binding}


@dataclass
class Report:
    """Machine-readable outcome of a command run."""
    command: str
    config: Dict[str, Any]
    probes: List[Dict[str, Any]] = field(default_factory=list)
    realization: Optional[Dict[str, Any]] = None
    checks: List[CheckResult] = field(default_factory=list)
    slack: List[Dict[str, Any]] = field(default_factory=list)
    span: List[Dict[str, Any]] = field(default_factory=list)

    def add(self, checks: List[CheckResult]) -> None:
        self.checks.extend(checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if c.binding and not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "status": "pass" if self.passed else "fail",
            "config": self.config,
            "probes": self.probes,
        }
        if self.realization is not None:
            out["realization"] = self.realization
        out["checks"] = [c.to_dict() for c in self.checks]
        if self.slack:
            out["truncation_slack"] = self.slack
        if self.span:
            out["span_exactness"] = self.span
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)

    def write(self, path: Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def summary(self) -> List[str]:
        """Human-readable lines: status first, then every failing binding check."""
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'} "
                 f"({len(self.checks)} checks, {len(self.failures)} failing)"]
        for c in self.failures:
            lines.append(f"  FAIL {c.name}: {c.residual:.3e} > {c.tolerance:.1e}")
        return lines
