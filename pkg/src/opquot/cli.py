#!/usr/bin/env python3
import logging
from pathlib import Path
from typing import Callable, List, Optional

import typer
import yaml

from opquot.config import Settings, load_config
from opquot.errors import CertificateError, ContractViolation, SolverConvergenceError, SpecError
from opquot.oracle import oracle_quotient_norm
from opquot.problem import ProblemSpec, load_problem, load_realization, save_realization
from opquot.realization import (ProbeSet, build_realization, cross_duality_residual, invariant_suite, make_probes,
                                member_checks)
from opquot.report import CheckResult, Report

app = typer.Typer(add_completion=False, help="Concrete realizations of quotient operator spaces A/V.")
log = logging.getLogger("opquot")

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

SPEC_OPTION = typer.Option(..., "--spec", help="Problem document (YAML)")
OUT_OPTION = typer.Option(None, "--out", help="Write the YAML report here instead of stdout")
SEED_OPTION = typer.Option(None, "--seed", help="Override the problem's seed")
TOL_OPTION = typer.Option(None, "--tol", help="Tolerance override NAME=VALUE (repeatable)")
LEVELS_OPTION = typer.Option(None, "--levels", help="Highest matrix level N for probes and checks")
PROBES_OPTION = typer.Option(None, "--probes", help="Random probes per level")
VERBOSE_OPTION = typer.Option(False, "--verbose", "-v", help="Debug logging")


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")


def prepare(spec_path: Path, seed: Optional[int], tol: Optional[List[str]], levels: Optional[int],
            probes: Optional[int]) -> tuple[ProblemSpec, Settings]:
    """Parse the problem and merge defaults, document settings and command line flags."""
    spec = load_problem(spec_path)
    overrides = dict(spec.config)
    if seed is not None:
        overrides["seed"] = seed
    if levels is not None:
        overrides["levels"] = levels
    if probes is not None:
        overrides["probes"] = {**overrides.get("probes", {}), "random": probes}
    settings = load_config(None, overrides, tol or [])
    if settings.levels < 1:
        raise SpecError(f"levels must be >= 1, got {settings.levels}", "levels")
    return spec, settings


def run(command: Callable[[], Report], out: Optional[Path]) -> None:
    """Run a command body, emit its report and translate errors into exit codes."""
    try:
        report = command()
    except (SpecError, ContractViolation, OSError, yaml.YAMLError) as e:
        typer.echo(f"Input error: {e}", err=True)
        raise typer.Exit(code=EXIT_INPUT)
    except SolverConvergenceError as e:
        typer.echo(f"Solver did not converge: {e} (best primal {e.best_primal}, gap {e.gap})", err=True)
        raise typer.Exit(code=EXIT_SOLVER)
    except CertificateError as e:
        typer.echo(f"Certificate fault: {e}", err=True)
        raise typer.Exit(code=EXIT_SOLVER)

    if out is None:
        typer.echo(report.dumps(), nl=False)
        for line in report.summary():
            typer.echo(line, err=True)
    else:
        report.write(out)
        log.info(f"Report written to {out}")
        for line in report.summary():
            typer.echo(line)
    if not report.passed:
        raise typer.Exit(code=EXIT_FAILED)


def quotient_report(spec: ProblemSpec, settings: Settings) -> Report:
    """Certified quotient norms of every probe, cross-checked against the oracle."""
    v = spec.subspace
    tol = settings.tolerances
    probes = make_probes(v, settings, spec.explicit_probes)
    report = Report("quotient", settings.echo(), probes=probes.to_dicts())
    rows = []
    for k, p in enumerate(probes):
        for name, residual, tolerance, _ in p.certified.check(p.element, v, settings):
            rows.append(CheckResult.from_residual(f"quotient.probe{k}.{name}", residual, tolerance))
        try:
            est = oracle_quotient_norm(p.element, v, settings)
        except ContractViolation as e:
            log.warning(f"Oracle skipped for probe {k}: {e}")
            continue
        rel = abs(est.value - p.value) / max(1.0, p.value)
        report.probes[k]["oracle"] = float(est.value)
        rows.append(CheckResult.from_residual(f"quotient.probe{k}.oracle", rel, tol.oracle_relative,
                                              binding=est.certified))
    rows.append(CheckResult.from_residual("quotient.cross_duality", cross_duality_residual(probes), tol.duality_gap))
    report.add(rows)
    return report


def realize_report(spec: ProblemSpec, settings: Settings, save: Optional[Path]) -> Report:
    v = spec.subspace
    probes = make_probes(v, settings, spec.explicit_probes)
    r = build_realization(spec.kind, v, probes, settings)
    if save is not None:
        save_realization(r, save)
    suite = invariant_suite(r, v, probes, settings)
    base = getattr(r, "base", r)
    report = Report("realize", settings.echo(), probes=probes.to_dicts(), realization=r.summary(),
                    slack=suite.slack, span=suite.span)
    report.add(member_checks(base, v, settings.tolerances))
    report.add(suite.checks)
    return report


def verify_report(spec: ProblemSpec, settings: Settings, realization: Path, held_out: int) -> Report:
    v = spec.subspace
    r = load_realization(realization, spec.shape)
    if r.KIND != spec.kind:
        log.warning(f"Realization kind '{r.KIND}' differs from the problem's '{spec.kind}'")
    probes: ProbeSet = make_probes(v, settings, spec.explicit_probes)
    suite = invariant_suite(r, v, probes, settings, extra_held_out=held_out)
    report = Report("verify", settings.echo(), probes=probes.to_dicts(), realization=r.summary(),
                    slack=suite.slack, span=suite.span)
    report.add(suite.checks)
    return report


@app.command()
def quotient(
    spec: Path = SPEC_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    tol: Optional[List[str]] = TOL_OPTION,
    levels: Optional[int] = LEVELS_OPTION,
    probes: Optional[int] = PROBES_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Certify the quotient norm of every probe and cross-check it with the oracle."""
    setup_logging(verbose)
    run(lambda: quotient_report(*prepare(spec, seed, tol, levels, probes)), out)


@app.command()
def realize(
    spec: Path = SPEC_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    tol: Optional[List[str]] = TOL_OPTION,
    levels: Optional[int] = LEVELS_OPTION,
    probes: Optional[int] = PROBES_OPTION,
    save_realization: Optional[Path] = typer.Option(None, "--save-realization",
                                                    help="Persist the realization operators (YAML)"),
    verbose: bool = VERBOSE_OPTION,
):
    """Build the realization for the problem's kind and run its invariant suite."""
    setup_logging(verbose)
    run(lambda: realize_report(*prepare(spec, seed, tol, levels, probes), save_realization), out)


@app.command()
def verify(
    spec: Path = SPEC_OPTION,
    realization: Path = typer.Option(..., "--realization", help="Realization file from 'realize --save-realization'"),
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    tol: Optional[List[str]] = TOL_OPTION,
    levels: Optional[int] = LEVELS_OPTION,
    probes: Optional[int] = PROBES_OPTION,
    held_out: int = typer.Option(0, "--held-out", help="Extra held-out elements for the slack table"),
    verbose: bool = VERBOSE_OPTION,
):
    """Re-run the invariant suite on a saved realization."""
    setup_logging(verbose)
    run(lambda: verify_report(*prepare(spec, seed, tol, levels, probes), realization, held_out), out)


if __name__ == "__main__":
    app()
