"""Command line entry point: ``nhm <subcommand>``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..errors import ConfigError, MarylandError
from .config import Kind, build_config, load_config_file
from .experiments import RUNNERS
from .io import Manifest, write_json

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG = 0, 1, 2


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     help="JSON config file; flags override its values."),
        click.option("--V", "V", type=float, help="Potential amplitude."),
        click.option("--epsilon", "epsilon", type=float, multiple=True,
                     help="Non-Hermitian strength; repeat for a grid."),
        click.option("--theta", type=float, help="Potential phase."),
        click.option("--fib-index", type=int,
                     help="Ring size as a Fibonacci index of q (13 -> 233, 14 -> 377, 15 -> 610)."),
        click.option("--pq", help="Explicit approximant p/q."),
        click.option("--theta-steps", type=int, help="Flux grid points over [0, pi]."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), help="Table format."),
        click.option("--plot/--no-plot", default=None, help="Also render SVG figures."),
        click.option("--workers", type=int, help="Parallel work items (capped by NHM_WORKERS)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _make_config(kind: Kind, config_path, fmt, epsilon, **flags):
    file_values = load_config_file(config_path) if config_path else {}
    return build_config(kind, file_values, epsilon=list(epsilon) or None, format=fmt, **flags)


def _run(kind: Kind, **kwargs):
    try:
        cfg = _make_config(kind, **kwargs)
        paths = RUNNERS[kind](cfg)
    except ConfigError as exc:
        click.secho(f"config error: {exc}", fg="red", err=True)
        sys.exit(EXIT_CONFIG)
    except MarylandError as exc:
        click.secho(f"error: {exc}", fg="red", err=True)
        sys.exit(EXIT_VERIFY_FAILED)
    for p in paths:
        click.echo(str(p))


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Non-Hermitian Maryland model: spectra, windings and closed-form checks."""


@main.command()
@common_options
def spectrum(**kwargs):
    """Ring spectra with IPR and analytic loops (default L = 610)."""
    _run(Kind.SPECTRUM, **kwargs)


@main.command()
@common_options
def winding(**kwargs):
    """Winding numbers w1, w2 over an eps grid (default L = 377)."""
    _run(Kind.WINDING_SWEEP, **kwargs)


@main.command("phase-diagram")
@common_options
@click.option("--V-value", "V_values", type=float, multiple=True, help="Extra V rows.")
def phase_diagram(V_values, **kwargs):
    """Analytic phase labels, loop counts and mobility edges on a (V, eps) grid."""
    _run(Kind.PHASE_DIAGRAM, V_values=list(V_values) or None, **kwargs)


@main.command()
@common_options
@click.option("--energy", "energies", multiple=True, help="Complex energy such as 1+1j.")
@click.option("--steps", type=int, help="Transfer-matrix steps per phase sample.")
@click.option("--phase-samples", type=int, help="Number of equispaced theta samples.")
def lyapunov(energies, **kwargs):
    """Transfer-matrix Lyapunov exponents next to the closed forms."""
    _run(Kind.LYAPUNOV, energies=list(energies) or None, **kwargs)


@main.command()
@common_options
@click.option("--base-energy", help="Base energy for the swept-angle sum (default iV).")
def rotations(**kwargs):
    """Eigenvalue flow under flux threading (default eps = 0.2, L = 233)."""
    _run(Kind.ROTATIONS, **kwargs)


@main.command()
@common_options
@click.option("--only", multiple=True, help="Run checks whose name contains this text.")
@click.option("--acceptance", is_flag=True, help="Run only the acceptance criteria.")
@click.option("--tolerance", "tolerance_items", multiple=True,
              help="Override a tolerance, e.g. loop_distance=0.")
def verify(only, acceptance, tolerance_items, **kwargs):
    """Run acceptance criteria and invariant checks; write a JSON report."""
    from . import checks

    try:
        tolerances = {}
        for item in tolerance_items:
            key, _, value = item.partition("=")
            try:
                tolerances[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"bad tolerance {item!r}") from exc
        cfg = _make_config(Kind.VERIFY, only=list(only) or None,
                           tolerances=tolerances or None, **kwargs)
    except ConfigError as exc:
        click.secho(f"config error: {exc}", fg="red", err=True)
        sys.exit(EXIT_CONFIG)
    selected = checks.acceptance_checks() if acceptance else checks.select(cfg.only)
    if cfg.only and acceptance:
        selected = [c for c in selected if any(n in c.name for n in cfg.only)]
    man = Manifest(cfg)
    results = []
    for c in selected:
        with man.stage(c.name):
            r = c.run(cfg.tolerances)
        results.append(r)
        mark = click.style("PASS", fg="green") if r.passed else click.style("FAIL", fg="red")
        click.echo(f"[{mark}] {r.name} ({r.seconds:.2f}s) {r.error or ''}")
    report = {"passed": all(r.passed for r in results), "checks": [r.to_dict() for r in results]}
    path = write_json(Path(cfg.out) / "verify_report.json", report)
    man.add(path)
    man.write()
    click.echo(str(path))
    click.echo(json.dumps({"passed": sum(r.passed for r in results), "total": len(results)}))
    sys.exit(EXIT_OK if report["passed"] else EXIT_VERIFY_FAILED)


if __name__ == "__main__":
    main()
