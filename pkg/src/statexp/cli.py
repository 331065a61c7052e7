"""Command-line front end.

Exit codes: 0 every check passed, 1 at least one check failed, 2 structural
error (unreadable file, schema violation, malformed model).
"""

import json
import sys

import click

from . import __version__
from .config import DEFAULT
from .errors import ToolkitError
from .report import Report
from .runner import (
    evolve_lindblad,
    evolve_macrostate,
    run_scenario,
    write_macrostate_csv,
    write_trajectory_csv,
)
from .scenario import build, load_scenario

_COMMON = [
    click.option("--seed", type=int, default=None,
                 help="Override the scenario seed."),
    click.option("--out", type=click.Path(dir_okay=False), default=None,
                 help="Write the structured report to this path."),
    click.option("--format", "fmt", type=click.Choice(["human", "structured"]),
                 default="human", show_default=True,
                 help="Report format on standard output."),
    click.option("--tolerance", "tolerance", multiple=True, metavar="KEY=VALUE",
                 help="Override a tolerance (repeatable)."),
]


def _with_common(fn):
    for option in reversed(_COMMON):
        fn = option(fn)
    return fn


def _parse_tolerances(pairs):
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ToolkitError(f"--tolerance expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _emit(report: Report, fmt, out):
    click.echo(report.human() if fmt == "human" else report.structured(), nl=False)
    if out:
        with open(out, "w") as fh:
            fh.write(report.structured())


def _finish(ctx, report):
    ctx.exit(report.exit_code())


def _load(ctx, path, tolerance):
    try:
        scenario = load_scenario(path)
        tol = DEFAULT.with_overrides(scenario.tolerances)
        tol = tol.with_overrides(_parse_tolerances(tolerance))
        return scenario, tol
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)


@click.group()
@click.version_option(__version__)
def main():
    """Scenario-driven checks for statistical-experiment axioms and quantum models."""


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False))
@_with_common
@click.pass_context
def check(ctx, scenario_path, seed, out, fmt, tolerance):
    """Run the check suite a scenario's kind owns."""
    scenario, tol = _load(ctx, scenario_path, tolerance)
    try:
        report = run_scenario(scenario, tol, seed)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)
    _emit(report, fmt, out)
    _finish(ctx, report)


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False))
@_with_common
@click.pass_context
def simulate(ctx, scenario_path, seed, out, fmt, tolerance):
    """Sample a pipeline scenario and feed the frequencies to the axiom checks."""
    scenario, tol = _load(ctx, scenario_path, tolerance)
    if scenario.kind != "pipeline":
        click.echo(f"error: simulate needs a pipeline scenario, got {scenario.kind!r}",
                   err=True)
        ctx.exit(2)
    try:
        report = run_scenario(scenario, tol, seed)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)
    _emit(report, fmt, out)
    _finish(ctx, report)


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False))
@_with_common
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Export the trajectory as CSV.")
@click.pass_context
def evolve(ctx, scenario_path, seed, out, fmt, tolerance, csv_path):
    """Integrate a lindblad or macrostate scenario and validate the trajectory."""
    scenario, tol = _load(ctx, scenario_path, tolerance)
    if scenario.kind not in ("lindblad", "macrostate"):
        click.echo("error: evolve needs a lindblad or macrostate scenario", err=True)
        ctx.exit(2)
    import time as _time
    started = _time.perf_counter()
    effective_seed = scenario.seed if seed is None else seed
    report = Report(scenario.id, scenario.kind, effective_seed,
                    {name: getattr(tol, name) for name in tol.__dataclass_fields__})
    try:
        spec = build(scenario)
        if scenario.kind == "lindblad":
            trajectory = evolve_lindblad(spec, report, tol)
            if csv_path:
                write_trajectory_csv(trajectory, csv_path)
        else:
            trajectory = evolve_macrostate(spec, report, tol)
            if csv_path:
                write_macrostate_csv(spec, trajectory, csv_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)
    report.wall_time_s = _time.perf_counter() - started
    _emit(report, fmt, out)
    _finish(ctx, report)


@main.command()
@click.argument("report_files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def report(ctx, report_files):
    """Summarize structured report files; exit 1 if any recorded check failed."""
    failed = 0
    for path in report_files:
        try:
            with open(path) as fh:
                lines = [json.loads(line) for line in fh if line.strip()]
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: cannot read {path}: {exc}", err=True)
            ctx.exit(2)
        header = next((l for l in lines if l.get("record") == "header"), {})
        checks = [l for l in lines if l.get("record") == "check"]
        bad = [c for c in checks if c.get("status") != "pass"]
        failed += len(bad)
        click.echo(f"{path}: scenario {header.get('scenario', '?')} "
                   f"({header.get('kind', '?')}) "
                   f"{len(checks) - len(bad)}/{len(checks)} checks pass")
        for c in bad:
            click.echo(f"  FAIL {c.get('name')}"
                       + (f" residual={c.get('residual')}" if "residual" in c else ""))
    ctx.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
