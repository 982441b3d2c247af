"""Command-line interface for expected-operator."""

from __future__ import annotations

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .compress import apply, build_operator
from .core.config import RHS_KINDS, ExperimentConfig, load_config
from .core.errors import ExpectedOperatorError
from .core.models import CutoffMode, Generator
from .harness.experiment import compression_plan, rhs_function, run_experiment
from .harness.report import report as fit_report
from .harness.report import rows_table, summary_table
from .io import (
    load_operator,
    load_piecewise_constant,
    read_rows,
    save_operator,
    save_vector,
)
from .presets import PRESETS

log = logging.getLogger(__name__)


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
        force=True,
    )


@contextmanager
def _reporting_errors() -> Iterator[None]:
    try:
        yield
    except KeyboardInterrupt:
        click.echo("\nExiting...", err=True)
        sys.exit(130)
    except ExpectedOperatorError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)


def _resolve_config(
    config: Path | None, preset: str | None, **overrides: Any
) -> ExperimentConfig:
    if config is not None:
        base = load_config(config)
    elif preset is not None:
        base = PRESETS[preset]()
    else:
        base = ExperimentConfig()
    return base.with_overrides(**overrides)


config_option = click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON experiment configuration",
)
preset_option = click.option(
    "--preset", type=click.Choice(sorted(PRESETS)), help="Built-in configuration"
)


def sampling_options(func: Any) -> Any:
    """Flags shared by every command that draws coefficient samples."""
    options = [
        click.option("-d", "--dimension", "d", type=click.IntRange(1, 3)),
        click.option("--fine-level", "-J", type=int, help="Fine grid level J"),
        click.option("--coeff-level", "-E", type=int, help="Coefficient cell level E"),
        click.option("--gamma-min", type=float),
        click.option("--gamma-max", type=float),
        click.option("--generator", type=click.Choice([g.value for g in Generator])),
        click.option("--seed", type=int),
        click.option("--skip", type=int, help="Sobol points to skip"),
        click.option("--samples", "-M", type=int, help="Samples per level"),
        click.option("--cutoff", type=click.Choice([c.value for c in CutoffMode])),
        click.option(
            "--iterations", "-k", type=int, help="CG steps (default ceil(L/2))"
        ),
        click.option("--workers", "-w", type=int, help="Samples computed concurrently"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Show debug output")
@click.option("--quiet", "-q", is_flag=True, help="Only show warnings and errors")
@click.version_option(version=__version__)
def main(verbose: bool = False, quiet: bool = False) -> None:
    """Sparse compression of expected solution operators of random elliptic PDEs.

    Averages coefficient-adapted hierarchical inverses over coefficient
    samples and keeps a hyperbolic cross of Haar level blocks.
    """
    _configure_logging(verbose, quiet)


@main.command()
@config_option
@preset_option
@sampling_options
@click.option("--level", "-L", type=int, required=True, help="Finest Haar level L")
@click.option(
    "--output",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Directory for operator.mtx and operator.json",
)
def compress(
    config: Path | None,
    preset: str | None,
    level: int,
    output: Path,
    **overrides: Any,
) -> None:
    """Build the compressed operator for one level and write it to disk."""
    with _reporting_errors():
        cfg = _resolve_config(config, preset, levels=(level,), **overrides)
        op = build_operator(
            compression_plan(cfg, level),
            level,
            cfg.fine_level,
            iterations=cfg.iterations_for(level),
            cutoff=cfg.cutoff,
            workers=cfg.workers,
            max_condition=cfg.max_condition,
        )
        save_operator(op, output)
        click.echo(f"Wrote operator with {op.nnz} nonzeros to {output}")


@main.command(name="apply")
@click.option(
    "--operator",
    "operator_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--input",
    "input_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="CSV of cell values of f on one dyadic level",
)
@click.option("--rhs", type=click.Choice(RHS_KINDS), help="Built-in right-hand side")
@click.option(
    "--output", "-o", type=click.Path(dir_okay=False, path_type=Path), required=True
)
def apply_command(
    operator_dir: Path, input_path: Path | None, rhs: str | None, output: Path
) -> None:
    """Apply a stored operator to f and write the cell values of the result."""
    with _reporting_errors():
        if (input_path is None) == (rhs is None):
            raise click.UsageError("give exactly one of --input and --rhs")
        op = load_operator(operator_dir)
        if input_path is not None:
            f = load_piecewise_constant(input_path, op.info.d)
        else:
            f = rhs_function(rhs or "indicator", op.info.d)
        result = apply(op, f)
        save_vector(result.values, output)
        click.echo(f"Wrote {len(result.values)} cell values to {output}")


@main.command()
@config_option
@preset_option
@sampling_options
@click.option("--levels", "-L", type=int, multiple=True, help="Levels to sweep")
@click.option("--rhs", type=click.Choice(RHS_KINDS))
@click.option("--gradient/--no-gradient", default=None, help="Also report H1 errors")
@click.option("--reference-samples", type=int, help="Reference samples M_h")
@click.option("--no-timing", is_flag=True, help="Leave the seconds column empty")
@click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--operator-dir", type=click.Path(file_okay=False, path_type=Path))
def experiment(
    config: Path | None,
    preset: str | None,
    levels: tuple[int, ...],
    no_timing: bool,
    output: Path | None,
    **overrides: Any,
) -> None:
    """Run an error-versus-nnz sweep and write the CSV table."""
    with _reporting_errors():
        cfg = _resolve_config(
            config,
            preset,
            levels=levels or None,
            record_timing=False if no_timing else None,
            output_csv=output,
            **overrides,
        )
        rows = run_experiment(cfg)
        console = Console()
        console.print(rows_table(rows))
        console.print(summary_table(fit_report(rows, cfg.d)))


@main.command(name="report")
@click.argument(
    "csv_path", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option("-d", "--dimension", "d", type=click.IntRange(1, 3), default=1)
@click.option("--tail", type=int, help="Fit over the last N rows only")
def report_command(csv_path: Path, d: int, tail: int | None) -> None:
    """Fit the log-log rate of a CSV table written by `experiment`."""
    with _reporting_errors():
        rows = read_rows(csv_path)
        summary = fit_report(rows, d, tail)
        console = Console()
        console.print(rows_table(rows))
        console.print(summary_table(summary))


if __name__ == "__main__":
    main()
