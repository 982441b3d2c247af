"""Log-log rate fits and tables for error rows."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from rich.table import Table

from ..core.models import ErrorRow

# A fitted slope counts as optimal when within this distance of -1/d.
SLOPE_SLACK = 0.2

# Fewer rows than this give no slope.
MIN_POINTS = 3


@dataclass(frozen=True)
class SlopeReport:
    """Fitted rate of ``l2_error`` against ``nnz``."""

    slope: float | None
    target: float
    points: int

    @property
    def attained(self) -> bool:
        return self.slope is not None and self.slope <= self.target + SLOPE_SLACK


def fit_slope(nnz: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) over log(nnz)."""
    x = np.log(np.asarray(nnz, dtype=np.float64))
    y = np.log(np.asarray(errors, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def report(
    rows: Sequence[ErrorRow], d: int = 1, tail: int | None = None
) -> SlopeReport:
    """Fit the rate over the last ``tail`` rows (all rows by default)."""
    usable = [row for row in rows if row.l2_error > 0 and row.nnz > 0]
    if tail is not None:
        usable = usable[-tail:]
    target = -1.0 / d
    if len(usable) < MIN_POINTS or len({row.nnz for row in usable}) < MIN_POINTS:
        return SlopeReport(None, target, len(usable))
    slope = fit_slope([row.nnz for row in usable], [row.l2_error for row in usable])
    return SlopeReport(slope, target, len(usable))


def rows_table(rows: Sequence[ErrorRow]) -> Table:
    table = Table(title="Error versus nonzeros")
    for name in ("L", "nnz", "l2_error", "h1_error", "seconds", "M"):
        table.add_column(name, justify="right")
    for row in rows:
        table.add_row(
            str(row.L),
            str(row.nnz),
            f"{row.l2_error:.4e}",
            "-" if row.h1_error is None else f"{row.h1_error:.4e}",
            "-" if row.seconds is None else f"{row.seconds:.2f}",
            str(row.M),
        )
    return table


def summary_table(summary: SlopeReport) -> Table:
    table = Table(title="Rate of convergence", show_header=False)
    table.add_column("quantity")
    table.add_column("value", justify="right")
    slope = "-" if summary.slope is None else f"{summary.slope:.3f}"
    table.add_row("fitted slope", slope)
    table.add_row("target", f"{summary.target:.3f}")
    table.add_row("points", str(summary.points))
    status = "[green]yes[/green]" if summary.attained else "[red]no[/red]"
    table.add_row("attained", status)
    return table
