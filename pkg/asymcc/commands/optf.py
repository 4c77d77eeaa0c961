"""
Optf Command

Compute the optimal tabulated rounding function and its factor.
"""

from pathlib import Path
from typing import Optional

import structlog
import typer

from ..config import get_settings
from ..io import write_table
from ..optimal import compute_a_opt
from .common import EXIT_CERTIFICATION, RunConfig, emit, handle_errors

logger = structlog.get_logger(__name__)


@handle_errors
def command(
    alpha: float = typer.Option(..., "--alpha", help="Weight-band ratio in (0, 1]"),
    step: Optional[float] = typer.Option(None, "--step", help="Table grid step h (CC_OPTF_STEP)"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Binary search tolerance on A (CC_OPTF_TOL)"),
    table: Optional[Path] = typer.Option(None, "--table", help="Write the (x, f) table CSV here"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON summary here"),
) -> None:
    """Binary-search the smallest A admitting a feasible table; exit 2 if re-certification fails."""
    settings = get_settings()
    result = compute_a_opt(alpha, h=step, tol=tol, threads=threads)
    if table is not None:
        write_table(result.f, table)

    config = RunConfig(
        command="optf",
        output=str(out) if out else None,
        alpha=alpha,
        step=result.step,
        tolerances={"tol": result.tol, "recertify_eps": result.certification.eps_cert},
        extra={"table": str(table) if table else None, "default_step": settings.CC_OPTF_STEP},
    )
    emit(result.summary().model_copy(update={"config": config.model_dump()}), out)
    if not result.certified:
        raise typer.Exit(code=EXIT_CERTIFICATION)
