"""
Certify Command

Grid certification of a rounding function against a claimed factor.
"""

from pathlib import Path
from typing import Optional

import structlog
import typer

from ..config import get_settings
from ..io import read_table
from ..model import GraphMode
from ..rounding import make_f
from ..triples import certify_grid
from .common import EXIT_CERTIFICATION, RunConfig, emit, handle_errors

logger = structlog.get_logger(__name__)


@handle_errors
def command(
    alpha: float = typer.Option(..., "--alpha", help="Weight-band ratio in (0, 1]"),
    mode: GraphMode = typer.Option(GraphMode.COMPLETE, "--mode"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Factor to certify (default: the factor A of the function)"),
    step: Optional[float] = typer.Option(None, "--step", help="Grid spacing (CC_GRID_STEP)"),
    table: Optional[Path] = typer.Option(None, "--table", help="Certify a tabulated function instead"),
    eps: Optional[float] = typer.Option(None, "--eps", help="Pass threshold (CC_EPS_CERT)"),
    refine: bool = typer.Option(True, "--refine/--no-refine"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON report here"),
) -> None:
    """Check ALG <= rho * LP on every grid triangle; exit 2 when the margin is negative."""
    settings = get_settings()
    f = read_table(table, alpha=alpha) if table is not None else make_f(alpha, mode)
    rho = f.A if rho is None else rho

    report = certify_grid(
        alpha, f, rho, step=step, mode=mode, eps_cert=eps, refine=refine, threads=threads
    )
    config = RunConfig(
        command="certify",
        input=str(table) if table else None,
        output=str(out) if out else None,
        alpha=alpha,
        step=report.step,
        rho=rho,
        mode=mode.value,
        tolerances={"eps_cert": report.eps_cert},
        extra={"refine": refine, "grid_step_default": settings.CC_GRID_STEP},
    )
    emit(report.model_copy(update={"config": config.model_dump()}), out)
    if not report.passed:
        logger.warning("certification_failed", min_margin=report.min_margin, argmin=report.argmin)
        raise typer.Exit(code=EXIT_CERTIFICATION)
