"""
Bench Command

Sweep alphas and sizes over random instances and write the mean cost
ratios of LP-based pivot rounding and of the weight-blind pivot as CSV.
"""

import csv
from pathlib import Path
from typing import List, Optional

import numpy as np
import structlog
import typer
from pydantic import BaseModel, Field
from rich.table import Table

from ..config import get_settings
from ..generators import random_instance
from ..model import disagreement_cost, normalize
from ..oracle import exact_opt
from ..parallel import thread_map
from ..relaxation import solve_metric_lp
from ..rounding import (
    approximation_factor,
    make_f,
    rounding_trials,
    trial_seeds,
    weight_blind_pivot,
)
from .common import RunConfig, console, emit, handle_errors, parse_list

logger = structlog.get_logger(__name__)


class BenchRow(BaseModel):
    alpha: float
    n: int
    instances: int
    trials: int
    a_thm: float
    lp_total: float
    ratio_lp_pivot: Optional[float] = None
    ratio_weight_blind: Optional[float] = None
    ratio_opt: Optional[float] = None


class BenchReport(BaseModel):
    schema_version: int = 1
    config: RunConfig
    rows: List[BenchRow] = Field(default_factory=list)


class _Cell(BaseModel):
    lp: float
    pivot: float
    blind: float
    opt: Optional[float] = None


def _ratio(total: float, lp_total: float) -> Optional[float]:
    return total / lp_total if lp_total > 1e-12 else None


def _run_instance(alpha: float, n: int, density: float, seed: int, trials: int, exact: bool) -> _Cell:
    inst = random_instance(n, alpha, density, seed)
    solution = solve_metric_lp(normalize(inst), threads=1)
    f = make_f(alpha, inst.mode)
    pivot = rounding_trials(inst, solution, f, trials, seed, threads=1)
    blind = [
        disagreement_cost(inst, weight_blind_pivot(inst, s)) for s in trial_seeds(seed + 1, trials)
    ]
    return _Cell(
        lp=solution.objective,
        pivot=float(np.mean([r.cost for r in pivot])),
        blind=float(np.mean(blind)),
        opt=exact_opt(inst).opt_cost if exact else None,
    )


def _write_csv(rows: List[BenchRow], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(BenchRow.model_fields))
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())


@handle_errors
def command(
    csv_out: Path = typer.Option(..., "--csv", help="Write the ratio table here"),
    alphas: Optional[str] = typer.Option(None, "--alphas", help="Comma-separated alphas (CC_BENCH_ALPHAS)"),
    sizes: str = typer.Option("6,8", "--sizes", help="Comma-separated vertex counts"),
    instances: int = typer.Option(5, "--instances", min=1, help="Random instances per cell"),
    trials: Optional[int] = typer.Option(None, "--trials", min=1),
    density: float = typer.Option(0.5, "--density"),
    seed: int = typer.Option(..., "--seed"),
    exact: bool = typer.Option(False, "--exact/--no-exact", help="Also compare against the exact optimum"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON report here"),
) -> None:
    """Mean cost ratios over random instances for every (alpha, n) cell."""
    settings = get_settings()
    alpha_list = parse_list(alphas) if alphas else settings.bench_alphas
    size_list = parse_list(sizes, int)
    trials = trials or settings.CC_TRIALS

    cells = [
        (alpha, n, s)
        for alpha in alpha_list
        for n in size_list
        for s in trial_seeds(seed, instances)
    ]
    results = thread_map(
        lambda c: _run_instance(c[0], c[1], density, c[2], trials, exact), cells, threads
    )

    rows: List[BenchRow] = []
    for alpha in alpha_list:
        for n in size_list:
            group = [r for c, r in zip(cells, results) if c[0] == alpha and c[1] == n]
            lp_total = sum(r.lp for r in group)
            rows.append(
                BenchRow(
                    alpha=alpha,
                    n=n,
                    instances=len(group),
                    trials=trials,
                    a_thm=approximation_factor(alpha),
                    lp_total=lp_total,
                    ratio_lp_pivot=_ratio(sum(r.pivot for r in group), lp_total),
                    ratio_weight_blind=_ratio(sum(r.blind for r in group), lp_total),
                    ratio_opt=_ratio(sum(r.opt for r in group), lp_total) if exact else None,
                )
            )
            logger.info("bench_cell", alpha=alpha, n=n, ratio=rows[-1].ratio_lp_pivot)
    _write_csv(rows, csv_out)

    table = Table(title="mean cost / LP")
    for column in ("alpha", "n", "A_thm", "LP pivot", "weight-blind", "OPT"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            f"{row.alpha:g}",
            str(row.n),
            f"{row.a_thm:.3f}",
            *(f"{v:.3f}" if v is not None else "-" for v in (row.ratio_lp_pivot, row.ratio_weight_blind, row.ratio_opt)),
        )
    console.print(table)

    config = RunConfig(
        command="bench",
        output=str(csv_out),
        seed=seed,
        trials=trials,
        extra={
            "alphas": alpha_list,
            "sizes": size_list,
            "instances": instances,
            "density": density,
            "exact": exact,
        },
    )
    emit(BenchReport(config=config, rows=rows), out)
