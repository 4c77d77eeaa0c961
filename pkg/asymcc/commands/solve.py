"""
Solve Command

Load an instance, solve its metric LP and round it over seeded trials.
"""

import dataclasses
import math
from pathlib import Path
from typing import List, Optional

import structlog
import typer
from pydantic import BaseModel, Field

from ..config import get_settings
from ..exceptions import InvalidInstanceError
from ..io import read_instance, read_table, write_solution, write_trace
from ..model import normalize, validate_instance
from ..oracle import exact_opt
from ..relaxation import MetricSolution, SolveMode, SolverStats, solve_metric_lp
from ..rounding import approximation_factor, make_f, pivot_round, rounding_trials
from .common import RunConfig, emit, handle_errors

logger = structlog.get_logger(__name__)


class TrialSummary(BaseModel):
    seed: int
    cost: float


class ExactSummary(BaseModel):
    opt_cost: float
    partitions_enumerated: int
    ratio_best: Optional[float] = None


class SolveReport(BaseModel):
    schema_version: int = 1
    config: RunConfig
    n: int
    mode: str
    alpha: float
    w_scale: float
    rounding: dict
    lp_objective: float
    solver: SolverStats
    a_thm: float
    best_cost: float
    mean_cost: float
    worst_cost: float
    cost_stderr: float
    ratio_best: Optional[float] = None
    ratio_mean: Optional[float] = None
    trials: List[TrialSummary] = Field(default_factory=list)
    exact: Optional[ExactSummary] = None


def _ratio(cost: float, lp: float) -> Optional[float]:
    return cost / lp if lp > 1e-12 else None


@handle_errors
def command(
    instance: Path = typer.Argument(..., help="Instance file in cc-instance v1 format"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Override the alpha in the instance file"),
    w: Optional[float] = typer.Option(None, "--w", help="Override the weight scale w in the instance file"),
    seed: int = typer.Option(..., "--seed", help="Base seed of the rounding trials"),
    trials: Optional[int] = typer.Option(None, "--trials", min=1, help="Rounding trials (CC_TRIALS)"),
    lp: SolveMode = typer.Option(SolveMode.LAZY, "--lp", help="Materialize all triangles or separate lazily"),
    table: Optional[Path] = typer.Option(None, "--table", help="Tabulated rounding function CSV"),
    exact: Optional[bool] = typer.Option(None, "--exact/--no-exact", help="Run the exact oracle (default: when n fits)"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON report here"),
    solution_out: Optional[Path] = typer.Option(None, "--solution", help="Write the LP lengths CSV here"),
    trace_out: Optional[Path] = typer.Option(None, "--trace", help="Write the best trial's trace (JSON lines)"),
) -> None:
    """Solve the LP, round it over seeded trials and report costs against the LP."""
    settings = get_settings()
    trials = trials or settings.CC_TRIALS

    inst = read_instance(instance)
    if w is not None and w <= 0:
        raise InvalidInstanceError("w must be positive", w=w)
    if alpha is not None or w is not None:
        inst = dataclasses.replace(
            inst,
            alpha=inst.alpha if alpha is None else alpha,
            w_scale=inst.w_scale if w is None else w,
        )
        logger.info("instance_overridden", alpha=inst.alpha, w=inst.w_scale)
    report = validate_instance(inst)
    if not report.valid:
        raise InvalidInstanceError(
            "instance violates its weight bands",
            violations=len(report.violations),
            scale_ok=report.scale_ok,
        )

    solution = solve_metric_lp(normalize(inst), mode=lp, threads=threads)
    # lengths are scale-free; the objective is reported in the file's units
    solution = MetricSolution(
        x=solution.x, objective=solution.objective * inst.w_scale, stats=solution.stats
    )
    f = read_table(table) if table is not None else make_f(inst.alpha, inst.mode)

    results = rounding_trials(inst, solution, f, trials, seed, threads)
    costs = [r.cost for r in results]
    mean = sum(costs) / len(costs)
    stderr = (
        math.sqrt(sum((c - mean) ** 2 for c in costs) / (len(costs) - 1) / len(costs))
        if len(costs) > 1
        else 0.0
    )
    best = min(results, key=lambda r: r.cost)

    exact_summary = None
    run_exact = inst.n <= settings.CC_EXACT_CAP if exact is None else exact
    if run_exact:
        oracle = exact_opt(inst)
        exact_summary = ExactSummary(
            opt_cost=oracle.opt_cost,
            partitions_enumerated=oracle.partitions_enumerated,
            ratio_best=best.cost / oracle.opt_cost if oracle.opt_cost > 1e-12 else None,
        )

    if solution_out is not None:
        write_solution(solution, solution_out)
    if trace_out is not None:
        _, trace = pivot_round(solution, f, best.seed)
        write_trace(trace, trace_out)

    config = RunConfig(
        command="solve",
        input=str(instance),
        output=str(out) if out else None,
        alpha=inst.alpha,
        w=inst.w_scale,
        seed=seed,
        trials=trials,
        mode=inst.mode.value,
        tolerances={"tau_feas": settings.CC_TAU_FEAS, "tau_opt": settings.CC_TAU_OPT},
        extra={
            "lp": lp.value,
            "table": str(table) if table else None,
            "alpha_override": alpha,
            "w_override": w,
        },
    )
    logger.info("solve_finished", n=inst.n, lp=solution.objective, best=best.cost, mean=mean)
    emit(
        SolveReport(
            config=config,
            n=inst.n,
            mode=inst.mode.value,
            alpha=inst.alpha,
            w_scale=inst.w_scale,
            rounding=f.describe(),
            lp_objective=solution.objective,
            solver=solution.stats,
            a_thm=approximation_factor(inst.alpha, inst.mode),
            best_cost=best.cost,
            mean_cost=mean,
            worst_cost=max(costs),
            cost_stderr=stderr,
            ratio_best=_ratio(best.cost, solution.objective),
            ratio_mean=_ratio(mean, solution.objective),
            trials=[TrialSummary(seed=r.seed, cost=r.cost) for r in results],
            exact=exact_summary,
        ),
        out,
    )
