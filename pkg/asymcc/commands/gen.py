"""
Gen Commands

Write generated instances in the cc-instance v1 format.
"""

import json
from pathlib import Path
from typing import Optional

import structlog
import typer
from pydantic import BaseModel

from ..generators import (
    GapParams,
    PlantedParams,
    gap_instance,
    planted_instance,
    random_instance,
    suggested_gap_n,
    two_weight_instance,
)
from ..io import dumps_instance, write_instance, write_solution
from ..model import Instance
from .common import RunConfig, handle_errors, parse_list

logger = structlog.get_logger(__name__)

router = typer.Typer(help="Generate instances", no_args_is_help=True)


class GenReport(BaseModel):
    schema_version: int = 1
    config: RunConfig
    n: int
    pairs: int
    mode: str
    alpha: float
    w_scale: float
    files: dict


def _write(inst: Instance, out: Optional[Path], config: RunConfig, **files: Optional[Path]) -> None:
    """Instance to ``out`` (plus a JSON summary on stdout), or the instance text on stdout."""
    if out is None:
        typer.echo(dumps_instance(inst), nl=False)
        return
    write_instance(inst, out)
    report = GenReport(
        config=config,
        n=inst.n,
        pairs=int((inst.signs != 0).sum()),
        mode=inst.mode.value,
        alpha=inst.alpha,
        w_scale=inst.w_scale,
        files={"instance": str(out), **{k: str(v) for k, v in files.items() if v is not None}},
    )
    typer.echo(report.model_dump_json(indent=2))
    logger.info("instance_written", path=str(out), n=inst.n)


@router.command("planted")
@handle_errors
def planted(
    p: float = typer.Option(..., "--p", help="Within-cluster positive probability"),
    q: float = typer.Option(..., "--q", help="Cross-cluster negative probability"),
    sizes: str = typer.Option(..., "--sizes", help="Cluster sizes, e.g. 5,5"),
    seed: int = typer.Option(..., "--seed"),
    out: Optional[Path] = typer.Option(None, "--out"),
    truth: Optional[Path] = typer.Option(None, "--truth", help="Write the planted labels (JSON) here"),
) -> None:
    """Planted partition with noisy signs and log-likelihood weights."""
    params = PlantedParams(sizes=parse_list(sizes, int), p_plus=p, q_minus=q, seed=seed)
    inst, clustering = planted_instance(params)
    if truth is not None:
        truth.write_text(json.dumps({"labels": clustering.labels.tolist()}) + "\n", encoding="utf-8")
    config = RunConfig(
        command="gen planted",
        output=str(out) if out else None,
        seed=seed,
        extra={"p_plus": p, "q_minus": q, "sizes": params.sizes},
    )
    _write(inst, out, config, truth=truth)


@router.command("gap")
@handle_errors
def gap(
    alpha: float = typer.Option(..., "--alpha"),
    n: Optional[int] = typer.Option(None, "--n", help="Vertex count (default: suggested size)"),
    bipartite: bool = typer.Option(False, "--bipartite/--complete"),
    seed: int = typer.Option(0, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out"),
    solution: Optional[Path] = typer.Option(None, "--solution", help="Fractional solution CSV (default: <out>.x.csv)"),
) -> None:
    """Random 3-regular expander with its truncated-distance fractional solution."""
    n = suggested_gap_n(alpha) if n is None else n
    params = GapParams(n=n, alpha=alpha, bipartite=bipartite, seed=seed)
    inst, x = gap_instance(params)
    if solution is None and out is not None:
        solution = out.with_name(out.name + ".x.csv")
    if solution is not None:
        write_solution(x, solution)
    config = RunConfig(
        command="gen gap",
        output=str(out) if out else None,
        alpha=alpha,
        seed=seed,
        mode="bipartite" if bipartite else "complete",
        extra={"n": n},
    )
    _write(inst, out, config, solution=solution)


@router.command("random")
@handle_errors
def random_signs(
    n: int = typer.Option(..., "--n"),
    alpha: float = typer.Option(..., "--alpha"),
    density: float = typer.Option(0.5, "--density", help="Probability that a pair is positive"),
    seed: int = typer.Option(..., "--seed"),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """Random signs, weights uniform inside the bands."""
    inst = random_instance(n, alpha, density, seed)
    config = RunConfig(
        command="gen random",
        output=str(out) if out else None,
        alpha=alpha,
        seed=seed,
        extra={"n": n, "density": density},
    )
    _write(inst, out, config)


@router.command("two-weight")
@handle_errors
def two_weight(
    n: int = typer.Option(..., "--n"),
    w_plus: float = typer.Option(..., "--w-plus"),
    w_minus: float = typer.Option(..., "--w-minus"),
    density: float = typer.Option(0.5, "--density"),
    seed: int = typer.Option(..., "--seed"),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """All positive pairs weigh w+ and all negative pairs w-."""
    inst = two_weight_instance(n, w_plus, w_minus, density, seed)
    config = RunConfig(
        command="gen two-weight",
        output=str(out) if out else None,
        w=inst.w_scale,
        alpha=inst.alpha,
        seed=seed,
        extra={"n": n, "w_plus": w_plus, "w_minus": w_minus, "density": density},
    )
    _write(inst, out, config)
