"""
Shared pieces of the command modules: the run configuration embedded in
every report, error-to-exit-code translation and report output.
"""

import functools
import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import structlog
import typer
from pydantic import BaseModel, Field, ValidationError
from rich.console import Console

from ..exceptions import AsymCCError
from ..io import write_report

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CERTIFICATION = 2
EXIT_INPUT = 3

console = Console(stderr=True)


class RunConfig(BaseModel):
    """Everything needed to replay a command."""

    command: str
    input: Optional[str] = None
    output: Optional[str] = None
    alpha: Optional[float] = None
    w: Optional[float] = None
    seed: Optional[int] = None
    trials: Optional[int] = None
    step: Optional[float] = None
    rho: Optional[float] = None
    mode: Optional[str] = None
    tolerances: Dict[str, float] = Field(default_factory=dict)
    extra: Dict[str, Any] = Field(default_factory=dict)


def parse_list(text: str, kind: Callable = float) -> List:
    """Comma-separated flag value to a list."""
    try:
        return [kind(item.strip()) for item in text.split(",") if item.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected a comma-separated list, got {text!r}") from None


def _fail(payload: Dict[str, Any], code: int) -> None:
    typer.echo(json.dumps(payload), err=True)
    raise typer.Exit(code=code)


def handle_errors(fn: Callable) -> Callable:
    """Turn toolkit errors into the error envelope on stderr plus an exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AsymCCError as e:
            logger.error("command_failed", error_type=e.error_type, message=e.message)
            _fail(e.to_dict(), e.code)
        except ValidationError as e:
            logger.error("command_failed", error_type="validation_error", errors=e.error_count())
            _fail(
                {
                    "error": {
                        "code": EXIT_INPUT,
                        "message": str(e),
                        "type": "validation_error",
                    }
                },
                EXIT_INPUT,
            )

    return wrapper


def emit(report: BaseModel, out: Optional[Path]) -> None:
    """Print the JSON report on stdout and save it when ``out`` is set."""
    text = write_report(report, out)
    typer.echo(text)
    if out is not None:
        logger.info("report_written", path=str(out))
