"""
asymcc Command Line

Typer application entry point; mounts every command module.
"""

from typing import Optional

import structlog
import typer

from . import __version__
from .commands import bench, certify, gen, optf, solve
from .config import get_settings
from .logs import configure_logging

logger = structlog.get_logger(__name__)

app = typer.Typer(
    name="asymcc",
    help="Correlation clustering with asymmetric classification errors",
    no_args_is_help=True,
    add_completion=False,
)


def _version(value: bool) -> None:
    if value:
        typer.echo(__version__)
        raise typer.Exit()


@app.callback()
def main_callback(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Log level (CC_LOG_LEVEL)"),
    log_json: Optional[bool] = typer.Option(None, "--log-json/--log-console", help="Log format (CC_LOG_JSON)"),
    version: bool = typer.Option(False, "--version", callback=_version, is_eager=True),
) -> None:
    """Configure logging once per invocation."""
    settings = get_settings()
    configure_logging(
        level=log_level or settings.CC_LOG_LEVEL,
        json=settings.CC_LOG_JSON if log_json is None else log_json,
    )


# Mount commands
app.command("solve")(solve.command)
app.command("certify")(certify.command)
app.command("optf")(optf.command)
app.add_typer(gen.router, name="gen")
app.command("bench")(bench.command)


def main() -> None:
    """Console script entry point."""
    app()


if __name__ == "__main__":
    main()
