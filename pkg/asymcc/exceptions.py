"""
Error Types

Exception hierarchy shared by the library and the command line.
"""

from typing import Any, Dict, Optional


class AsymCCError(Exception):
    """Root of all toolkit errors."""

    code: int = 1
    error_type: str = "internal_error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        """Render the error envelope used in reports and on stderr."""
        payload: Dict[str, Any] = {
            "code": self.code,
            "message": self.message,
            "type": self.error_type,
        }
        if self.context:
            payload["context"] = self.context
        return {"error": payload}


class InvalidInstanceError(AsymCCError):
    code = 3
    error_type = "invalid_instance"


class DimensionError(AsymCCError):
    code = 3
    error_type = "dimension_error"


class InstanceFormatError(AsymCCError):
    code = 3
    error_type = "format_error"

    def __init__(self, message: str, line: Optional[int] = None, **context: Any):
        if line is not None:
            message = f"line {line}: {message}"
            context["line"] = line
        super().__init__(message, **context)


class TableFormatError(InstanceFormatError):
    error_type = "table_format_error"


class ModelParameterError(AsymCCError):
    code = 3
    error_type = "parameter_error"


class SizeLimitError(AsymCCError):
    code = 3
    error_type = "size_limit"


class GraphSamplingError(AsymCCError):
    error_type = "graph_sampling_error"


class SolverError(AsymCCError):
    """LP failure; `stats` holds whatever the solver got through before failing."""

    error_type = "solver_error"

    def __init__(self, message: str, stats: Optional[Any] = None, **context: Any):
        super().__init__(message, **context)
        self.stats = stats

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        if self.stats is not None:
            payload["error"]["stats"] = self.stats.model_dump()
        return payload


class OptimalFError(AsymCCError):
    error_type = "optimal_f_error"
