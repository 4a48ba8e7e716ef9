"""Error types shared across the package.

Every raised error carries a stable machine-readable ``code`` so CLI and
tests can match on it without parsing messages.
"""

from __future__ import annotations

from typing import Any


class PcigError(Exception):
    """Base error; ``code`` is a stable identifier like ``NO_OBJECTS_FOUND``."""

    def __init__(self, code: str, message: str, **details: Any) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details


class PlanParseError(PcigError):
    """Plan document failed to decode; ``path`` points at the offending field."""

    def __init__(self, code: str, message: str, path: str) -> None:
        super().__init__(code, f"{message} (at {path})", path=path)
        self.path = path


class PlanValidationError(PcigError):
    """A plan violating its invariants was passed where a valid one is required."""

    def __init__(self, codes: list[str]) -> None:
        super().__init__("INVALID_PLAN", f"plan failed validation: {', '.join(codes)}", codes=codes)
        self.codes = codes


class AnalysisError(PcigError):
    pass


class GraphError(PcigError):
    pass


class LayoutError(PcigError):
    pass


class DispatchError(PcigError):
    pass


class BackendError(PcigError):
    pass


class EvalError(PcigError):
    pass
