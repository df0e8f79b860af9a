"""Exception types with machine-readable error codes.

Every error raised by the library carries a stable ``code`` string so the CLI
can emit structured error objects and callers can branch without parsing
messages.
"""

from __future__ import annotations


class MitoFuseError(Exception):
    """Base class for all library errors."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def to_json_obj(self) -> dict:
        return {"error": {"code": self.code, "message": self.message}}


class ValidationError(MitoFuseError):
    """Invalid input values or violated operation preconditions.

    Codes used across the library: ``frame-mismatch``, ``out-of-bounds``,
    ``duplicate-view``, ``patch-too-large``, ``empty-eval``,
    ``degenerate-classes``, ``singular-stain-matrix``, ``length-mismatch``,
    plus construction-time codes such as ``invalid-box`` and ``invalid-meta``.
    """


class FileFormatError(MitoFuseError):
    """Malformed or unrecognized input file.

    Carries best-effort ``path``, ``line`` and ``field`` diagnostics for the
    CLI to surface.
    """

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        field: str | None = None,
        code: str = "malformed-file",
    ):
        super().__init__(code, message)
        self.path = path
        self.line = line
        self.field = field

    def to_json_obj(self) -> dict:
        obj: dict = {"code": self.code, "message": self.message}
        if self.path is not None:
            obj["path"] = self.path
        if self.line is not None:
            obj["line"] = self.line
        if self.field is not None:
            obj["field"] = self.field
        return {"error": obj}
