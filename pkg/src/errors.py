"""
Exception hierarchy for swe-femlab.

Library code raises these; only the CLI turns them into process exit codes:
  0 success, 1 config/input error, 2 acceptance breach, 3 numerical failure.
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ACCEPTANCE = 2
EXIT_NUMERICAL = 3


class SweFemlabError(Exception):
    """Base class. Subclasses pin the exit code the CLI reports."""
    exit_code = EXIT_NUMERICAL


class ConfigError(SweFemlabError, ValueError):
    """Invalid configuration value, key or geometry request."""
    exit_code = EXIT_CONFIG


class MeshFormatError(ConfigError):
    """Mesh file could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, path: str | None = None, line_number: int | None = None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location = f"{path}"
            if line_number is not None:
                location += f":{line_number}"
            location += ": "
        super().__init__(f"{location}{message}")


class MeshValidationError(ConfigError):
    """Mesh violates orientation, edge-sharing or boundary invariants."""


class AcceptanceError(SweFemlabError):
    """An experiment's acceptance threshold was breached."""
    exit_code = EXIT_ACCEPTANCE

    def __init__(self, message: str, result: dict | None = None):
        self.result = result or {}
        super().__init__(message)


class NumericalError(SweFemlabError, RuntimeError):
    """Singular element block, solver non-convergence or eigensolver failure."""
    exit_code = EXIT_NUMERICAL
