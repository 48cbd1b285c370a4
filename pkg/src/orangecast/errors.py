"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation and parse
failures exit 1, I/O failures exit 2, numerical failures exit 3.
"""


class OrangecastError(Exception):
    """Base class for package errors."""


class ValidationError(OrangecastError):
    """Invalid inputs: bad values, schema violations, unknown names."""


class ParseError(ValidationError):
    """Malformed file content. Carries the offending path and line."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc = f"{loc}line {line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class ConfigError(ValidationError):
    """Missing or inconsistent configuration (parameter tables, presets)."""


class NumericalError(OrangecastError):
    """A computation could not be completed (degenerate fits, empty designs)."""
