"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI returns when the error
escapes a command. The table lives in docs/CONFIGURATION.md; keep both in
step when adding a class.
"""

from typing import Optional


class VipError(Exception):
    """Base class for errors the CLI reports without a traceback."""

    exit_code: int = 1

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message


class DomainError(VipError, ValueError):
    """An operation was called outside its mathematical domain."""

    exit_code = 4


class BinningMismatchError(DomainError):
    """Two spectra that must share binning do not."""

    exit_code = 6


class OutputError(VipError, OSError):
    """An output location could not be created or written."""

    exit_code = 3


class InputError(VipError, OSError):
    """An input artifact (spectrum, report, table) could not be read."""

    exit_code = 3


class FileFormatError(VipError):
    """A persisted artifact (spectrum, report, frame, table) failed to parse.

    ``offset`` is the byte offset of the offending record when known.
    """

    exit_code = 5

    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MissingGeometricFactorError(VipError):
    """A limit was requested but no geometric factor is available."""

    exit_code = 7

    def __init__(self) -> None:
        super().__init__(
            "No geometric factor available: set [signal] geometric_factor in the config "
            "(the published value is 0.021 x 0.48 = 0.01008), or run `vip-sim geom-factor` "
            "and pass its report with --geom-factor."
        )


class ConfigError(VipError):
    """Base class for run-configuration problems."""

    exit_code = 2


class ConfigFileNotFoundError(ConfigError):
    exit_code = 10


class ConfigSyntaxError(ConfigError):
    """The config file is not well-formed TOML/YAML, or repeats a key."""

    exit_code = 11

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigValidationError(ConfigError):
    """The config parsed but violates the schema or an invariant.

    ``problems`` holds one ``(dotted_key, line_or_None, reason)`` tuple per
    offending field.
    """

    exit_code = 12

    def __init__(self, problems: list[tuple[str, Optional[int], str]]) -> None:
        self.problems = problems
        lines = []
        for key, line, reason in problems:
            where = f"line {line}: " if line is not None else ""
            lines.append(f"  {where}{key}: {reason}")
        super().__init__("Invalid run configuration:\n" + "\n".join(lines))


__all__ = [
    "VipError",
    "DomainError",
    "BinningMismatchError",
    "OutputError",
    "InputError",
    "FileFormatError",
    "MissingGeometricFactorError",
    "ConfigError",
    "ConfigFileNotFoundError",
    "ConfigSyntaxError",
    "ConfigValidationError",
]
