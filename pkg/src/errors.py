from __future__ import annotations

from typing import Optional


class SwaLabError(Exception):
    """Base class for every error the lab raises on purpose."""

    exit_code: int = 1


class ConfigError(SwaLabError):
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None) -> None:
        self.key = key
        self.line = line
        where = []
        if key:
            where.append(f"key={key}")
        if line is not None:
            where.append(f"line={line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class DomainError(SwaLabError, ValueError):
    """An operation was called outside its precondition."""

    exit_code = 2


class DegenerateBasisError(DomainError):
    pass


class ShapeError(SwaLabError, ValueError):
    exit_code = 3


class NumericError(SwaLabError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, layer: Optional[int] = None) -> None:
        self.layer = layer
        super().__init__(message if layer is None else f"{message} (layer={layer})")


class CheckpointError(SwaLabError, OSError):
    exit_code = 4

    def __init__(self, message: str, code: str) -> None:
        self.code = code
        super().__init__(f"[{code}] {message}")


class PhaseError(SwaLabError):
    """Failure inside one experiment phase; keeps the exit code of its cause."""

    def __init__(self, phase: str, cause: BaseException) -> None:
        self.phase = phase
        self.cause = cause
        if isinstance(cause, SwaLabError):
            self.exit_code = cause.exit_code
        elif isinstance(cause, OSError):
            self.exit_code = 4
        super().__init__(f"phase '{phase}' failed: {cause}")
