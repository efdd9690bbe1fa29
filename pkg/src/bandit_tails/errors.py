"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BanditTailsError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(BanditTailsError, ValueError):
    """One or more invalid inputs.

    ``errors`` holds ``(field_path, message)`` pairs so callers can report
    every failure at once instead of only the first.
    """

    def __init__(self, errors: list[tuple[str, str]] | str):
        if isinstance(errors, str):
            errors = [("", errors)]
        self.errors = list(errors)
        lines = [f"{path}: {msg}" if path else msg for path, msg in self.errors]
        super().__init__("; ".join(lines))


class ParseError(BanditTailsError, ValueError):
    pass


class ConfigError(BanditTailsError, ValueError):
    pass


class DomainError(BanditTailsError, ValueError):
    pass


class InvalidQuery(BanditTailsError, ValueError):
    pass


class InfeasibleQuery(BanditTailsError, ValueError):
    pass


class InsufficientData(BanditTailsError, ValueError):
    pass


class DegenerateInstance(BanditTailsError, ValueError):
    pass


class EpisodeError(BanditTailsError):
    """An episode failed inside a batch; carries the replication id."""

    def __init__(self, rep_id: int, cause: BaseException):
        self.rep_id = rep_id
        self.cause = cause
        super().__init__(f"replication {rep_id}: {type(cause).__name__}: {cause}")
