"""Exception types raised across the package."""

from __future__ import annotations


class GFDictError(Exception):
    """Base class for every error raised by gfdict."""


class UnsupportedFieldWidth(GFDictError, ValueError):
    pass


class DivisionByZero(GFDictError, ZeroDivisionError):
    pass


class DimensionMismatch(GFDictError, ValueError):
    pass


class Singular(GFDictError):
    """The equation set is dependent (or inconsistent); re-draw the hash functions."""

    def __init__(self, rank: int, rows: int, consistent: bool | None = None):
        self.rank = rank
        self.rows = rows
        self.consistent = consistent
        super().__init__(f"singular system: rank {rank} < {rows} rows")


class SystemTooLarge(GFDictError, ValueError):
    """Refused to run dense elimination on a system past the configured size limit."""


class EmptyRange(GFDictError, ValueError):
    pass


class NoGoodFunction(GFDictError):
    """No candidate in a hash bank is injective on the given keys."""


class SingularSubMatrix(GFDictError):
    pass


class BuildFailed(GFDictError):
    def __init__(self, stage: str, attempts: int, detail: str = ""):
        self.stage = stage
        self.attempts = attempts
        msg = f"build failed at stage {stage!r} after {attempts} attempt(s)"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DuplicateKey(GFDictError, ValueError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"duplicate key with conflicting values: {key!r}")


class ValueOutOfRange(GFDictError, ValueError):
    pass


class EmptyTrial(GFDictError, ValueError):
    pass


class CorruptFile(GFDictError, ValueError):
    pass


class NotAMembershipFilter(GFDictError, ValueError):
    pass
