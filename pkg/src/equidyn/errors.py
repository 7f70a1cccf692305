"""Exception hierarchy shared by every equidyn module."""


class EquidynError(Exception):
    """Base class for all equidyn errors."""


class ConfigError(EquidynError):
    """Malformed input: wrong scenario, missing parameter slots, bad file."""


class DomainViolation(EquidynError):
    """A configuration left the open domain where a chart, frame or field is defined."""


class DegeneracyError(DomainViolation):
    """Takagi factorization requested at (near) coincident singular values."""


class ExprSyntaxError(ConfigError):
    """Expression text could not be parsed. ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class ExprEvalError(DomainViolation):
    """Expression evaluation hit a singularity (division by zero, sqrt of a negative)."""

    def __init__(self, message: str, span: tuple[int, int] | None = None):
        self.span = span
        where = "" if span is None else f" (source bytes {span[0]}..{span[1]})"
        super().__init__(message + where)
