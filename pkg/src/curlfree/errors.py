"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` and expression errors
give 2, ``PreconditionError`` gives 3, everything else is a plain failure.
"""


class CurlfreeError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(CurlfreeError, ValueError):
    pass


class DomainError(CurlfreeError, ValueError):
    """A point, stencil or support leaves the region where it must lie."""


class EvaluationError(CurlfreeError, ArithmeticError):
    """A field produced a non-finite value.

    ``point`` holds the first offending evaluation point.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ExprError(CurlfreeError, ValueError):
    """Expression source could not be turned into an AST.

    ``offset`` is the byte offset into the source where the problem starts.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.reason = message
        self.offset = offset


class PreconditionError(CurlfreeError):
    """A mathematical precondition of an operation does not hold.

    Raised instead of returning a meaningless answer, e.g. when the potential
    operator is asked to act on a field with a large curl.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(CurlfreeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(CurlfreeError, ValueError):
    pass
