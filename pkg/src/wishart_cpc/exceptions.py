"""Exception types raised across the package."""


class WishartCPCError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimensionError(WishartCPCError, ValueError):
    pass


class DimensionMismatchError(WishartCPCError, ValueError):
    pass


class InvalidParameterError(WishartCPCError, ValueError):
    pass


class NotPositiveDefiniteError(WishartCPCError, ValueError):
    pass


class PreconditionError(WishartCPCError, ValueError):
    pass


class UnsupportedArityError(WishartCPCError, ValueError):
    pass


class InsufficientDataError(WishartCPCError, ValueError):
    pass


class DegenerateVarianceError(WishartCPCError, ArithmeticError):
    """The plug-in variance of the test statistic is not strictly positive."""
