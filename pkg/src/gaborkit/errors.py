"""Exception types shared across the toolkit."""


class GaborKitError(Exception):
    pass


class InvalidArgument(GaborKitError, ValueError):
    pass


class UnsupportedBody(GaborKitError):
    """The body family lacks the regularity an operation needs."""


class UnsupportedDimension(GaborKitError):
    pass


class UndefinedResult(GaborKitError):
    pass


class CalibrationFailed(GaborKitError):
    pass


class AccuracyNotReached(GaborKitError):
    """Quadrature ran out of budget before meeting the requested tolerance.

    The best available estimate and its error bound are attached so callers
    can decide whether the value is still usable.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class TripleNotFound(GaborKitError):
    """No triple meeting the separation/spread/collinearity conditions.

    ``stats`` records per-stage occupancy so an empty search can be
    diagnosed (how many time shifts met the base cube, fiber sizes, ...).
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats or {}
