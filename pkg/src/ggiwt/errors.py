"""Exception types raised by the tracking toolkit."""


class TrackingError(ValueError):
    """Base class for all domain errors."""


class DofTooSmall(TrackingError):
    pass


class SingularMatrix(TrackingError):
    pass


class DegeneratePosition(TrackingError):
    pass


class NoPartitions(TrackingError):
    pass


class NonSPDInput(TrackingError):
    pass


class NonSPDResult(TrackingError):
    pass


class LengthMismatch(TrackingError):
    pass


class UnknownScenario(TrackingError):
    pass


class ConfigError(TrackingError):
    """Raised with the full list of violated invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
