"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration or input specification (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical run failed in a detectable way (CLI exit code 3)."""


class NotStationaryError(ValueError):
    """A stability classification was requested at a non-stationary point.

    Carries the offending drift norm so callers can report how far from
    stationarity the query point was.
    """

    def __init__(self, drift_norm: float):
        self.drift_norm = float(drift_norm)
        super().__init__(
            f"classification requires a stationary point; |drift| = {drift_norm:.3e}"
        )


class UnsupportedCaseError(ValueError):
    """The requested analysis is only implemented for a specific ground truth."""
