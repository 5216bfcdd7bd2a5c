"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to
process status without a lookup table: 1 for usage/config problems,
2 for bad or insufficient data, 3 for estimation failures.
"""


class ArimaFraudError(Exception):
    exit_code = 1


class ConfigError(ArimaFraudError, ValueError):
    exit_code = 1


class DataError(ArimaFraudError, ValueError):
    exit_code = 2


class NoDataError(DataError):
    pass


class ShapeError(DataError):
    pass


class DegenerateSeriesError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateResidualsError(DataError):
    pass


class EstimationError(ArimaFraudError, RuntimeError):
    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InvalidModelError(ArimaFraudError, ValueError):
    exit_code = 3
