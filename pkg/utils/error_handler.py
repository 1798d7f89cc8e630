from .logging_setup import setup_logging

logger = setup_logging('error_handler')


class NphError(Exception):
    """Base class for every error raised by this package."""


class InputError(NphError):
    """Malformed input data, invalid parameter or invalid configuration."""

    def __init__(self, message: str, field: str = None, line: int = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self):
        prefix = ''
        if self.line is not None:
            prefix += f"line {self.line}: "
        if self.field is not None:
            prefix += f"{self.field}: "
        return prefix + super().__str__()


class StatisticalError(NphError):
    """The data do not support the requested statistic."""


class NoEvents(StatisticalError):
    pass


class TooFewEvents(StatisticalError):
    pass


class ZeroVariance(StatisticalError):
    pass


class DegenerateWeight(StatisticalError):
    pass


class MonotoneLikelihood(StatisticalError):
    """Partial likelihood has no interior maximum."""


class NotConverged(StatisticalError):
    pass


class ConstantTransform(StatisticalError):
    """Transformed event times carry no spread (single distinct event time)."""


class InvalidCorrelation(StatisticalError):
    pass


class InfeasibleDesign(StatisticalError):
    pass


class Unreachable(StatisticalError):
    """Target power cannot be reached within the design."""


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_STATISTICAL = 3


class ErrorHandler:
    def __init__(self, settings: dict = None):
        self.settings = settings or {}

    def exit_code(self, error: Exception) -> int:
        """Map an exception onto a process exit code."""
        if isinstance(error, InputError):
            return EXIT_INPUT
        if isinstance(error, StatisticalError):
            return EXIT_STATISTICAL
        return EXIT_FAILURE

    def handle_error(self, error: Exception) -> int:
        """Log an error once and return the exit code for it."""
        code = self.exit_code(error)
        if code == EXIT_FAILURE:
            logger.exception(f"Unexpected error: {error}")
        else:
            logger.error(f"{type(error).__name__}: {error}")
        return code


if __name__ == "__main__":
    # Test run
    error_handler = ErrorHandler()
    try:
        raise InputError("time must be finite", field='time', line=3)
    except NphError as e:
        print(f"Exit code: {error_handler.handle_error(e)}")
