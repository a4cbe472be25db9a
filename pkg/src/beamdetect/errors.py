"""Exception types shared across the package."""


class BeamDetectError(Exception):
    pass


class SingularMatrix(BeamDetectError):
    pass


class DimensionMismatch(BeamDetectError, ValueError):
    pass


class InvalidGeometry(BeamDetectError, ValueError):
    pass


class InvalidConfig(BeamDetectError, ValueError):
    pass


class UnsupportedCase(BeamDetectError):
    pass


class FormatError(BeamDetectError):
    """Malformed dataset, log, or checkpoint file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
