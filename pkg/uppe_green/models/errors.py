class UppeGreenError(ValueError):
    """Base class for every error raised by the library."""


class GridError(UppeGreenError):
    pass


class ContractError(UppeGreenError):
    """A field was passed in a representation the operation does not accept."""


class SizeGuardError(UppeGreenError):
    pass


class StepError(UppeGreenError):
    pass


class ConfigError(UppeGreenError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
