"""Exception types shared across the package."""


class PrecisionError(ArithmeticError):
    """A computation could not reach its accuracy target."""

    def __init__(self, message: str, C: int | None = None):
        super().__init__(message)
        self.C = C


class NoRootError(ValueError):
    """The saddle-point equation has no positive solution."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
