"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid problem configuration; ``errors`` lists one diagnostic per field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(RuntimeError):
    """A numerical routine failed to deliver a result at the requested accuracy."""


class RootFindingError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class AbsoluteContinuityError(ValueError):
    """Two priors are not equivalent, so the density dQ/dP is undefined."""
