"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Matrix or vector has the wrong shape."""


class InvalidTransitionError(ValueError):
    """Input and output Fock states carry different photon numbers."""


class DegeneratePostSelectionError(ValueError):
    """The post-selected event has (numerically) zero probability."""


class DegenerateDistributionError(ValueError):
    """No detectable outcome survives the noise model."""


class UnsupportedInputError(ValueError):
    """Input state is outside what the noise model handles."""


class OptimizationFault(RuntimeError):
    """A loss evaluation returned a non-finite value."""

    def __init__(self, message, episode=None):
        super().__init__(message if episode is None else f"episode {episode}: {message}")
        self.episode = episode


class ConfigError(ValueError):
    """Run configuration could not be parsed or validated."""
