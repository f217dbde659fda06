"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent simulation configuration."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient.

    ``networks`` holds the online networks at the moment of failure (when the
    training loop raised it) so callers can checkpoint them for diagnosis.
    """

    def __init__(self, message, networks=None):
        super().__init__(message)
        self.networks = networks
