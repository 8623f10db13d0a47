"""Exception types shared across the package.

The CLI maps these onto exit codes: ``InputError`` (and subclasses) exit
with 2, ``TrainingDiverged`` with 3.  Usage errors are handled by the
argument parser itself and exit with 1.
"""


class DualDepthError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DualDepthError, ValueError):
    """An input violated a documented precondition (shape, range, mask...)."""


class RankDeficientNormals(InputError):
    """Lighting estimation rejected a degenerate normal distribution."""


class ConfigError(InputError):
    """A config file contained unknown keys or malformed values."""


class TrainingDiverged(DualDepthError, RuntimeError):
    """A loss term became non-finite during training; names the term."""

    def __init__(self, network: str, term: str, step: int):
        self.network = network
        self.term = term
        self.step = step
        super().__init__(f"non-finite loss term '{term}' for network '{network}' at step {step}")
