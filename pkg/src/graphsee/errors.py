"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (graph files, labels, samples)."""


class NumericalError(RuntimeError):
    """A solver failed: singular system, divergence, non-convergence."""
