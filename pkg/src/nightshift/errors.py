"""Exception types shared across the package."""


class DataError(Exception):
    """Raised for malformed or inconsistent input data (bad files, missing
    poses, duplicate ids). Maps to CLI exit code 2."""


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite value appears during GAN training.
    Maps to CLI exit code 3."""
