"""Exception hierarchy shared across the package."""


class FuzzyPoolError(Exception):
    """Base class for all package errors."""


class DimensionError(FuzzyPoolError, ValueError):
    """Pooling window does not fit the (padded) input."""


class ShapeError(FuzzyPoolError, ValueError):
    """Array shapes or lengths disagree."""


class ParameterError(FuzzyPoolError, ValueError):
    """Invalid numeric parameter (membership bank, noise variance, ...)."""


class SelectionError(FuzzyPoolError, ArithmeticError):
    """Fuzzy-set selection or defuzzification hit an all-zero membership."""


class FormatError(FuzzyPoolError, ValueError):
    """Malformed binary file (IDX, CIFAR-10, netpbm, checkpoint)."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        parts = [message]
        if offset is not None:
            parts.append(f"at byte offset {offset}")
        if path is not None:
            parts.append(f"in {path}")
        super().__init__(" ".join(parts))


class ConfigError(FuzzyPoolError, ValueError):
    """Invalid network or experiment configuration."""


class CheckpointError(FormatError):
    """Checkpoint header does not match what the caller expects."""


class InputError(FuzzyPoolError, ValueError):
    """Empty or out-of-range user input (labels, corpora, operator lists)."""
