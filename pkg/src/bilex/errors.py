"""Exception types shared across the package."""


class EmbeddingFormatError(ValueError):
    """Raised for malformed embedding files (bad header, inconsistent dim)."""


class TrainingDiverged(RuntimeError):
    """Raised when a loss or parameter goes non-finite during training.

    Carries the last known-good model so callers can checkpoint it.
    """

    def __init__(self, message, best_state=None, history=None):
        super().__init__(message)
        self.best_state = best_state
        self.history = history if history is not None else []


class EmptyDictionaryError(RuntimeError):
    """Raised when a gold dictionary has no usable entries."""
