class ModelError(Exception):
    """Base class for QoE model and app pipeline errors."""


class SingularSystemError(ModelError):
    """Normal equations are singular (only possible with lambda = 0)."""


class SchemaMismatchError(ModelError):
    """Feature vector does not match the model's schema."""


class NoDataError(ModelError):
    """No metric records available for the requested UE or window."""


class InsufficientWindowError(ModelError):
    """Anomaly window shorter than three samples."""
