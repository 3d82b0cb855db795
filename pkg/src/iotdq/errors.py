"""Exception types shared across the package."""


class DQError(Exception):
    """Base class for all errors raised by this package."""


class SerializationError(DQError):
    """Entity cannot be serialized (e.g. non-finite numeric field)."""


class SchemaError(DQError):
    """Serialized document does not match the expected entity schema."""


class ValidationError(DQError):
    """Entity field values violate an invariant."""


class DomainError(DQError):
    """Numeric argument outside the domain of a metric formula."""


class OrderingError(DQError):
    """Timestamps arrived out of order for a stream that requires ordering."""


class InsufficientDataError(DQError):
    """Not enough data to compute a result (the caller should omit it)."""


class DuplicateRecordError(DQError):
    """A record with the same (entity id, observedAt) already exists."""


class TrainingError(DQError):
    """A model could not be trained on the given data."""


class FitError(DQError):
    """Time-series model fitting failed (e.g. series too short)."""


class InputError(DQError):
    """Input data malformed for the requested operation."""
