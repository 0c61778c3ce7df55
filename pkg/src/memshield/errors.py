"""Exception hierarchy for the memshield package."""


class MemshieldError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(MemshieldError):
    """Input file does not match the expected column schema."""


class CategoryParseError(MemshieldError):
    """A category string could not be mapped to a known label."""

    def __init__(self, raw: str, reason: str):
        self.raw = raw
        super().__init__(f"cannot parse category {raw!r}: {reason}")


class RowParseError(MemshieldError):
    """A data cell could not be parsed; carries the offending row index."""

    def __init__(self, row: int, column: str, reason: str):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {reason}")


class CountValidationError(MemshieldError):
    """Loaded per-class/per-subtype counts do not match the published distribution."""


class StratificationError(MemshieldError):
    """A stratum is too small for the requested split."""


class UnknownSubtypeError(MemshieldError):
    """Requested malware subtype is not present in the dataset."""

    def __init__(self, name: str, available: tuple[str, ...]):
        self.name = name
        self.available = available
        super().__init__(
            f"unknown subtype {name!r}; available: {', '.join(available)}"
        )


class DimensionMismatchError(MemshieldError):
    """Feature vector length does not match what the model expects."""


class NotFittedError(MemshieldError):
    """Operation requires a fitted model property that is absent."""


class DecodeError(MemshieldError):
    """Serialized model bytes are malformed or of an unsupported version."""


class ShapleyCapError(MemshieldError):
    """Exact Shapley enumeration refused: too many features.

    Exact attribution enumerates 2^k coalitions; beyond the cap this is
    intractable and a sampling estimator (out of scope here) would be needed.
    """
