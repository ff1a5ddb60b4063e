"""Exception types shared across the package."""


class EaslError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EaslError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(EaslError, ValueError):
    """A call violated an operation precondition."""


class InputError(EaslError, ValueError):
    """Input data is outside the accepted domain (bad token id, range, ...)."""


class ParseError(EaslError, ValueError):
    """A file could not be parsed.  Carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class VersionError(EaslError, ValueError):
    """A file declares an unsupported format version."""


class ConfigMismatchError(EaslError, ValueError):
    """A checkpoint's config hash does not match the requested model config."""


class TrainingDivergedError(EaslError, RuntimeError):
    """Training produced a non-finite loss.  Carries run diagnostics."""

    def __init__(self, phase: int, epoch: int, batch: int, term: str, value: float):
        super().__init__(
            f"non-finite loss in phase {phase}, epoch {epoch}, batch {batch}: "
            f"{term} = {value!r}"
        )
        self.phase = phase
        self.epoch = epoch
        self.batch = batch
        self.term = term
        self.value = value
