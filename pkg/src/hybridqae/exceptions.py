"""Exception hierarchy shared by every stage of the pipeline."""


class HybridQaeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(HybridQaeError, ValueError):
    pass


class DegenerateFeatureError(InvalidArgumentError):
    pass


class DegenerateInputError(InvalidArgumentError):
    pass


class DegenerateLabelsError(InvalidArgumentError):
    pass


class PostSelectionError(HybridQaeError, ArithmeticError):
    """The requested measurement outcome has (numerically) zero probability."""


class DegenerateDenominatorError(HybridQaeError, ArithmeticError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"original value too close to zero at {index}")


class DataFormatError(HybridQaeError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(DataFormatError):
    pass


class ConfigError(HybridQaeError, ValueError):
    pass


class StageError(HybridQaeError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class VerificationError(HybridQaeError):
    """Recomputed metrics or artifact hashes disagree with a saved report."""
