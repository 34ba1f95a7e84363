"""Exception types shared across the package."""


class GBTSVMError(Exception):
    """Base class for all package errors."""


class ParseError(GBTSVMError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelError(GBTSVMError):
    pass


class EmptyDataset(GBTSVMError):
    pass


class InvalidFoldCount(GBTSVMError):
    pass


class SingleClassDataset(GBTSVMError):
    pass


class SingleClassFamily(GBTSVMError):
    pass


class ScoreMisalignment(GBTSVMError):
    pass


class NumericalFailure(GBTSVMError):
    pass


class DegenerateModel(GBTSVMError):
    pass


class LengthMismatch(GBTSVMError):
    pass


class EmptyInput(GBTSVMError):
    pass


class ShapeError(GBTSVMError):
    pass


class ModelFormatError(GBTSVMError):
    pass


class QPNotConverged(UserWarning):
    """Emitted when a dual solve stops at ``max_iter``; the best iterate is kept."""
