"""Exception hierarchy shared across the package."""


class QCNNError(Exception):
    """Base class for all package errors."""


class ParseError(QCNNError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelMissingError(ParseError):
    pass


class DegenerateComplexError(QCNNError, ValueError):
    """Complex lacks protein or ligand atoms."""


class DegenerateSampleError(QCNNError, ValueError):
    """Pooled grid has zero protein or zero ligand occupancy."""


class ConfigurationError(QCNNError, ValueError):
    pass


class DomainError(QCNNError, ValueError):
    pass


class RankDeficiencyError(QCNNError, ValueError):
    pass


class WiringError(QCNNError, ValueError):
    pass


class DuplicateQubitError(WiringError):
    pass


class QubitRangeError(WiringError):
    pass


class ArityMismatchError(WiringError):
    pass


class FunnelError(WiringError):
    """Final layer does not act on the measured qubit."""


class MeasuredQubitError(WiringError):
    pass


class EncodingLengthError(WiringError):
    pass


class ShapeError(QCNNError, ValueError):
    pass


class NormalizationError(QCNNError, ValueError):
    pass


class MemoryGateError(QCNNError, RuntimeError):
    """Density-matrix evaluation refused without an explicit opt-in."""


class UndefinedCorrelationError(QCNNError, ValueError):
    pass


class FormatError(QCNNError, ValueError):
    """Binary or text container does not match the expected layout."""
