"""Exception hierarchy shared by all benchmark modules."""


class BenchError(Exception):
    """Base class for every error raised by tsxbench."""


class InvalidShape(BenchError, ValueError):
    pass


class InvalidParameter(BenchError, ValueError):
    pass


class NonStationaryParameter(InvalidParameter):
    pass


class MaskInfeasible(BenchError, ValueError):
    pass


class DegenerateSeparation(InvalidParameter):
    pass


class FormatError(BenchError, ValueError):
    pass


class DegenerateLabels(BenchError, ValueError):
    pass


class EmptySelection(BenchError, LookupError):
    pass


class IllPosedSurrogate(InvalidParameter):
    pass


class MissingCapability(BenchError, RuntimeError):
    pass


class IoError(BenchError, OSError):
    pass


class DegenerateMetric(BenchError, ArithmeticError):
    """A metric is undefined for this input; ``reason`` is the record code."""

    reason = "Degenerate"


class DegenerateCorrelation(DegenerateMetric):
    reason = "DegenerateCorrelation"


class DegenerateAttribution(DegenerateMetric):
    reason = "DegenerateAttribution"


class ExplainerFailure(BenchError, RuntimeError):
    pass
