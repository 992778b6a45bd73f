"""Exception hierarchy shared by every module."""


class BopeError(ValueError):
    """Base class for all validation and estimation errors."""


class LengthMismatch(BopeError):
    pass


class NonFiniteValue(BopeError):
    pass


class MixedActionVariant(BopeError):
    pass


class VariantMismatch(BopeError):
    pass


class DimensionMismatch(BopeError):
    pass


class MissingK(BopeError):
    pass


class SingleClass(BopeError):
    pass


class FoldTooSmall(BopeError):
    pass


class OutOfRange(BopeError):
    pass


class NonConvergence(BopeError):
    """Raised by the logistic solver; ``grad_norm`` holds the final gradient inf-norm."""

    def __init__(self, message, grad_norm):
        super().__init__(message)
        self.grad_norm = grad_norm


class ZeroScale(BopeError):
    pass


class AllZeroWeights(BopeError):
    """Self-normalized estimate requested but every weight is zero (no overlap)."""


class EmptyCandidates(BopeError):
    pass


class NonPositiveTruth(BopeError):
    pass


class ZeroDenominator(BopeError):
    pass


class EmptyInput(BopeError):
    pass


class TooFewRows(BopeError):
    pass


class ParseError(BopeError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class ConfigError(BopeError):
    pass
