"""Exception hierarchy shared across the package."""


class SGMTLError(Exception):
    """Base class for all package errors."""


class ValidationError(SGMTLError, ValueError):
    pass


class DimensionMismatch(ValidationError):
    pass


class BadLabels(ValidationError):
    pass


class EmptyProblem(ValidationError):
    pass


class MixedLossKinds(ValidationError):
    pass


class InfeasibleSpec(ValidationError):
    pass


class TooFewExamples(ValidationError):
    pass


class DegenerateTargets(ValidationError):
    pass


class NoPositives(ValidationError):
    pass


class PreconditionViolated(ValidationError):
    pass


class UnknownMethod(ValidationError):
    pass


class NonFinite(SGMTLError, ArithmeticError):
    pass


class NoConvergence(SGMTLError, RuntimeError):
    pass


class DegenerateClustering(SGMTLError, RuntimeError):
    pass
