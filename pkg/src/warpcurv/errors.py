"""Exception types shared across the package."""


class WarpcurvError(Exception):
    """Base class for all package errors."""


class DomainError(WarpcurvError, ValueError):
    pass


class InvalidParams(WarpcurvError, ValueError):
    pass


class InvalidL(InvalidParams):
    pass


class InvalidP(InvalidParams):
    pass


class LambdaTooSmall(InvalidParams):
    pass


class SlopeViolation(WarpcurvError, ValueError):
    pass


class QuadratureFailure(WarpcurvError, ArithmeticError):
    pass


class DegenerateInput(WarpcurvError, ValueError):
    pass


class DegeneratePair(DegenerateInput):
    pass


class DimensionMismatch(WarpcurvError, ValueError):
    pass


class AxisSingularity(WarpcurvError, ArithmeticError):
    pass


class NotClosed(WarpcurvError, ValueError):
    pass


class CaseMismatch(WarpcurvError, ValueError):
    pass


class UnsupportedModel(WarpcurvError, TypeError):
    pass


class StencilOutOfDomain(WarpcurvError, ValueError):
    pass


class InterfaceMismatch(WarpcurvError, ValueError):
    pass


class SearchExhausted(WarpcurvError, RuntimeError):
    pass


class ConfigError(WarpcurvError, ValueError):
    pass
