"""Exception hierarchy shared by all fracprop modules."""


class FracPropError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(FracPropError, ValueError):
    pass


class InvalidOrder(FracPropError, ValueError):
    """Mittag-Leffler parameters outside gamma in (0, 1], sigma in [1, 2)."""


class EvalFailure(FracPropError, ArithmeticError):
    """No evaluation regime produced a finite value."""


class MlEvalFailure(EvalFailure):
    pass


class OrderConstraintViolated(FracPropError, ValueError):
    def __init__(self, which: str, message: str):
        super().__init__(message)
        self.which = which


class EmptyAdmissibleRegion(FracPropError, ValueError):
    pass


class InvalidAngularSize(FracPropError, ValueError):
    pass


class NonPositiveInput(FracPropError, ValueError):
    pass


class InvalidMode(FracPropError, ValueError):
    pass


class SingularShift(FracPropError, ArithmeticError):
    pass


class UnsupportedBackend(FracPropError, TypeError):
    pass


class CacheMismatch(FracPropError, ValueError):
    pass


class NoConvergence(FracPropError, RuntimeError):
    pass


class BoundsViolation(FracPropError, ValueError):
    pass


class NotReached(FracPropError, RuntimeError):
    """A target accuracy was not reached inside the searched range."""

    def __init__(self, message: str, plateau: float = float("nan")):
        super().__init__(message)
        self.plateau = plateau
