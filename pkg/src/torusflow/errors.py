"""Exception hierarchy shared by all solver modules."""


class TorusflowError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(TorusflowError, ValueError):
    pass


class NonZeroMean(TorusflowError, ValueError):
    """A field flagged zero-mean carries a nonzero mean coefficient."""


class AliasingError(TorusflowError, ValueError):
    """Grid too coarse to recover the stored coefficients."""


class SymmetryError(TorusflowError, ValueError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"viscosity tensor symmetry violated at index {index}")


class NotElliptic(TorusflowError, ValueError):
    def __init__(self, lambda_min):
        self.lambda_min = lambda_min
        super().__init__(
            f"trace-free quadratic form is not positive definite (lambda_min={lambda_min:.6g})"
        )


class ZeroMode(TorusflowError, ValueError):
    pass


class SingularSymbol(TorusflowError, ArithmeticError):
    pass


class NotDivergenceFree(TorusflowError, ValueError):
    pass


class NoConvergence(TorusflowError, RuntimeError):
    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            message or f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )


class NewtonFailed(TorusflowError, RuntimeError):
    pass


class InadmissibleExponent(TorusflowError, ValueError):
    pass


class ConfigError(TorusflowError, ValueError):
    """Problem configuration could not be parsed or validated."""
