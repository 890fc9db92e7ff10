"""Exception hierarchy shared by all modules."""


class KPZLabError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(KPZLabError, ValueError):
    pass


class SingularMatrix(KPZLabError, ArithmeticError):
    """A pivot fell below the relative threshold during elimination."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NonFiniteValue(KPZLabError, ArithmeticError):
    pass


class NonFiniteState(KPZLabError, ArithmeticError):
    """An Euler-Maruyama update produced inf/nan (blow-up)."""

    def __init__(self, message, step=None, path_id=None):
        super().__init__(message)
        self.step = step
        self.path_id = path_id


class UnstableParameters(KPZLabError, ValueError):
    pass


class NonPositiveW(KPZLabError, ArithmeticError):
    pass


class ZeroDiffusion(KPZLabError, ZeroDivisionError):
    pass


class QuadratureFailure(KPZLabError, ArithmeticError):
    pass


class ConfigError(KPZLabError, ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, message, field=None, line=None, column=None):
        where = ""
        if field is not None:
            where = f"{field}: "
        if line is not None:
            where = f"{where}(line {line}, column {column}) "
        super().__init__(f"{where}{message}")
        self.field = field
        self.line = line
        self.column = column
        self.reason = message
