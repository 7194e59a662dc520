"""Exception hierarchy shared by every module."""


class OneShotError(Exception):
    """Base class for all library errors."""


class InvalidState(OneShotError, ValueError):
    pass


class DimensionMismatch(OneShotError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class NumericalFailure(OneShotError, ArithmeticError):
    pass


class SolverFailure(NumericalFailure):
    """An SDP solve ended without an optimal certificate."""


class NonConvergence(NumericalFailure):
    pass


class InvalidEps(OneShotError, ValueError):
    pass


class DominationViolated(OneShotError, ValueError):
    """A target state is not dominated by ``2**lam * sigma``."""


class DimensionBlowup(OneShotError, ValueError):
    """The requested exact simulation exceeds the dimension cap."""


class ParseError(OneShotError, ValueError):
    pass


class InvalidConfig(OneShotError, ValueError):
    pass
