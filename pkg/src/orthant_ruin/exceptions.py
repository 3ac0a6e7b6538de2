"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (the class name) and an
optional ``details`` mapping, which the CLI serializes to JSON on stderr.
"""


class OrthantRuinError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    @property
    def code(self):
        return type(self).__name__

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


class DimensionMismatch(OrthantRuinError, ValueError):
    pass


class NonFiniteInput(OrthantRuinError, ValueError):
    pass


# reflection-matrix validation
class InvalidMatrix(OrthantRuinError, ValueError):
    pass


class OffDiagonalNegative(InvalidMatrix):
    pass


class DiagonalNonzero(InvalidMatrix):
    pass


class SpectralRadiusNotLessThanOne(InvalidMatrix):
    pass


class InverseInconsistent(InvalidMatrix):
    pass


class PowerIterationFailed(OrthantRuinError, ArithmeticError):
    """Power iteration hit its cap; ``details['estimate']`` holds the last bracket."""


# LCP solvers
class IterationCapExceeded(OrthantRuinError, ArithmeticError):
    pass


class NoFeasibleActiveSet(OrthantRuinError, ArithmeticError):
    pass


class MultipleSolutions(OrthantRuinError, ArithmeticError):
    pass


# pathwise self-checks; these signal a solver bug, never bad input
class ConsistencyViolation(OrthantRuinError, AssertionError):
    pass


class LemmaViolation(OrthantRuinError, AssertionError):
    pass


# models / config
class InvalidConfig(OrthantRuinError, ValueError):
    pass


class NetProfitViolated(OrthantRuinError, ValueError):
    pass


class RejectionStall(OrthantRuinError, RuntimeError):
    pass
