"""Exception hierarchy shared by every service."""


class AcausalError(Exception):
    """Base class for simulator errors"""


class DuplicateLabel(AcausalError, ValueError):
    """Two subsystems on the same side share a label"""


class UnknownLabel(AcausalError, KeyError):
    """A label was addressed that the operator does not carry"""

    def __str__(self):
        # KeyError quotes its argument; keep messages readable in logs
        return str(self.args[0]) if self.args else ""


class NonSquareSubsystem(AcausalError, ValueError):
    """A subsystem is not present with equal dimension on both sides"""


class ShapeMismatch(AcausalError, ValueError):
    """Array shape disagrees with the declared dimensions"""


class DimensionMismatch(AcausalError, ValueError):
    """Operands have incompatible dimensions"""


class NotPSD(AcausalError, ValueError):
    """Operator has an eigenvalue below the positivity tolerance"""


class NotCPTP(AcausalError, ValueError):
    """Map is not completely positive and trace preserving"""


class NotPure(AcausalError, ValueError):
    """Operation requires a process stored as a vector"""


class UndefinedEvolution(AcausalError, ArithmeticError):
    """Post-selected evolution has (numerically) zero success probability"""


class OutOfRange(AcausalError, ValueError):
    """Integer argument outside its admissible range"""


class ResourceLimit(AcausalError, MemoryError):
    """Construction would exceed the configured amplitude budget"""


class ParseError(AcausalError, ValueError):
    """Input file could not be parsed into a domain object"""
