"""Exception hierarchy shared by every module of the package."""


class MBPError(Exception):
    """Base class for all errors raised by :mod:`mbp`."""


class SpecError(MBPError, ValueError):
    """A weight specification violates one of its invariants."""


class ParamOutOfRange(SpecError):
    pass


class ZeroNilpotentEntry(SpecError):
    pass


class RationalRatioViolation(SpecError):
    pass


class JacobiSumViolation(SpecError):
    pass


class LengthMismatch(SpecError):
    pass


class InvalidSpec(SpecError):
    """Aggregate of every violated condition found by ``validate_spec``."""

    def __init__(self, violations):
        self.violations = list(violations)
        names = ", ".join(sorted({type(v).__name__ for v in self.violations}))
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{names}: {detail}")

    @property
    def names(self):
        return [type(v).__name__ for v in self.violations]


class SizeMismatch(MBPError, ValueError):
    pass


class NotUnipotent(MBPError, ValueError):
    pass


class OutOfSupport(MBPError, ValueError):
    pass


class DegreeViolation(MBPError, ValueError):
    pass


class NonDiagonalCoefficient(MBPError, ValueError):
    pass


class PoleOnSupport(MBPError, ValueError):
    pass


class OddOrder(MBPError, ValueError):
    pass


class MomentTableTooSmall(MBPError, ValueError):
    pass


class NumericalError(MBPError, ArithmeticError):
    """Floating-point breakdown; the CLI maps these to exit code 3."""


class MomentOverflow(NumericalError):
    pass


class SingularGram(NumericalError):
    pass


class QuadratureNonConvergence(NumericalError):
    pass
