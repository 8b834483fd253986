"""Exception types shared across the package."""


class ElliptFlowError(Exception):
    """Base class for all package-specific failures."""


class DegenerateLattice(ElliptFlowError, ValueError):
    """Period pair does not span a valid oriented lattice."""


class SingularPoint(ElliptFlowError, ValueError):
    """Evaluation point is too close to a lattice translate of a pole/zero."""


class Overflow(ElliptFlowError, ArithmeticError):
    """Result magnitude exceeds the double-precision range; use the log form."""


class InvalidSpec(ElliptFlowError, ValueError):
    """Problem description violates a construction invariant."""


class InsideObstacle(ElliptFlowError, ValueError):
    """Field evaluation requested inside an obstacle."""


class SolveFailure(ElliptFlowError, RuntimeError):
    """Linear solve did not reach the required residual."""


class InsufficientData(ElliptFlowError, ValueError):
    """Not enough usable records for a fit."""


class StagnationStall(ElliptFlowError, RuntimeError):
    """Velocity magnitude too small to advect a streamline seed."""


class IoFailure(ElliptFlowError, OSError):
    """Reading or writing an artifact file failed."""


class FormatError(ElliptFlowError, ValueError):
    """Malformed artifact file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
