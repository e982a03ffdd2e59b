"""Exception types shared across the package."""


class DegenerateMatrixError(ValueError):
    """All singular values fall below the rank threshold (effectively zero matrix)."""


class SingularMatrixError(ValueError):
    """A pivot in the LU factorization fell below the singularity threshold."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to reach its tolerance within its iteration cap."""


class CertificationError(RuntimeError):
    """Instance assembly could not certify a unique optimum (singular basis block)."""


class InstanceParseError(ValueError):
    """An instance file is malformed; carries the offending line/offset when known."""

    def __init__(self, message, line=None, offset=None):
        if line is not None:
            message = f"{message} (line {line}, offset {offset})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class InstanceValidationError(ValueError):
    """A loaded instance violates a structural invariant."""


class NumericalDivergenceError(RuntimeError):
    """The solver iterates became non-finite or exceeded the divergence guard."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


class UnsolvedRunError(ValueError):
    """Stage decomposition was requested for a trace that never reached tolerance."""


class InfeasibleError(RuntimeError):
    """Exhaustive basis enumeration found no feasible basic solution."""
