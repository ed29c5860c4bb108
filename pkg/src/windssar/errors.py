"""Exception and warning taxonomy shared across the toolkit."""


class WindSsarError(Exception):
    """Base class for all toolkit errors."""


class CaseFormatError(WindSsarError):
    """Raised by the case parser; carries a line/field locus."""

    def __init__(self, message, line=None, field=None):
        locus = []
        if line is not None:
            locus.append(f"line {line}")
        if field is not None:
            locus.append(f"field '{field}'")
        if locus:
            message = f"{message} ({', '.join(locus)})"
        super().__init__(message)
        self.line = line
        self.field = field


class LimitViolation(WindSsarError):
    """An injection left its box limits.

    ``unit_kind`` is "sg" or "wind", ``index`` the zero-based unit index in
    declaration order, ``bound`` either "lower" or "upper".
    """

    def __init__(self, unit_kind, index, bound, value, limit):
        super().__init__(
            f"{unit_kind} unit {index}: value {value:.6g} violates "
            f"{bound} limit {limit:.6g}"
        )
        self.unit_kind = unit_kind
        self.index = index
        self.bound = bound
        self.value = value
        self.limit = limit


class NonConvergence(WindSsarError):
    """Newton power flow hit the iteration cap."""

    def __init__(self, mismatch, iterations):
        super().__init__(
            f"power flow did not converge in {iterations} iterations "
            f"(last mismatch {mismatch:.3e})"
        )
        self.mismatch = mismatch
        self.iterations = iterations


class InfeasibleSteadyState(WindSsarError):
    """Back-solved device state violates physical sign conventions."""


class SingularAlgebraicBlock(WindSsarError):
    """Algebraic Jacobian block is numerically singular."""

    def __init__(self, rcond):
        super().__init__(f"algebraic block near-singular (rcond {rcond:.3e})")
        self.rcond = rcond


class NumericalFailure(WindSsarError):
    """An underlying numerical routine failed to converge."""


class DegenerateEigenvalue(WindSsarError):
    """Critical eigenvalue is not well separated; sensitivities undefined."""


class FlatDirection(WindSsarError):
    """Dependent boundary coordinate has (near) zero sensitivity."""


class NoCrossing(WindSsarError):
    """Ray search exhausted its range without leaving the stable set."""


class ZeroDirection(WindSsarError):
    """A direction vector with zero norm was supplied."""


class RegionHole(WindSsarError):
    """Dense diagnostic scan found an unstable pocket inside the bracket."""


class InfeasibleMoments(WindSsarError):
    """No positive beta shapes reproduce the requested mean/variance."""


class NotPositiveDefinite(WindSsarError):
    """Shape matrix is not positive definite."""


class NoTangency(WindSsarError):
    """Boundary representation unreachable from the uncertainty set center."""


class OutsideTrustRadiusWarning(UserWarning):
    """Quadratic boundary evaluated beyond its calibrated trust radius."""


class CopulaRepairWarning(UserWarning):
    """Converted copula correlation needed eigenvalue clipping."""
