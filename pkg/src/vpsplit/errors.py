"""Exception hierarchy shared by every module of the package."""


class VpsError(Exception):
    """Base class for all errors raised by vpsplit."""


class DomainError(VpsError, ValueError):
    """A monomial was evaluated outside its admissible domain.

    Raised on a pole (zero base with a negative exponent) or a negative base
    raised to a non-integer exponent.
    """

    def __init__(self, message, axis=None, value=None):
        super().__init__(message)
        self.axis = axis
        self.value = value


class NotDivergenceFree(VpsError):
    """The divergence of a field has a non-vanishing coefficient."""

    def __init__(self, j, residual):
        self.j = j
        self.residual = residual
        super().__init__(f"divergence coefficient of monomial {j} is {residual!r}, not zero")


class NotDiagonal(VpsError):
    """A term of component i does not depend on x_i."""


class SingularStep(VpsError):
    """The exact power-law flow of an elementary field blows up within the step."""

    def __init__(self, t_star, j=None):
        self.t_star = t_star
        self.j = j
        where = f" (monomial {j})" if j is not None else ""
        super().__init__(f"step exceeds blow-up time t* = {t_star!r}{where}")


class DegenerateField(VpsError):
    """An elementary field has all-zero coefficients."""


class ConstructionError(VpsError):
    """A built-in problem failed its internal consistency check."""


class ProblemFormatError(VpsError, ValueError):
    """A problem file is malformed."""


class StepUnderflow(VpsError):
    """The adaptive integrator asked for a step below its minimum."""

    def __init__(self, t, h, trajectory=None):
        self.t = t
        self.h = h
        self.trajectory = trajectory
        super().__init__(f"step size {h!r} below h_min at t = {t!r}")


class MaxSteps(VpsError):
    """The adaptive integrator exhausted its step budget."""

    def __init__(self, t, trajectory=None):
        self.t = t
        self.trajectory = trajectory
        super().__init__(f"maximum number of steps reached at t = {t!r}")
