"""Exception hierarchy shared by the solvers and experiment drivers."""


class DNLSError(Exception):
    """Base class for all errors raised by :mod:`deltadnls`."""


class ParameterError(DNLSError, ValueError):
    """Inputs lie outside the domain an operation is defined on."""


class NoNehariProjection(ParameterError):
    """The ray through ``x`` never meets the Nehari manifold.

    Raised when the quadratic part ``Q(x)`` of the Nehari functional is not
    positive, so ``s**2 Q(x) = gamma s**(2 sigma + 2) N(x)`` has no root s > 0.
    """

    def __init__(self, quadratic_form: float):
        self.quadratic_form = quadratic_form
        super().__init__(
            f"quadratic form Q(x) = {quadratic_form:.6g} <= 0; "
            "no positive fibering scale exists along this ray"
        )


class ConvergenceError(DNLSError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")


class SolverCollapse(DNLSError):
    """A Nehari iterate shrank below the proven lower bound on its norm."""


class NoBoundState(DNLSError):
    """The converged eigenvalue lies inside the continuous band [0, 4d]."""

    def __init__(self, eigenvalue: float, dim: int):
        self.eigenvalue = eigenvalue
        self.dim = dim
        super().__init__(
            f"eigenvalue {eigenvalue:.12g} lies inside the band [0, {4 * dim}]; "
            "no isolated bound state on this box"
        )


class IntegrationError(DNLSError):
    """Time stepping produced non-finite amplitudes."""

    def __init__(self, last_valid_time: float):
        self.last_valid_time = last_valid_time
        super().__init__(f"non-finite amplitudes after t = {last_valid_time:.6g}")


class WindowError(ParameterError):
    """A decay fit was requested on a window contaminated by wrap-around."""


class AdmissibilityError(ParameterError):
    """Scattering-experiment parameters violate a hypothesis of the decay bound."""
