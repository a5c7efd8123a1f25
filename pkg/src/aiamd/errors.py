"""Exception types shared across the package."""


class AiamdError(Exception):
    """Base class for errors raised by this package."""


class CoincidentParticlesError(AiamdError):
    """Two interacting particles sit at zero separation; forces are undefined."""


class ConstraintConvergenceError(AiamdError):
    """The iterative constraint solver hit its iteration limit."""

    def __init__(self, message, worst_residual):
        super().__init__(f"{message} (worst residual {worst_residual:.3e})")
        self.worst_residual = worst_residual


class ConstraintViolationError(AiamdError):
    """A state handed to a constrained operation is off the constraint manifold."""


class SingularConstraintJacobianError(AiamdError):
    """The constraint Jacobian is numerically rank deficient."""


class UnstableStepSizeError(AiamdError):
    """No member of the integrator family is stable for the requested step size."""

    def __init__(self, h_bar, dt=None, dt_max=None):
        msg = (f"dimensionless step h_bar = {h_bar:.6g} >= 4: "
               "no two-stage scheme is stable for this step size")
        if dt is not None and dt_max is not None:
            msg += f"; step size is {dt:.6g}, it must be below {dt_max:.6g}"
        super().__init__(msg)
        self.h_bar = h_bar
        self.dt = dt
        self.dt_max = dt_max


class NoBondsError(AiamdError):
    """Period scan requires at least one unconstrained harmonic bond."""


class ZeroVarianceError(AiamdError):
    """Autocorrelation of a constant series is undefined."""


class NumericalDivergenceError(AiamdError):
    """A run produced a non-finite energy."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(AiamdError):
    """A run configuration failed to parse or validate."""
