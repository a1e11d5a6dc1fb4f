"""Exception hierarchy shared by all ksdisc modules."""


class KsError(Exception):
    """Base class for all ksdisc errors."""


class InvalidOperatorError(KsError):
    """Difference/mean operator order outside the supported catalogue."""


class GridTooCoarseError(KsError):
    """Grid has fewer points than the stencil width plus one."""


class UnsupportedModelError(KsError):
    """Operation not defined for this model family."""


class SymmetryViolationError(KsError):
    """Field fails a required symmetry; carries the largest violation."""

    def __init__(self, message, max_asymmetry=None):
        super().__init__(message)
        self.max_asymmetry = max_asymmetry


class BlowUpError(KsError):
    """Trajectory left the finite/bounded regime during time stepping."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class NewtonDivergenceError(KsError):
    """Newton iteration failed to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NearBifurcationError(KsError):
    """Singular Jacobian encountered in a Newton solve."""


class EigenFailureError(KsError):
    """QR iteration failed to converge within the sweep budget."""


class ContinuationStallError(KsError):
    """Arclength step collapsed below the stall threshold.

    Partial results computed before the stall are attached so callers can
    keep what was traced.
    """

    def __init__(self, message, branch=None, bifurcations=None):
        super().__init__(message)
        self.branch = branch
        self.bifurcations = bifurcations


class SearchInvalidError(KsError):
    """Stability search started from an unstable base state."""


class OrbitNotFoundError(KsError):
    """Shooting iteration did not converge to a periodic orbit."""


class DegenerateOrbitError(KsError):
    """Candidate orbit collapsed to an equilibrium or to zero period."""


class DegenerateHopfError(KsError):
    """Hopf point with (near) zero frequency cannot seed an orbit."""


class InsufficientDataError(KsError):
    """Not enough post-transient samples for a time average."""


class UsageError(KsError):
    """Invalid run configuration or command-line arguments."""
