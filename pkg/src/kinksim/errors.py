"""Exception hierarchy for the kinksim package.

Every error raised by the library derives from :class:`KinksimError` so that
callers (and the CLI exit-code mapping) can distinguish configuration
problems, numerical failures and statistics shortfalls.
"""


class KinksimError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KinksimError):
    """Invalid physical or run configuration (CLI exit code 3)."""


class CoulombSingularityError(KinksimError):
    """Two ions closer than the guard distance; dynamics are meaningless."""


class NonFiniteError(KinksimError):
    """NaN/Inf encountered in an energy, force or state."""


class NoConvergenceError(KinksimError):
    """Iterative solver exhausted its iteration budget."""


class SaddlePointError(KinksimError):
    """Relaxation terminated on a stationary point that is not a minimum."""


class UnsupportedRegimeError(KinksimError):
    """Requested structure does not exist at these trap parameters."""


class UnstableEquilibriumError(KinksimError):
    """Mode analysis found a negative Hessian eigenvalue."""


class NoKinkModesError(KinksimError):
    """No mode passed both the gap and the localization filter (diagnostic)."""


class NumericalBlowupError(KinksimError):
    """Integrator produced out-of-bounds coordinates or velocities."""


class NotSettledError(KinksimError):
    """Steady-state average requested before the transient has decayed."""


class EmptyEnsembleError(KinksimError):
    """Statistical reduction invoked on an empty event collection."""


class TooFewEscapesError(KinksimError):
    """Not enough escape events for the requested fit (CLI exit code 4)."""


class TooFewPointsError(KinksimError):
    """Not enough sweep points for the requested regression."""


class FitDivergedError(KinksimError):
    """Nonlinear least squares failed from every starting point."""


class PoorFitError(KinksimError):
    """Fit succeeded but the quality gate (R^2) failed."""


class InsufficientDataError(KinksimError):
    """Trajectory too short for the requested estimator."""


class PathCollapseError(KinksimError):
    """Elastic-band images merged; the path is degenerate."""
