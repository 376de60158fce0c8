"""
Exception hierarchy for the vortex laboratory
"""


class VortexLabError(Exception):
    """Base error; carries optional structured details for reports"""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})


# Configuration and preconditions

class ConfigInvalid(VortexLabError):
    """Experiment configuration failed validation"""


class MeanNotZero(VortexLabError):
    """Periodic Poisson right-hand side is not solvable"""


class DiagonalPoint(VortexLabError):
    """Green function evaluated on the diagonal"""


class VortexOnVortex(VortexLabError):
    """Two listed vortex positions coincide"""


class PlanarDomainTooSmall(VortexLabError):
    """Rescaled cutoff support leaves the planar box"""


class ClusterNotIsolated(VortexLabError):
    """Pohozaev ball meets another cluster"""


# Solve failures

class SolveFailed(VortexLabError):
    """A solver did not produce an admissible result"""


class NotConverged(SolveFailed):
    """Iteration budget exhausted; `report` holds the last state"""

    def __init__(self, message, report=None, details=None):
        super().__init__(message, details)
        self.report = report


class NonExistenceSuspected(NotConverged):
    """Iterates keep diving, consistent with eps above the existence range"""


class NonMonotoneStep(SolveFailed):
    """Monotone iterate increased beyond the allowed slack"""


class SubsolutionFailed(SolveFailed):
    """Subsolution inequality violated on the grid"""


class LinearSolveStalled(SolveFailed):
    """Krylov inner solve failed to reach its tolerance"""


class NewtonDiverged(SolveFailed):
    """Line search exhausted or Newton budget spent"""


class NonTopologicalBranch(SolveFailed):
    """Converged, but to a solution that fails the topological classification"""


class IterationStalled(SolveFailed):
    """Eigen iteration did not reach the residual bound"""


class StepFailure(SolveFailed):
    """ODE integrator could not meet its tolerance"""


class NoBracket(SolveFailed):
    """Bisection endpoints share a terminal tag"""


class ContractionFailed(SolveFailed):
    """Fixed-point increments stopped decreasing"""


class CheckFailed(VortexLabError):
    """A requested diagnostic missed its tolerance"""
