"""Exception hierarchy shared by all modules.

Every error raised on purpose derives from :class:`LiouvilleError`, so the
CLI can map domain failures to exit code 1 and everything else to 2.
"""


class LiouvilleError(Exception):
    """Base class for domain errors."""

    code = "liouville_error"


class DomainError(LiouvilleError, ValueError):
    code = "domain_error"


class DegenerateConfig(LiouvilleError, ValueError):
    """Points collide, sit at the origin, or touch the unit circle."""

    code = "degenerate_config"


class StepTooLarge(LiouvilleError, ValueError):
    code = "step_too_large"


class CollidingAngles(LiouvilleError, ValueError):
    code = "colliding_angles"


class SizeMismatch(LiouvilleError, ValueError):
    code = "size_mismatch"


class InternalInconsistency(LiouvilleError, RuntimeError):
    """Two independent routes to the same quantity disagree."""

    code = "internal_inconsistency"


class DegreeMismatch(LiouvilleError, ValueError):
    code = "degree_mismatch"


class NonMonic(LiouvilleError, ValueError):
    code = "non_monic"


class RootFindingFailure(LiouvilleError, RuntimeError):
    code = "root_finding_failure"


class InconsistentPair(LiouvilleError, ValueError):
    code = "inconsistent_pair"


class BlowupInIntegration(LiouvilleError, RuntimeError):
    code = "blowup_in_integration"


class NewtonDiverged(LiouvilleError, RuntimeError):
    code = "newton_diverged"


class SingularJacobian(LiouvilleError, RuntimeError):
    code = "singular_jacobian"

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class BranchLost(LiouvilleError, RuntimeError):
    code = "branch_lost"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class IoError(LiouvilleError, OSError):
    code = "io_error"


class UsageError(LiouvilleError, ValueError):
    """Bad command-line flag; ``flag`` names the offender."""

    code = "usage_error"

    def __init__(self, message, flag=None):
        super().__init__(message)
        self.flag = flag
