"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class AbsoluteContinuityError(DomainError):
    """KL(q || p) requested with q_i > 0 where p_i == 0."""


class InfeasibleTargetError(RuntimeError):
    """No fragility value makes the loss target attainable."""


class DegenerateClassError(DomainError):
    """A resampling schedule would leave a class with no samples."""


class BoundVacuousError(DomainError):
    """The requested bound is trivial for the given inputs."""
