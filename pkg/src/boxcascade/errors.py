"""Exception types shared across the package."""


class BoxCascadeError(Exception):
    """Base class for package-specific failures."""


class LatticeLawError(BoxCascadeError):
    """Raised when an asymptotic-constant routine receives a lattice (geometric) law."""


class ProfileDomainError(BoxCascadeError):
    """Raised when a Laplace transform is evaluated at or below its domain boundary."""


class EstimateDivergedError(BoxCascadeError):
    """Raised when a Monte Carlo transform estimate fails the finiteness heuristic."""


class InconclusiveRootError(BoxCascadeError):
    """Raised when a critical exponent search hits the probe bound without a verdict."""


class StabilizationError(BoxCascadeError):
    """Raised when a limit sequence has not stabilized by the probe bound."""


class UnsupportedRegimeError(BoxCascadeError):
    """Raised when a requested constant or measurement is outside its regime of validity."""


class BudgetExceededError(BoxCascadeError):
    """Raised when a tree expansion exceeds its node-visit budget."""

    def __init__(self, message, generation=None, visited=None):
        super().__init__(message)
        self.generation = generation
        self.visited = visited
