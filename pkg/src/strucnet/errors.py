"""Exception types shared across the package."""


class StrucnetError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StrucnetError):
    """Matrix or pattern dimensions are inconsistent."""


class NotObservableError(StrucnetError):
    """An operation that requires a generically observable system got one that is not."""


class SRankDeficientError(StrucnetError):
    """State-fusion-only design requested for a structurally rank-deficient system matrix."""


class PlacementError(StrucnetError):
    """A parent strongly connected component is not measured by any agent.

    Carries the offending component as a frozenset of 0-indexed states.
    """

    def __init__(self, component):
        self.component = frozenset(component)
        states = ", ".join(f"x{v + 1}" for v in sorted(self.component))
        super().__init__(f"parent component {{{states}}} has no measuring agent")


class StructuralError(StrucnetError):
    """Gain synthesis attempted on a structure with no stabilizing gain."""


class NoStabilizingGainFound(StrucnetError):
    """Gain search exhausted its budget without reaching a stable error dynamics.

    Carries the best spectral radius achieved.
    """

    def __init__(self, best_rho: float, iterations: int = 0):
        self.best_rho = float(best_rho)
        self.iterations = int(iterations)
        super().__init__(
            f"no stabilizing gain found (best spectral radius {self.best_rho:.6g} "
            f"after {self.iterations} iterations)"
        )


class ParseError(StrucnetError):
    """A system, topology, or gain file is malformed or inconsistent."""
