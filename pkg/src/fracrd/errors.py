"""Exception hierarchy shared by all fracrd modules."""


class FracRDError(Exception):
    """Base class for every error raised by fracrd."""


class DomainError(FracRDError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(FracRDError, ValueError):
    """Invalid or incomplete configuration."""


class AssemblyError(FracRDError, ArithmeticError):
    """Stiffness assembly produced non-finite entries."""


class OracleError(FracRDError, ArithmeticError):
    """The direct-quadrature oracle failed to reach its tolerance."""


class BlowUpError(FracRDError):
    """A nodal value exceeded the blow-up threshold or became non-finite."""

    def __init__(self, t, species, value, iterate=None):
        self.t = t
        self.species = species
        self.value = value
        self.iterate = iterate
        super().__init__(f"blow-up at t={t:.6g}: species {species} reached {value:.6g}")


class FixedPointError(FracRDError):
    """Picard iteration did not reach the tolerance within the iteration budget."""

    def __init__(self, t, iterations, increment, iterate):
        self.t = t
        self.iterations = iterations
        self.increment = increment
        self.iterate = iterate
        super().__init__(
            f"fixed point not converged at t={t:.6g} after {iterations} iterations "
            f"(last increment {increment:.3e})"
        )
