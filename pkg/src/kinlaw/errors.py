"""Exception hierarchy shared by all kinlaw modules."""


class KinlawError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(KinlawError):
    """Invalid or inconsistent experiment configuration."""


class NumericalError(KinlawError):
    """Base class for failures of a numerical routine."""


class DomainError(NumericalError):
    """A state left the admissible domain of the chart."""


class HyperbolicityError(NumericalError):
    """Eigenvalues too close (or complex) at a sampled state."""


class ConvergenceError(NumericalError):
    """An iterative solve did not converge."""


class NotGnlError(NumericalError):
    """Genuine nonlinearity fails on the sample grid."""


class QuadratureError(NumericalError):
    """A quadrature integrand became non-finite."""


class GridError(NumericalError):
    """A requested cut value is not representable on the grid."""


class StripError(NumericalError):
    """A strict kinetic-speed query fell outside the positivity strip."""


class DegenerateStripError(NumericalError):
    """No admissible strip width could be found."""


class GridMismatchError(NumericalError):
    """Sample grids do not match the family grids."""


class StabilityError(NumericalError):
    """Time step violates the explicit stability limits."""


class ChartMismatchError(NumericalError):
    """Solution and family were built for different charts."""


class WindowExitError(NumericalError):
    """A traced curve left the space-time window.

    The partial curve is available as ``curve``.
    """

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


class EmptyBandError(NumericalError):
    """The selected kinetic band carries no mass."""


class GeometryError(NumericalError):
    """Curves used by the interaction functional crossed."""


class BoundaryError(NumericalError):
    """A diagnostic ball does not fit inside the window."""


class FormatError(KinlawError):
    """Persisted data does not match its manifest."""
