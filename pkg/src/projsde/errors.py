"""Exception hierarchy shared by all modules."""


class ProjSDEError(Exception):
    """Base class for library errors."""


class ConfigError(ProjSDEError):
    """Invalid or incomplete experiment configuration."""


class NumericalError(ProjSDEError):
    """Base class for numerical failures surfaced with a distinct CLI exit code."""


class NonPositiveSigma(ProjSDEError):
    """The diffusion coefficient is not strictly positive on the probe grid."""


class SimulationDiverged(NumericalError):
    """A simulated path produced non-finite values."""


class DegenerateKnots(ProjSDEError):
    """Spline basis requested with fewer than one knot interval."""


class SingularDesign(NumericalError):
    """The empirical design Gram matrix is singular and the ball constraint is inactive."""


class MissingFineGrid(ProjSDEError):
    """The residual decomposition needs the fine simulation grid, which was not kept."""


class QuadratureFailure(NumericalError):
    """A quadrature used by the density transforms did not converge."""


class CodebookInfeasible(ProjSDEError):
    """More codewords were requested than the Varshamov-Gilbert bound guarantees."""


class InsufficientRungs(ProjSDEError):
    """A rate ladder needs at least four rungs."""


class DegenerateAbscissae(ProjSDEError):
    """Slope fit requested on fewer than two distinct abscissae."""


class PreconditionError(ProjSDEError, ValueError):
    """An operation was called outside its documented domain."""
