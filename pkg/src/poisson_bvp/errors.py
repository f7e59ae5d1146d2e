"""Exception taxonomy shared by the solvers and the command line."""


class PoissonBVPError(Exception):
    """Base class for solver failures."""


class NoFixedPoint(PoissonBVPError):
    """The boundary relation x = psi(phi_1(x)) has no root in any bracket."""


class MultipleSolutions(PoissonBVPError):
    """The boundary relation is satisfied on a whole interval of x."""


class CapabilityError(PoissonBVPError):
    """A required analytic partial or envelope was not declared."""


class PreconditionError(PoissonBVPError):
    """Inputs violate a hypothesis the solver relies on."""


class NumericalOverflow(PoissonBVPError, ArithmeticError):
    """A non-finite value appeared during integration."""
