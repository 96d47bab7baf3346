"""Exception types shared across the package."""


class MdlabError(Exception):
    """Base class for all package-specific errors."""


class NonConvergent(MdlabError):
    """A quadrature or extrapolation failed to reach the requested tolerance."""


class BranchViolation(MdlabError):
    """Argument lies on the branch cut of a principal logarithm."""


class AtPole(MdlabError):
    """Evaluation requested within the pole-proximity tolerance of a lattice pole."""


class LadderOverflow(MdlabError):
    """Continuation would need more functional-equation steps than allowed."""


class WrongRegime(MdlabError):
    """Operation requires a different regime of the modulus (e.g. Im b^2 > 0)."""


class Degenerate(MdlabError):
    """A resonant modulus makes a product factor vanish."""


class BudgetExceeded(MdlabError):
    """Evaluation budget for adaptive quadrature exhausted."""


class NoDecay(MdlabError):
    """Integrand tail samples do not decrease; truncation unjustified."""


class OutOfStrip(MdlabError):
    """Parameters outside the convergence strip of an integral representation."""


class UnstableEta(MdlabError):
    """Halving the i0-offset changed a kernel value beyond tolerance."""


class GridTooCoarse(MdlabError):
    """Grid refinement and regulator halving disagree beyond tolerance."""


class NotPositive(MdlabError):
    """An operator that must be positive has spectrum below the floor."""


class TruncationLeak(MdlabError):
    """Verma truncation artifacts detected in a supposedly safe subspace."""


class Unbounded(MdlabError):
    """Test states lack the decay required by an unbounded weight."""


class ConfigInvalid(MdlabError):
    """CLI / suite configuration is not usable."""
