"""Exception types shared across the package."""


class NesslabError(Exception):
    """Base class for all package errors."""


class ConfigError(NesslabError):
    """Bad, missing, or unknown configuration input."""


class NonConvergence(NesslabError):
    """Independent evaluation routes disagree beyond tolerance."""


class OutOfBand(NesslabError):
    """Frequency outside the reservoir band where a boundary value is undefined."""


class PoleHit(NesslabError):
    """Evaluation point collides with a system level."""


class SingularMatrix(NesslabError):
    """Dense solve failed its residual check."""


class BoundState(NesslabError):
    """Lambda vanished at a sampled energy: no complete incoming field there."""


class GridMismatch(NesslabError):
    """Coefficient vectors sampled on incompatible grids."""


class TooManyModes(NesslabError):
    """Fock-space oracle request beyond the mode cap."""


class TruncationBudget(NesslabError):
    """Series would need more terms than the order budget."""


class NotPositive(NesslabError):
    """Matrix fails the positive-semidefinite precondition."""


class SlowConvergence(NesslabError):
    """Series stalls (nearly singular input); caller should fall back to the eigen route."""


class OutsideDisk(NesslabError):
    """Resolvent expansion point inside the norm disk: series divergent."""


class Overflow(NesslabError):
    """Norm rescaling produced a non-finite value."""


class RecurrenceRisk(NesslabError):
    """Requested evolution time too close to the finite-lattice recurrence time."""


class GridTooCoarse(NesslabError):
    """Doubling the quadrature grid moved the result beyond tolerance."""
