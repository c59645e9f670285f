"""Exception and warning types raised across the package."""


class NonSummable(ValueError):
    """The excursion weights phi(k)/k^c do not sum to a finite value."""


class CapTooSmall(ValueError):
    """A computation needs law tables beyond the tabulated cap."""


class BracketFailure(RuntimeError):
    """No sign change was found while bracketing a root."""


class NoRoot(RuntimeError):
    """The crossover equation has no root in the admissible regime."""


class OutOfRange(ValueError):
    """Argument lies outside the image of the tabulated grid."""


class BlockMisaligned(ValueError):
    """System size is not a multiple of the coarse-graining block."""


class TooLarge(ValueError):
    """Enumeration size exceeds the brute-force limit."""


class CapBias(UserWarning):
    """Capped recursion dropped excursion mass above the tolerance."""
