from __future__ import annotations


class MagboundError(Exception):
    """Base class for every error raised by the package."""


class SingularModelError(MagboundError, ValueError):
    """The Fisher matrix cannot be inverted: not all three fields are estimable."""


class DegenerateStateError(MagboundError, ValueError):
    """A guarded denominator of a closed-form construction vanishes."""


class DimensionError(MagboundError, ValueError):
    pass


class NonConvergenceError(MagboundError, RuntimeError):
    """Independent restarts of an optimizer disagree beyond tolerance."""


class InvalidConfigError(MagboundError, ValueError):
    pass
