"""Exception types shared across the package."""


class BudgetExceeded(RuntimeError):
    """A growing tree would exceed its vertex budget.

    The replica must be redrawn or the cap raised; a partially grown tree is
    never returned.
    """

    def __init__(self, cap, needed):
        super().__init__(f"vertex budget {cap} exceeded (at least {needed} needed)")
        self.cap = cap
        self.needed = needed


class UnknownVertex(KeyError):
    """Vertex id outside the tree's dense id range."""


class InvalidMatrix(ValueError):
    """Branch-time matrix violates a structural invariant."""


class OutOfRange(ValueError):
    """A height or time argument lies outside its admissible interval."""


class KTooLarge(ValueError):
    """Shape-space request beyond the supported leaf count."""


class ShapeMismatch(ValueError):
    """Operation requires two trees with the same labelled shape."""


class EnumerationTooLarge(RuntimeError):
    """Lattice enumeration would exceed the configured guard."""


class InadmissibleBond(ValueError):
    """Bond outside the displacement range, or a self-loop."""


class RangeError(ValueError):
    """Argument outside the domain of a closed-form limit."""


class InvalidShapeTimes(ValueError):
    """Shape-with-times violates the ancestral time ordering."""


class EmptySample(ValueError):
    """Statistic of an empty sample requested."""


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, wrong type, bad value)."""


class AcceptanceFloor(RuntimeError):
    """Empirical acceptance rate of a conditioned run fell below the floor."""

    def __init__(self, rate, floor):
        super().__init__(f"acceptance rate {rate:.3g} below floor {floor:.3g}")
        self.rate = rate
        self.floor = floor
