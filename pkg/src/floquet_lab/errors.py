"""Exception hierarchy shared across the toolkit."""


class FloquetLabError(Exception):
    """Base class for all toolkit errors."""


class ResolventSingularError(FloquetLabError):
    """The spectral parameter sits (numerically) on the spectrum of the
    non-resonant block, so the inner resolvent solve is ill posed."""

    def __init__(self, energy, gap):
        self.energy = energy
        self.gap = gap
        super().__init__(
            f"resolvent singular: E={energy!r} is within {gap:.3e} of the "
            "non-resonant block spectrum"
        )


class ResonanceCollisionError(FloquetLabError):
    """The restricted operator (H restricted to the complement of the
    resonant site, minus E) is numerically singular.  Signals a second
    resonance inside the box or a hopping amplitude too large for the
    single-resonance setup."""


class NewtonDivergenceError(FloquetLabError):
    """Residuals failed to contract in the regime where contraction is
    guaranteed; indicates a bug rather than a borderline input."""


class ClassificationError(FloquetLabError):
    """An eigenvector matched neither the single-center nor the
    two-center localization template."""

    def __init__(self, message, mass_distribution=None):
        self.mass_distribution = mass_distribution
        super().__init__(message)
