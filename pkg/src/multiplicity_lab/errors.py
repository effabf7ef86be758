class LabError(Exception):
    """Base class for every error raised by multiplicity_lab."""


class DimensionError(LabError, ValueError):
    pass


class EmptySetError(LabError, ValueError):
    pass


class NonFiniteError(LabError, ValueError):
    pass


class DomainError(LabError, ValueError):
    """An argument lies outside the validated domain of a function."""


class HypothesisError(LabError):
    """A hypothesis of a multiplicity result failed validation.

    ``check`` names the failing check so callers (and reports) can say which
    one tripped.
    """

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class NoWitnessFound(LabError):
    """A finite search exhausted its budget without producing a witness.

    This is a reported outcome rather than a failure: the existence results
    being exercised are statements about a continuum, and a finite lattice
    can miss thin structures.  ``best`` carries the most promising candidate
    seen, when there is one.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(LabError, ValueError):
    pass
