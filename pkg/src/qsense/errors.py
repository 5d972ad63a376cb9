"""Exception hierarchy shared by all qsense modules."""


class QSenseError(Exception):
    """Base class for every error raised by qsense."""


class InvalidInputError(QSenseError, ValueError):
    """Malformed or mismatched arguments."""


class DomainError(QSenseError, ValueError):
    """A parameter lies outside the domain of the model or channel."""


class DegenerateModelError(QSenseError, ValueError):
    """Zero Fisher information, so no finite precision bound exists."""


class InsensitiveObservableError(QSenseError, ValueError):
    """The observable does not respond to the parameter."""


class CapacityError(QSenseError):
    """The requested truncation or dimension exceeds the resource limit."""


class TruncationError(QSenseError):
    """Fock-space truncation lost more norm than allowed."""

    def __init__(self, message, required_cutoff=None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class InvalidFamilyError(QSenseError, ValueError):
    """A parameter family that should be unitary is not."""


class UnidentifiableError(QSenseError):
    """The likelihood carries no information about the parameter."""
