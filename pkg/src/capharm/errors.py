"""Exception hierarchy shared by every module."""


class CapharmError(Exception):
    """Base class for toolkit errors."""


class ParseError(CapharmError):
    """A malformed line in an input file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class IntegrityError(CapharmError):
    """A dangling reference or a violated structural invariant."""


class DomainError(CapharmError, ValueError):
    """Arguments outside the domain of an operation."""


class NotFoundError(CapharmError, LookupError):
    """A lemma or synset that is absent from the loaded database."""


class ConfigError(CapharmError):
    """Missing or inconsistent run configuration."""


class DegenerateDataError(DomainError):
    """Training data that cannot identify a model (e.g. one class only)."""
