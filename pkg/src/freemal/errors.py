"""Exceptions raised by the freemal library.

Everything derives from ``ValueError`` through ``FreeGroupError`` so that
callers can catch a single type for bad input.
"""


class FreeGroupError(ValueError):
    pass


class AlphabetError(FreeGroupError):
    """Letter outside the alphabet, or operands over different alphabets."""


class WordFormatError(FreeGroupError):
    """Unparsable word or automorphism text."""

    def __init__(self, message: str, token: str = None):
        super().__init__(message)
        self.token = token


class WordTooShortError(FreeGroupError):
    pass


class GraphFormatError(FreeGroupError):
    """Malformed graph document, or a graph that is not folded/core."""


class MembershipError(FreeGroupError):
    pass


class DecompositionError(FreeGroupError):
    """The graph does not split into a central tree plus outer loops."""


class PreconditionError(FreeGroupError):
    pass


class CapabilityError(FreeGroupError):
    pass


class TowerInvariantError(FreeGroupError):
    pass


class UnknownEventError(FreeGroupError):
    pass
