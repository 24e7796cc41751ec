"""Exception types shared across the package."""


class CoopcapError(Exception):
    """Base class for errors raised by this package."""


class MemoryCapExceeded(CoopcapError):
    """Requested alphabet size exceeds the configured memory cap."""


class ConstructionExhausted(CoopcapError):
    """Rejection sampling ran out of attempts without an acceptable matrix."""


class ChannelFormatError(CoopcapError):
    """Malformed channel file.

    ``offset`` is the byte position of the first offending byte when it can
    be pinned down, else None.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class HypothesisViolation(CoopcapError):
    """A closed form was requested outside the regime where it is valid.

    ``failed`` lists the violated inequalities as human-readable strings.
    """

    def __init__(self, failed):
        self.failed = tuple(failed)
        super().__init__("hypotheses violated: " + "; ".join(self.failed))


class InvariantViolation(CoopcapError):
    """An internal guarantee was broken; indicates a bug or corrupted input."""
