"""Exception hierarchy.

Input problems derive from ``ValueError`` so callers can catch them
generically; :class:`InternalInvariantError` marks a failed internal
assertion (a bug, never bad input).
"""


class TrkError(Exception):
    pass


class ShapeError(TrkError, ValueError):
    pass


class DomainError(TrkError, ValueError):
    pass


class PreconditionError(TrkError, ValueError):
    pass


class UnsupportedParametersError(TrkError, ValueError):
    pass


class ResourceGuardError(TrkError, ValueError):
    pass


class InternalInvariantError(TrkError, AssertionError):
    """Raised when a step that must succeed by construction did not.

    ``step`` names the failed stage, e.g. ``"cover"`` or ``"lambda_boost"``.
    """

    def __init__(self, step, message):
        super().__init__(f"[{step}] {message}")
        self.step = step
